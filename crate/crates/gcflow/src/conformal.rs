//! Conformal metrics g = e^{2u} c on the sphere: curvature, volume,
//! energies, Moebius transformations, and the center-of-mass gauge.
//!
//! The curvature of g = e^{2u} c is computed as K = e^{-2u} (1 - Lap u),
//! the sign for which Gauss-Bonnet int K dv_g = 4 pi holds for every u.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{GcError, GcResult};
use crate::sphere::grid::{integrate_product, integrate_unchecked, GridField, SphereGrid};
use crate::sphere::spectral::{analyze_to, eval_point, grad_energy, laplacian, synthesize, SpectralField};

/// Largest |u| before e^{+-2u} is considered out of range.
pub const EXP_SUP_LIMIT: f64 = 300.0;

/// Log conformal factor with its harmonic coefficients kept in sync.
///
/// The spectral cache is taken at the largest degree the grid analyzes
/// exactly, not just the declared bandlimit: for band-limited data the extra
/// coefficients vanish, while for sampled data (Moebius factors, exponential
/// nonlinearities) they carry real tail content that the Laplacian needs.
#[derive(Clone, Debug)]
pub struct ConformalFactor {
    u: GridField,
    spectral: SpectralField,
}

impl ConformalFactor {
    pub fn zero(grid: Arc<SphereGrid>) -> Self {
        let lmax = grid.max_exact_bandlimit;
        Self {
            u: GridField::zeros(grid),
            spectral: SpectralField::zeros(lmax),
        }
    }

    /// Build from grid samples; the cache is the harmonic analysis of `u`.
    pub fn from_grid(u: GridField) -> GcResult<Self> {
        u.check_finite()?;
        let spectral = analyze_to(&u, u.grid.max_exact_bandlimit)?;
        Ok(Self { u, spectral })
    }

    /// Build from coefficients; the samples are the synthesis of `a`.
    pub fn from_spectral(a: &SpectralField, grid: &Arc<SphereGrid>) -> GcResult<Self> {
        let u = synthesize(a, grid)?;
        let spectral = a.resized(grid.max_exact_bandlimit);
        Ok(Self { u, spectral })
    }

    pub fn field(&self) -> &GridField {
        &self.u
    }

    pub fn spectral(&self) -> &SpectralField {
        &self.spectral
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.u.grid
    }

    pub fn sup_norm(&self) -> f64 {
        self.u.sup_norm()
    }

    /// Shift u by a constant, keeping grid and cache consistent.
    pub fn add_constant(&mut self, c: f64) {
        self.u.add_constant(c);
        // constant c contributes c * sqrt(4 pi) to the (0,0) coefficient
        let idx = SpectralField::index(0, 0);
        self.spectral.coeffs[idx] += c * (4.0 * PI).sqrt();
    }

    /// e^{2u} sampled on the grid.
    pub fn area_density(&self) -> GcResult<GridField> {
        if self.sup_norm() > EXP_SUP_LIMIT {
            return Err(GcError::Overflow(format!(
                "sup |u| = {} exceeds {EXP_SUP_LIMIT}",
                self.sup_norm()
            )));
        }
        Ok(self.u.map(|v| (2.0 * v).exp()))
    }
}

/// Gaussian curvature K = e^{-2u} (1 - Lap u) of g = e^{2u} c.
pub fn gaussian_curvature(cf: &ConformalFactor) -> GcResult<GridField> {
    if cf.sup_norm() > EXP_SUP_LIMIT {
        return Err(GcError::Overflow(format!(
            "sup |u| = {} exceeds {EXP_SUP_LIMIT}",
            cf.sup_norm()
        )));
    }
    // skip the all-zero spectral tail of band-limited states
    let band = cf.spectral().effective_bandlimit();
    let lap = synthesize(&laplacian(&cf.spectral().resized(band)), cf.grid())?;
    Ok(cf.field().zip_map(&lap, |u, l| (-2.0 * u).exp() * (1.0 - l)))
}

/// Total area int e^{2u} dv_c of the conformal metric.
pub fn volume(cf: &ConformalFactor) -> GcResult<f64> {
    Ok(integrate_unchecked(&cf.area_density()?))
}

/// Liouville energy E(u) = int (|grad u|^2 + 2u) dc  (dc = dv_c / 4 pi).
pub fn liouville_energy(cf: &ConformalFactor) -> f64 {
    (grad_energy(cf.spectral()) + 2.0 * integrate_unchecked(cf.field())) / (4.0 * PI)
}

/// Gap in the Onofri inequality: E(u) - log( int e^{2u} dc ), nonnegative
/// for every u with equality exactly on Moebius factors.
pub fn onofri_gap(cf: &ConformalFactor) -> GcResult<f64> {
    let vol = volume(cf)?;
    if vol <= 0.0 {
        return Err(GcError::InvalidData("nonpositive conformal volume".into()));
    }
    Ok(liouville_energy(cf) - (vol / (4.0 * PI)).ln())
}

/// Parameter of a Moebius transformation of the sphere: a conformal dilation
/// towards a/|a| of strength |a| < 1, optionally pre-composed with a rotation.
#[derive(Clone, Debug)]
pub struct MobiusParameter {
    pub a: [f64; 3],
    pub rotation: Option<[[f64; 3]; 3]>,
}

impl MobiusParameter {
    pub fn new(a: [f64; 3]) -> GcResult<Self> {
        let p = Self { a, rotation: None };
        p.validate()?;
        Ok(p)
    }

    pub fn identity() -> Self {
        Self {
            a: [0.0; 3],
            rotation: None,
        }
    }

    pub fn with_rotation(a: [f64; 3], rotation: [[f64; 3]; 3]) -> GcResult<Self> {
        let p = Self {
            a,
            rotation: Some(rotation),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn strength(&self) -> f64 {
        dot(&self.a, &self.a).sqrt()
    }

    pub fn validate(&self) -> GcResult<()> {
        let s = self.strength();
        if !(s < 1.0 - 1e-9) || !s.is_finite() {
            return Err(GcError::InvalidArgument(format!(
                "Moebius parameter must satisfy |a| < 1 - 1e-9, got |a| = {s}"
            )));
        }
        if let Some(r) = &self.rotation {
            // R^T R = I and det R = 1, both to 1e-12
            let mut rt_r = [[0.0f64; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        rt_r[i][j] += r[k][i] * r[k][j];
                    }
                }
            }
            for i in 0..3 {
                for j in 0..3 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    if (rt_r[i][j] - expect).abs() > 1e-12 {
                        return Err(GcError::InvalidArgument(
                            "rotation matrix is not orthogonal to 1e-12".into(),
                        ));
                    }
                }
            }
            let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
                - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
                + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
            if (det - 1.0).abs() > 1e-12 {
                return Err(GcError::InvalidArgument(
                    "rotation matrix determinant differs from 1".into(),
                ));
            }
        }
        Ok(())
    }

    fn apply_rotation(&self, x: &[f64; 3]) -> [f64; 3] {
        match &self.rotation {
            None => *x,
            Some(r) => [
                r[0][0] * x[0] + r[0][1] * x[1] + r[0][2] * x[2],
                r[1][0] * x[0] + r[1][1] * x[1] + r[1][2] * x[2],
                r[2][0] * x[0] + r[2][1] * x[1] + r[2][2] * x[2],
            ],
        }
    }
}

#[inline]
fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// The dilation D_a: points slide towards -a/|a|; the pulled-back area
/// element concentrates at +a/|a|.
///
/// In closed form, with s = |a|, n = a/s and c = x . n:
///   D_a(x) = ((c - s) n + sqrt(1 - s^2) (x - c n)) / (1 - s c).
pub fn mobius_map(p: &MobiusParameter, x: &[f64; 3]) -> [f64; 3] {
    let x = p.apply_rotation(x);
    let s = p.strength();
    if s < 1e-15 {
        return x;
    }
    let n = [p.a[0] / s, p.a[1] / s, p.a[2] / s];
    let c = dot(&x, &n);
    let denom = 1.0 - s * c;
    let radial = (c - s) / denom;
    let tangential = (1.0 - s * s).sqrt() / denom;
    [
        radial * n[0] + tangential * (x[0] - c * n[0]),
        radial * n[1] + tangential * (x[1] - c * n[1]),
        radial * n[2] + tangential * (x[2] - c * n[2]),
    ]
}

/// Log conformal factor of the Moebius map: (1/2) log det(d phi_p), which in
/// closed form is  u_p(x) = (1/2) log( (1 - |a|^2) / (1 - a . Rx)^2 ).
pub fn mobius_log_factor(p: &MobiusParameter, x: &[f64; 3]) -> f64 {
    let x = p.apply_rotation(x);
    let s2 = dot(&p.a, &p.a);
    if s2 < 1e-30 {
        return 0.0;
    }
    0.5 * (1.0 - s2).ln() - (1.0 - dot(&p.a, &x)).ln()
}

/// The conformal factor of the pulled-back round metric phi_p^* c.
pub fn mobius_factor(p: &MobiusParameter, grid: &Arc<SphereGrid>) -> GcResult<ConformalFactor> {
    p.validate()?;
    let u = GridField::from_fn(grid.clone(), |x| mobius_log_factor(p, x));
    ConformalFactor::from_grid(u)
}

/// Pullback v = u o phi_p + (1/2) log det(d phi_p); the composition is
/// evaluated by harmonic synthesis of `u` at the mapped nodes, which is
/// exact for band-limited u.
pub fn mobius_pullback(cf: &ConformalFactor, p: &MobiusParameter) -> GcResult<ConformalFactor> {
    p.validate()?;
    let grid = cf.grid().clone();
    let spectral = cf.spectral().resized(cf.spectral().effective_bandlimit());
    let spectral = &spectral;
    let n_lon = grid.n_lon;
    let mut values = ndarray::Array2::zeros((grid.n_lat, n_lon));
    let g = grid.clone();
    values
        .as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(n_lon)
        .enumerate()
        .for_each(|(i, row)| {
            let mut scratch = Vec::new();
            for (j, v) in row.iter_mut().enumerate() {
                let x = g.node(i, j);
                let y = mobius_map(p, &x);
                let cos_theta = y[2].clamp(-1.0, 1.0);
                let phi = y[1].atan2(y[0]);
                *v = eval_point(spectral, cos_theta, phi, &mut scratch) + mobius_log_factor(p, &x);
            }
        });
    ConformalFactor::from_grid(GridField { grid, values })
}

/// Conformal center of mass: int x e^{2u} dv_c / int e^{2u} dv_c.
pub fn center_of_mass(cf: &ConformalFactor) -> GcResult<[f64; 3]> {
    let density = cf.area_density()?;
    let grid = cf.grid();
    let mut num = [0.0f64; 3];
    let mut den = 0.0f64;
    for i in 0..grid.n_lat {
        let row = density.values.row(i);
        let w = grid.weights[i];
        let mut rn = [0.0f64; 3];
        let mut rd = 0.0f64;
        for (j, &e2u) in row.iter().enumerate() {
            let x = grid.node(i, j);
            rn[0] += e2u * x[0];
            rn[1] += e2u * x[1];
            rn[2] += e2u * x[2];
            rd += e2u;
        }
        num[0] += w * rn[0];
        num[1] += w * rn[1];
        num[2] += w * rn[2];
        den += w * rd;
    }
    if den <= 0.0 {
        return Err(GcError::InvalidData("nonpositive conformal volume".into()));
    }
    Ok([num[0] / den, num[1] / den, num[2] / den])
}

/// Center of mass of the pullback by D_a without forming the pullback:
/// by change of variables it equals int D_{-a}(y) e^{2u(y)} dv_c / volume.
fn pullback_center_of_mass(density: &GridField, total: f64, a: &[f64; 3]) -> [f64; 3] {
    let grid = &density.grid;
    let p_inv = MobiusParameter {
        a: [-a[0], -a[1], -a[2]],
        rotation: None,
    };
    let mut num = [0.0f64; 3];
    for i in 0..grid.n_lat {
        let row = density.values.row(i);
        let w = grid.weights[i];
        let mut rn = [0.0f64; 3];
        for (j, &e2u) in row.iter().enumerate() {
            let y = grid.node(i, j);
            let z = mobius_map(&p_inv, &y);
            rn[0] += e2u * z[0];
            rn[1] += e2u * z[1];
            rn[2] += e2u * z[2];
        }
        num[0] += w * rn[0];
        num[1] += w * rn[1];
        num[2] += w * rn[2];
    }
    [num[0] / total, num[1] / total, num[2] / total]
}

/// Residual target for the recentering solve.
const RECENTER_TOL: f64 = 1e-12;
/// Contract on the recentered state.
const RECENTER_CONTRACT: f64 = 1e-9;

/// Find the Moebius gauge in which the conformal center of mass vanishes.
///
/// Damped Newton on F(a) = center_of_mass(pullback(u, a)) over the open unit
/// ball, with the Jacobian by central finite differences (step 1e-5) and a
/// step-halving line search on |F|. Initial guess a = -m / (1 + |m|) where
/// m is the current center of mass.
pub fn recenter(cf: &ConformalFactor) -> GcResult<(ConformalFactor, MobiusParameter)> {
    let vol = volume(cf)?;
    let lo = 4.0 * PI * (-60.0f64).exp();
    let hi = 4.0 * PI * 60.0f64.exp();
    if !(vol >= lo && vol <= hi) {
        return Err(GcError::InvalidArgument(format!(
            "volume {vol} outside the recenterable range"
        )));
    }
    let density = cf.area_density()?;
    let total = integrate_unchecked(&density);

    let f_eval = |a: &[f64; 3]| -> [f64; 3] { pullback_center_of_mass(&density, total, a) };

    let m0 = pullback_center_of_mass(&density, total, &[0.0; 3]);
    let m0_norm = norm3(&m0);
    if m0_norm <= RECENTER_TOL {
        return Ok((cf.clone(), MobiusParameter::identity()));
    }
    let mut a = [
        -m0[0] / (1.0 + m0_norm),
        -m0[1] / (1.0 + m0_norm),
        -m0[2] / (1.0 + m0_norm),
    ];
    clamp_ball(&mut a);
    let mut f = f_eval(&a);
    let mut f_norm = norm3(&f);
    let fd_step = 1e-5;
    let mut converged = f_norm <= RECENTER_TOL;

    for _iter in 0..100 {
        if converged {
            break;
        }
        // central-difference Jacobian
        let mut jac = [[0.0f64; 3]; 3];
        for k in 0..3 {
            let mut ap = a;
            let mut am = a;
            ap[k] += fd_step;
            am[k] -= fd_step;
            clamp_ball(&mut ap);
            clamp_ball(&mut am);
            let fp = f_eval(&ap);
            let fm = f_eval(&am);
            for r in 0..3 {
                jac[r][k] = (fp[r] - fm[r]) / (ap[k] - am[k]);
            }
        }
        let rhs = [-f[0], -f[1], -f[2]];
        let Some(step) = solve3(&jac, &rhs) else {
            return Err(GcError::NoConvergence(
                "singular Jacobian in recentering Newton iteration".into(),
            ));
        };
        // step-halving line search on |F|
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let mut trial = [
                a[0] + lambda * step[0],
                a[1] + lambda * step[1],
                a[2] + lambda * step[2],
            ];
            clamp_ball(&mut trial);
            let ft = f_eval(&trial);
            let ft_norm = norm3(&ft);
            if ft_norm < f_norm {
                a = trial;
                f = ft;
                f_norm = ft_norm;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
        converged = f_norm <= RECENTER_TOL;
    }

    if !converged && f_norm > RECENTER_CONTRACT {
        return Err(GcError::NoConvergence(format!(
            "recentering Newton stalled at |F| = {f_norm}"
        )));
    }

    let p = MobiusParameter::new(a)?;
    let v = mobius_pullback(cf, &p)?;
    let residual = norm3(&center_of_mass(&v)?);
    if residual > RECENTER_CONTRACT {
        return Err(GcError::NoConvergence(format!(
            "recentered state has |center of mass| = {residual}"
        )));
    }
    Ok((v, p))
}

#[inline]
fn norm3(v: &[f64; 3]) -> f64 {
    dot(v, v).sqrt()
}

fn clamp_ball(a: &mut [f64; 3]) {
    let s = norm3(a);
    let max_s = 1.0 - 1e-6;
    if s > max_s {
        let scale = max_s / s;
        a[0] *= scale;
        a[1] *= scale;
        a[2] *= scale;
    }
}

/// Solve a 3x3 linear system by Gaussian elimination with partial pivoting.
fn solve3(m: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let mut aug = [[0.0f64; 4]; 3];
    for i in 0..3 {
        aug[i][..3].copy_from_slice(&m[i]);
        aug[i][3] = b[i];
    }
    for col in 0..3 {
        let mut pivot = col;
        for r in (col + 1)..3 {
            if aug[r][col].abs() > aug[pivot][col].abs() {
                pivot = r;
            }
        }
        if aug[pivot][col].abs() < 1e-300 {
            return None;
        }
        aug.swap(col, pivot);
        for r in (col + 1)..3 {
            let factor = aug[r][col] / aug[col][col];
            for c in col..4 {
                aug[r][c] -= factor * aug[col][c];
            }
        }
    }
    let mut x = [0.0f64; 3];
    for i in (0..3).rev() {
        let mut s = aug[i][3];
        for j in (i + 1)..3 {
            s -= aug[i][j] * x[j];
        }
        x[i] = s / aug[i][i];
    }
    Some(x)
}

/// Dirichlet + L2 norm used for the H^1 diagnostics of recentered states.
pub fn h1_norm(cf: &ConformalFactor) -> f64 {
    let l2sq = integrate_product(cf.field(), cf.field());
    (grad_energy(cf.spectral()) + l2sq).sqrt()
}
