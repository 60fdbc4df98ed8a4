//! The prescribed curvature function f: analytic representation, critical
//! point search, and the hypothesis checks that decide whether f sits in the
//! regime where the flow is expected to converge.
//!
//! f is kept symbolic (ambient polynomial plus angular-Gaussian bumps) rather
//! than as grid data, because the checks involve Hessians and Laplacians at
//! exact critical points, which sampled data cannot certify.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::ConformalFactor;
use crate::error::{GcError, GcResult};
use crate::sphere::grid::{integrate_unchecked, GridField, SphereGrid};

/// One monomial coeff * x1^e1 x2^e2 x3^e3 of total degree <= 4.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolyTerm {
    pub exponents: [u8; 3],
    pub coefficient: f64,
}

/// Angular bump height * exp(-(angle to center)^2 / sigma^2).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BumpTerm {
    pub center: [f64; 3],
    pub sigma: f64,
    pub height: f64,
}

/// Symbolic description of the prescribed function.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurvatureSpec {
    pub name: String,
    #[serde(default)]
    pub poly: Vec<PolyTerm>,
    #[serde(default)]
    pub bumps: Vec<BumpTerm>,
}

impl CurvatureSpec {
    pub fn validate(&self) -> GcResult<()> {
        if self.poly.is_empty() && self.bumps.is_empty() {
            return Err(GcError::InvalidArgument(
                "curvature spec needs at least one term".into(),
            ));
        }
        for t in &self.poly {
            let deg: u8 = t.exponents.iter().sum();
            if deg > 4 {
                return Err(GcError::InvalidArgument(format!(
                    "monomial degree {deg} exceeds 4"
                )));
            }
            if !t.coefficient.is_finite() {
                return Err(GcError::InvalidArgument("non-finite coefficient".into()));
            }
        }
        for b in &self.bumps {
            if !(b.sigma > 0.0) || !b.sigma.is_finite() || !b.height.is_finite() {
                return Err(GcError::InvalidArgument("bad bump parameters".into()));
            }
            let n = len3(&b.center);
            if !(n > 0.0) || !n.is_finite() {
                return Err(GcError::InvalidArgument("bump center must be nonzero".into()));
            }
        }
        Ok(())
    }

    /// Constant function as a spec.
    pub fn constant(name: &str, c: f64) -> Self {
        Self {
            name: name.into(),
            poly: vec![PolyTerm {
                exponents: [0, 0, 0],
                coefficient: c,
            }],
            bumps: vec![],
        }
    }

    pub fn eval(&self, x: &[f64; 3]) -> f64 {
        let mut v = 0.0;
        for t in &self.poly {
            v += t.coefficient * powi3(x, &t.exponents);
        }
        for b in &self.bumps {
            let c = unit(&b.center);
            let t = dot(x, &c).clamp(-1.0, 1.0);
            let gamma = t.acos();
            v += b.height * (-gamma * gamma / (b.sigma * b.sigma)).exp();
        }
        v
    }

    /// Ambient gradient of the extension of f to R^3.
    pub fn grad_ambient(&self, x: &[f64; 3]) -> [f64; 3] {
        let mut g = [0.0f64; 3];
        for t in &self.poly {
            for k in 0..3 {
                let e = t.exponents[k];
                if e == 0 {
                    continue;
                }
                let mut exps = t.exponents;
                exps[k] -= 1;
                g[k] += t.coefficient * e as f64 * powi3(x, &exps);
            }
        }
        for b in &self.bumps {
            let c = unit(&b.center);
            let t = dot(x, &c).clamp(-1.0, 1.0);
            let fp = bump_dt(b.height, b.sigma, t);
            for k in 0..3 {
                g[k] += fp * c[k];
            }
        }
        g
    }

    /// Ambient Hessian of the extension of f to R^3.
    pub fn hess_ambient(&self, x: &[f64; 3]) -> [[f64; 3]; 3] {
        let mut h = [[0.0f64; 3]; 3];
        for t in &self.poly {
            for k in 0..3 {
                for l in 0..3 {
                    let ek = t.exponents[k];
                    if ek == 0 {
                        continue;
                    }
                    let mut exps = t.exponents;
                    exps[k] -= 1;
                    let el = exps[l];
                    if el == 0 {
                        continue;
                    }
                    exps[l] -= 1;
                    h[k][l] += t.coefficient * ek as f64 * el as f64 * powi3(x, &exps);
                }
            }
        }
        for b in &self.bumps {
            let c = unit(&b.center);
            let t = dot(x, &c).clamp(-1.0, 1.0);
            let fpp = bump_dtt(b.height, b.sigma, t);
            for k in 0..3 {
                for l in 0..3 {
                    h[k][l] += fpp * c[k] * c[l];
                }
            }
        }
        h
    }

    /// Tangential (spherical) gradient at a unit vector.
    pub fn grad_sphere(&self, x: &[f64; 3]) -> [f64; 3] {
        let g = self.grad_ambient(x);
        let r = dot(&g, x);
        [g[0] - r * x[0], g[1] - r * x[1], g[2] - r * x[2]]
    }

    /// Intrinsic 2x2 Hessian in the tangent basis (e1, e2) at x, plus the
    /// spherical Laplacian (its trace).
    pub fn hess_sphere(&self, x: &[f64; 3], e1: &[f64; 3], e2: &[f64; 3]) -> ([[f64; 2]; 2], f64) {
        let h = self.hess_ambient(x);
        let g = self.grad_ambient(x);
        let radial = dot(&g, x);
        let hv = |a: &[f64; 3], b: &[f64; 3]| {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += a[i] * h[i][j] * b[j];
                }
            }
            s
        };
        let h11 = hv(e1, e1) - radial;
        let h12 = hv(e1, e2);
        let h22 = hv(e2, e2) - radial;
        ([[h11, h12], [h12, h22]], h11 + h22)
    }

    /// Spherical Laplacian, basis-free.
    pub fn laplace_sphere(&self, x: &[f64; 3]) -> f64 {
        let (e1, e2) = tangent_basis(x);
        let (_, lap) = self.hess_sphere(x, &e1, &e2);
        lap
    }

    /// Sample onto a grid.
    pub fn evaluate_on(&self, grid: &Arc<SphereGrid>) -> GridField {
        GridField::from_fn(grid.clone(), |x| self.eval(x))
    }

    /// Maximum over a dense icosahedral scan (used for bounds on alpha).
    pub fn dense_max(&self) -> f64 {
        icosahedral_points(100)
            .iter()
            .fold(f64::NEG_INFINITY, |acc, p| acc.max(self.eval(p)))
    }

    pub fn dense_min(&self) -> f64 {
        icosahedral_points(100)
            .iter()
            .fold(f64::INFINITY, |acc, p| acc.min(self.eval(p)))
    }
}

/// d/dt of h exp(-gamma(t)^2/sigma^2) with gamma = arccos t.
fn bump_dt(h: f64, sigma: f64, t: f64) -> f64 {
    let gamma = t.acos();
    let e = h * (-gamma * gamma / (sigma * sigma)).exp();
    let sin_g = (1.0 - t * t).max(0.0).sqrt();
    if gamma < 1e-4 {
        // gamma/sin gamma -> 1 + gamma^2/6
        (2.0 * e / (sigma * sigma)) * (1.0 + gamma * gamma / 6.0)
    } else if sin_g < 1e-12 {
        // antipodal cone point: the derivative is O(e^{-pi^2/sigma^2}/sin),
        // irrelevant at double precision; treat as flat
        0.0
    } else {
        2.0 * e * gamma / (sigma * sigma * sin_g)
    }
}

/// d^2/dt^2 of the bump profile.
fn bump_dtt(h: f64, sigma: f64, t: f64) -> f64 {
    let gamma = t.acos();
    let s2 = sigma * sigma;
    let e = h * (-gamma * gamma / s2).exp();
    let sin_g = (1.0 - t * t).max(0.0).sqrt();
    if gamma < 1e-3 {
        (2.0 * e / s2) * (2.0 / s2 - 1.0 / 3.0)
    } else if sin_g < 1e-12 {
        0.0
    } else {
        // (W cos g - W' sin g) / sin^3 g with W = (2h/s2) g e^{-g^2/s2}
        let w = (2.0 * h / s2) * gamma * (-gamma * gamma / s2).exp();
        let wp = (2.0 * h / s2) * (-gamma * gamma / s2).exp() * (1.0 - 2.0 * gamma * gamma / s2);
        (w * t - wp * sin_g) / (sin_g * sin_g * sin_g)
    }
}

#[inline]
fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn len3(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
fn unit(a: &[f64; 3]) -> [f64; 3] {
    let n = len3(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

fn powi3(x: &[f64; 3], e: &[u8; 3]) -> f64 {
    let mut v = 1.0;
    for k in 0..3 {
        for _ in 0..e[k] {
            v *= x[k];
        }
    }
    v
}

/// Orthonormal tangent basis at a unit vector.
pub fn tangent_basis(x: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let pick = if x[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let r = dot(&pick, x);
    let mut e1 = [pick[0] - r * x[0], pick[1] - r * x[1], pick[2] - r * x[2]];
    let n = len3(&e1);
    e1 = [e1[0] / n, e1[1] / n, e1[2] / n];
    let e2 = [
        x[1] * e1[2] - x[2] * e1[1],
        x[2] * e1[0] - x[0] * e1[2],
        x[0] * e1[1] - x[1] * e1[0],
    ];
    (e1, e2)
}

/// Barycentric refinement of the icosahedron: the vertex lattice at
/// subdivision depth n, normalized to the sphere. Duplicates along shared
/// edges are harmless for seeding and are removed after refinement.
pub fn icosahedral_points(n: usize) -> Vec<[f64; 3]> {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let v: Vec<[f64; 3]> = raw.iter().map(unit).collect();
    let faces: [[usize; 3]; 20] = [
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let mut pts = Vec::with_capacity(20 * (n + 1) * (n + 2) / 2);
    for f in &faces {
        let (a, b, c) = (v[f[0]], v[f[1]], v[f[2]]);
        for i in 0..=n {
            for j in 0..=(n - i) {
                let k = n - i - j;
                let p = [
                    i as f64 * a[0] + j as f64 * b[0] + k as f64 * c[0],
                    i as f64 * a[1] + j as f64 * b[1] + k as f64 * c[1],
                    i as f64 * a[2] + j as f64 * b[2] + k as f64 * c[2],
                ];
                pts.push(unit(&p));
            }
        }
    }
    pts
}

/// Classification of an isolated critical point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CritClass {
    Max,
    Min,
    Saddle,
    Degenerate,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalPoint {
    pub location: [f64; 3],
    pub f_value: f64,
    pub hessian_eigenvalues: [f64; 2],
    pub laplacian: f64,
    pub class: CritClass,
}

/// A one-parameter degenerate critical set detected as a circle.
#[derive(Clone, Debug, Serialize)]
pub struct DegenerateCircle {
    pub axis: [f64; 3],
    pub offset: f64,
    pub f_value: f64,
    pub member_count: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalPointReport {
    pub points: Vec<CriticalPoint>,
    pub complete: bool,
    pub degenerate_circle: Option<DegenerateCircle>,
}

const GRAD_TOL: f64 = 1e-11;
const DEDUP_ANGLE: f64 = 1e-6;

/// Locate and classify the critical points of f.
///
/// Seeds come from an icosahedral lattice of >= 10^4 points; each seed is
/// refined by a trust-region Newton iteration on the tangential gradient,
/// refined points are deduplicated within 1e-6 radians and classified by the
/// intrinsic Hessian.
pub fn find_critical_points(spec: &CurvatureSpec) -> GcResult<CriticalPointReport> {
    spec.validate()?;
    find_critical_points_from_depth(spec, 31)
}

pub(crate) fn find_critical_points_from_depth(
    spec: &CurvatureSpec,
    depth: usize,
) -> GcResult<CriticalPointReport> {
    let seeds = icosahedral_points(depth);
    let scale = seeds
        .iter()
        .fold(0.0f64, |acc, p| acc.max(spec.eval(p).abs()))
        .max(1.0);

    let refined: Vec<Option<[f64; 3]>> = seeds
        .par_iter()
        .map(|s| refine_newton(spec, s, scale))
        .collect();

    let failures = refined.iter().filter(|r| r.is_none()).count();
    let mut converged: Vec<[f64; 3]> = refined.into_iter().flatten().collect();

    // Deterministic dedup: sort, then sweep-merge within the angular tolerance.
    converged.sort_by(|a, b| {
        a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut reps: Vec<[f64; 3]> = Vec::new();
    for p in &converged {
        let mut is_new = true;
        for r in &reps {
            if dot(p, r).clamp(-1.0, 1.0).acos() < DEDUP_ANGLE {
                is_new = false;
                break;
            }
        }
        if is_new {
            reps.push(*p);
        }
    }

    let mut points: Vec<CriticalPoint> = reps
        .iter()
        .map(|p| classify_point(spec, p))
        .collect();
    points.sort_by(|a, b| {
        b.f_value
            .partial_cmp(&a.f_value)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.location.partial_cmp(&b.location).unwrap_or(std::cmp::Ordering::Equal))
    });

    let degenerate_circle = detect_circle(spec, &points);
    // Coverage heuristic: the search is complete when every seed refined
    // somewhere; isolated basin failures mark the report incomplete.
    let complete = failures == 0;

    Ok(CriticalPointReport {
        points,
        complete,
        degenerate_circle,
    })
}

fn refine_newton(spec: &CurvatureSpec, seed: &[f64; 3], scale: f64) -> Option<[f64; 3]> {
    let gtol = 1e-13 * scale;
    let mut x = *seed;
    for _ in 0..80 {
        let (e1, e2) = tangent_basis(&x);
        let g_full = spec.grad_sphere(&x);
        let g = [dot(&g_full, &e1), dot(&g_full, &e2)];
        let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
        if gn <= gtol {
            return Some(x);
        }
        // Newton step in the Hessian eigenbasis, with the eigenvalue
        // magnitudes floored so that near-degenerate directions (critical
        // circles) do not stall the transverse contraction.
        let (h, _) = spec.hess_sphere(&x, &e1, &e2);
        let tr = h[0][0] + h[1][1];
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        let lam = [tr / 2.0 - disc, tr / 2.0 + disc];
        let floor = 1e-8 * scale;
        // Eigenvector of lam[0] from the better-conditioned row formula; the
        // second eigenvector is its perpendicular, so the pair always spans.
        let cand1 = [h[0][1], lam[0] - h[0][0]];
        let cand2 = [lam[0] - h[1][1], h[0][1]];
        let n1 = (cand1[0] * cand1[0] + cand1[1] * cand1[1]).sqrt();
        let n2 = (cand2[0] * cand2[0] + cand2[1] * cand2[1]).sqrt();
        let v0 = if n1.max(n2) < 1e-300 {
            [1.0, 0.0]
        } else if n1 >= n2 {
            [cand1[0] / n1, cand1[1] / n1]
        } else {
            [cand2[0] / n2, cand2[1] / n2]
        };
        let basis = [v0, [-v0[1], v0[0]]];
        let mut step = [0.0f64; 2];
        for (k, v) in basis.iter().enumerate() {
            let gk = g[0] * v[0] + g[1] * v[1];
            let lk = if lam[k].abs() < floor {
                if lam[k] < 0.0 {
                    -floor
                } else {
                    floor
                }
            } else {
                lam[k]
            };
            let s = -gk / lk;
            step[0] += s * v[0];
            step[1] += s * v[1];
        }
        let sn = (step[0] * step[0] + step[1] * step[1]).sqrt();
        let max_step = 0.3;
        if sn > max_step {
            step[0] *= max_step / sn;
            step[1] *= max_step / sn;
        }
        let y = [
            x[0] + step[0] * e1[0] + step[1] * e2[0],
            x[1] + step[0] * e1[1] + step[1] * e2[1],
            x[2] + step[0] * e1[2] + step[1] * e2[2],
        ];
        x = unit(&y);
    }
    // accept slow convergence if the gradient still meets the report bound
    let g = spec.grad_sphere(&x);
    if len3(&g) <= GRAD_TOL * scale {
        Some(x)
    } else {
        None
    }
}

fn classify_point(spec: &CurvatureSpec, p: &[f64; 3]) -> CriticalPoint {
    let (e1, e2) = tangent_basis(p);
    let (h, lap) = spec.hess_sphere(p, &e1, &e2);
    // eigenvalues of the symmetric 2x2
    let tr = h[0][0] + h[1][1];
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let l1 = tr / 2.0 - disc;
    let l2 = tr / 2.0 + disc;
    let f_value = spec.eval(p);
    let tol = 1e-8 * f_value.abs().max(1.0);
    let class = if l1.abs().min(l2.abs()) < tol {
        CritClass::Degenerate
    } else if l2 < 0.0 {
        CritClass::Max
    } else if l1 > 0.0 {
        CritClass::Min
    } else {
        CritClass::Saddle
    };
    CriticalPoint {
        location: *p,
        f_value,
        hessian_eigenvalues: [l1, l2],
        laplacian: lap,
        class,
    }
}

/// A degenerate critical circle shows up as > 50 deduplicated points on a
/// common plane section of the sphere.
fn detect_circle(spec: &CurvatureSpec, points: &[CriticalPoint]) -> Option<DegenerateCircle> {
    let members: Vec<&CriticalPoint> = points
        .iter()
        .filter(|p| p.class == CritClass::Degenerate)
        .collect();
    if members.len() <= 50 {
        return None;
    }
    // plane fit: smallest-eigenvector of the covariance of member locations
    let mut mean = [0.0f64; 3];
    for p in &members {
        for k in 0..3 {
            mean[k] += p.location[k];
        }
    }
    for m in mean.iter_mut() {
        *m /= members.len() as f64;
    }
    let mut cov = [[0.0f64; 3]; 3];
    for p in &members {
        let d = [
            p.location[0] - mean[0],
            p.location[1] - mean[1],
            p.location[2] - mean[2],
        ];
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += d[i] * d[j];
            }
        }
    }
    // power iteration on (trace * I - cov) to get the smallest eigenvector
    let tr = cov[0][0] + cov[1][1] + cov[2][2];
    let mut n = [0.3, -0.5, 0.81];
    for _ in 0..200 {
        let mut next = [0.0f64; 3];
        for i in 0..3 {
            next[i] = tr * n[i];
            for j in 0..3 {
                next[i] -= cov[i][j] * n[j];
            }
        }
        let nn = len3(&next);
        if nn < 1e-30 {
            break;
        }
        n = [next[0] / nn, next[1] / nn, next[2] / nn];
    }
    let offset = dot(&mean, &n);
    let max_residual = members
        .iter()
        .fold(0.0f64, |acc, p| acc.max((dot(&p.location, &n) - offset).abs()));
    if max_residual > 1e-6 {
        return None;
    }
    let f_value = spec.eval(&members[0].location);
    Some(DegenerateCircle {
        axis: n,
        offset,
        f_value,
        member_count: members.len(),
    })
}

/// Tri-state verdict of the hypothesis check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
    Undecidable,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisCheck {
    pub nonnegative: bool,
    pub positive_somewhere: bool,
    pub nondegenerate_on_positive_part: bool,
    pub two_positive_maxima: bool,
    pub saddle_laplacian_positive: bool,
    pub overall: Verdict,
    /// Indices into the report's point list cited as evidence.
    pub evidence: Vec<usize>,
}

/// Check the convergence hypotheses: f nonnegative and positive somewhere,
/// only non-degenerate critical points on the positive part, at least two
/// positive local maxima, and a positive spherical Laplacian at every
/// positive-valued saddle.
pub fn verify_hypotheses(spec: &CurvatureSpec, report: &CriticalPointReport) -> GcResult<HypothesisCheck> {
    spec.validate()?;
    let scan = icosahedral_points(100);
    let mut min_f = f64::INFINITY;
    let mut max_f = f64::NEG_INFINITY;
    for p in &scan {
        let v = spec.eval(p);
        min_f = min_f.min(v);
        max_f = max_f.max(v);
    }
    let nonnegative = min_f >= -1e-10;
    let positive_somewhere = max_f > 0.0;
    let zero_threshold = 1e-10 * max_f.max(0.0);

    // Borderline critical values make the positive-part predicates
    // undecidable rather than silently passing or failing.
    let borderline = report
        .points
        .iter()
        .any(|p| (p.f_value - zero_threshold).abs() < 1e-6 * max_f.abs().max(1.0));

    let on_positive = |p: &&CriticalPoint| p.f_value > zero_threshold;

    let degenerate_positive: Vec<usize> = report
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| on_positive(&p) && p.class == CritClass::Degenerate)
        .map(|(i, _)| i)
        .collect();
    let circle_on_positive = report
        .degenerate_circle
        .as_ref()
        .map(|c| c.f_value > zero_threshold)
        .unwrap_or(false);
    let nondegenerate_on_positive_part = degenerate_positive.is_empty() && !circle_on_positive;

    let maxima: Vec<usize> = report
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| on_positive(&p) && p.class == CritClass::Max)
        .map(|(i, _)| i)
        .collect();
    let two_positive_maxima = maxima.len() >= 2;

    let lap_floor = 1e-10 * max_f.abs().max(1.0);
    let bad_saddles: Vec<usize> = report
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| on_positive(&p) && p.class == CritClass::Saddle && p.laplacian <= lap_floor)
        .map(|(i, _)| i)
        .collect();
    let saddle_laplacian_positive = bad_saddles.is_empty();

    let all = nonnegative
        && positive_somewhere
        && nondegenerate_on_positive_part
        && two_positive_maxima
        && saddle_laplacian_positive;
    let overall = if !report.complete || borderline {
        Verdict::Undecidable
    } else if all {
        Verdict::Pass
    } else {
        Verdict::Fail
    };

    let mut evidence = maxima;
    evidence.extend(bad_saddles);
    evidence.extend(degenerate_positive);
    evidence.sort_unstable();
    evidence.dedup();

    Ok(HypothesisCheck {
        nonnegative,
        positive_somewhere,
        nondegenerate_on_positive_part,
        two_positive_maxima,
        saddle_laplacian_positive,
        overall,
        evidence,
    })
}

/// Condition on the initial data: int f e^{2 u0} dv_c, positive for
/// admissible starts.
pub fn initial_positivity(u0: &ConformalFactor, spec: &CurvatureSpec) -> GcResult<f64> {
    spec.validate()?;
    let f = spec.evaluate_on(u0.grid());
    let density = u0.area_density()?;
    Ok(integrate_unchecked(&f.zip_map(&density, |a, b| a * b)))
}

/// Named presets for the prescribed function.
pub fn preset(name: &str) -> GcResult<CurvatureSpec> {
    match name {
        "round" => Ok(CurvatureSpec::constant("round", 1.0)),
        "tilted" => Ok(CurvatureSpec {
            name: "tilted".into(),
            poly: vec![
                PolyTerm {
                    exponents: [0, 0, 0],
                    coefficient: 2.0,
                },
                PolyTerm {
                    exponents: [0, 0, 1],
                    coefficient: 1.0,
                },
            ],
            bumps: vec![],
        }),
        "quad-saddle" => Ok(CurvatureSpec {
            name: "quad-saddle".into(),
            poly: vec![
                PolyTerm {
                    exponents: [0, 0, 0],
                    coefficient: 2.0,
                },
                PolyTerm {
                    exponents: [2, 0, 0],
                    coefficient: 1.0,
                },
                PolyTerm {
                    exponents: [0, 2, 0],
                    coefficient: -1.0,
                },
            ],
            bumps: vec![],
        }),
        "two-bump" => Ok(two_bump_spec("two-bump", 0.1)),
        "two-bump-zero" => Ok(two_bump_spec("two-bump-zero", 0.0)),
        other => Err(GcError::InvalidArgument(format!(
            "unknown preset '{other}'; available: {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}

pub const PRESET_NAMES: [&str; 5] = ["round", "tilted", "quad-saddle", "two-bump", "two-bump-zero"];

fn two_bump_spec(name: &str, base: f64) -> CurvatureSpec {
    let mut poly = vec![];
    if base != 0.0 {
        poly.push(PolyTerm {
            exponents: [0, 0, 0],
            coefficient: base,
        });
    }
    CurvatureSpec {
        name: name.into(),
        poly,
        bumps: vec![
            BumpTerm {
                center: [1.0, 0.0, 0.0],
                sigma: 0.6,
                height: 1.0,
            },
            BumpTerm {
                center: [-1.0, 0.0, 0.0],
                sigma: 0.6,
                height: 1.0,
            },
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_spec_everywhere_critical_and_degenerate() {
        let spec = CurvatureSpec::constant("round", 1.0);
        let report = find_critical_points(&spec).unwrap();
        assert!(report.points.len() > 1000);
        assert!(report.points.iter().all(|p| p.class == CritClass::Degenerate));
        assert!(report.complete);
    }

    #[test]
    fn tilted_spec_has_two_poles() {
        let spec = preset("tilted").unwrap();
        let report = find_critical_points(&spec).unwrap();
        assert_eq!(report.points.len(), 2, "{:#?}", report.points);
        let top = &report.points[0];
        assert_eq!(top.class, CritClass::Max);
        assert!((top.f_value - 3.0).abs() < 1e-10);
        assert!((top.location[2] - 1.0).abs() < 1e-8);
        assert!((top.laplacian + 2.0).abs() < 1e-8);
        let bottom = &report.points[1];
        assert_eq!(bottom.class, CritClass::Min);
        assert!((bottom.f_value - 1.0).abs() < 1e-10);
        assert!((bottom.location[2] + 1.0).abs() < 1e-8);
        assert!((bottom.laplacian - 2.0).abs() < 1e-8);
    }

    #[test]
    fn quad_saddle_spec_classifies_six_points() {
        let spec = preset("quad-saddle").unwrap();
        let report = find_critical_points(&spec).unwrap();
        assert_eq!(report.points.len(), 6, "{:#?}", report.points);
        let count = |c: CritClass| report.points.iter().filter(|p| p.class == c).count();
        assert_eq!(count(CritClass::Max), 2);
        assert_eq!(count(CritClass::Min), 2);
        assert_eq!(count(CritClass::Saddle), 2);
        for p in &report.points {
            if p.class == CritClass::Saddle {
                assert!(p.location[2].abs() > 1.0 - 1e-8);
                assert!(p.laplacian.abs() < 1e-8, "saddle laplacian {}", p.laplacian);
                assert!((p.f_value - 2.0).abs() < 1e-10);
            }
        }
        // gradient contract, re-evaluated analytically
        for p in &report.points {
            assert!(len3(&spec.grad_sphere(&p.location)) <= 1e-10);
        }
    }

    #[test]
    fn hypotheses_for_named_specs() {
        let tilted = preset("tilted").unwrap();
        let r = find_critical_points(&tilted).unwrap();
        let h = verify_hypotheses(&tilted, &r).unwrap();
        assert!(h.nonnegative && h.positive_somewhere && h.nondegenerate_on_positive_part);
        assert!(!h.two_positive_maxima);
        assert_eq!(h.overall, Verdict::Fail);

        let quad = preset("quad-saddle").unwrap();
        let r = find_critical_points(&quad).unwrap();
        let h = verify_hypotheses(&quad, &r).unwrap();
        assert!(h.two_positive_maxima);
        assert!(!h.saddle_laplacian_positive);
        assert_eq!(h.overall, Verdict::Fail);
    }

    #[test]
    fn two_bump_reports_degenerate_circle() {
        let spec = preset("two-bump").unwrap();
        let report = find_critical_points(&spec).unwrap();
        let circle = report.degenerate_circle.as_ref().expect("circle expected");
        assert!(circle.axis[0].abs() > 1.0 - 1e-6);
        assert!(circle.offset.abs() < 1e-6);
        let maxima: Vec<_> = report
            .points
            .iter()
            .filter(|p| p.class == CritClass::Max)
            .collect();
        assert_eq!(maxima.len(), 2);
        for m in maxima {
            assert!(m.location[0].abs() > 1.0 - 1e-6);
        }
        let h = verify_hypotheses(&spec, &report).unwrap();
        assert!(h.two_positive_maxima);
        assert!(!h.nondegenerate_on_positive_part);
    }

    #[test]
    fn bump_evaluation_at_center() {
        let spec = preset("two-bump").unwrap();
        let v = spec.eval(&[1.0, 0.0, 0.0]);
        // base + the near bump + the antipodal tail
        let tail = (-PI * PI / 0.36f64).exp();
        assert!((v - (0.1 + 1.0 + tail)).abs() < 1e-12);
    }

    #[test]
    fn initial_positivity_closed_forms() {
        let grid = SphereGrid::new(16, 2.0).unwrap();
        let zero = ConformalFactor::zero(grid.clone());
        let round = preset("round").unwrap();
        assert!((initial_positivity(&zero, &round).unwrap() - 4.0 * PI).abs() < 1e-10);
        let tilted = preset("tilted").unwrap();
        assert!((initial_positivity(&zero, &tilted).unwrap() - 8.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn classification_stable_under_seed_refinement() {
        for name in ["tilted", "quad-saddle"] {
            let spec = preset(name).unwrap();
            let coarse = find_critical_points_from_depth(&spec, 31).unwrap();
            let fine = find_critical_points_from_depth(&spec, 62).unwrap();
            assert_eq!(coarse.points.len(), fine.points.len());
            for (a, b) in coarse.points.iter().zip(fine.points.iter()) {
                assert_eq!(a.class, b.class);
                let angle = dot(&a.location, &b.location).clamp(-1.0, 1.0).acos();
                assert!(angle <= 1e-6, "{name}: moved {angle}");
            }
        }
    }
}
