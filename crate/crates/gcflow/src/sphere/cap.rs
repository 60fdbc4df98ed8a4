//! Geodesic-cap integrals with a smoothed indicator.
//!
//! A hard cap indicator under a fixed quadrature rule makes the ball-mass
//! radius search non-monotone, so the indicator is a half-cosine ramp over a
//! boundary layer of angular width 2*pi/n_lat. The ramp is applied
//! symmetrically in t = cos(angle), which cancels its bias against constant
//! integrands identically.
//!
//! The integral itself is evaluated spectrally: for a zonal profile chi(x.q),
//!
//!   int f(x) chi(x . q) dv_c = sum_l c_l sum_m a_{l,m} Y_{l,m}(q),
//!
//! where a are the harmonic coefficients of f and c_l = 2 pi int chi P_l dt.
//! The profile coefficients c_l are exact (closed-form plateau part plus a
//! short Gauss rule across the ramp), so the cap area of the constant field
//! is reproduced to machine precision and the radius search stays smooth.
//! Caps whose boundary layer overlaps a pole keep a one-sided (clipped)
//! ramp and carry the corresponding O(layer width) bias.

use std::f64::consts::PI;

use crate::error::{GcError, GcResult};
use crate::sphere::grid::{gauss_legendre, GridField};
use crate::sphere::legendre::{normalized_assoc_legendre_row, tri_index, tri_len};
use crate::sphere::spectral::{analyze_to, SpectralField};

/// All Legendre polynomials P_0..P_{out.len()-1} at one point.
fn legendre_all(x: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for l in 2..out.len() {
        let lf = l as f64;
        out[l] = ((2.0 * lf - 1.0) * x * out[l - 1] - (lf - 1.0) * out[l - 2]) / lf;
    }
}

/// Per-center zonal sums b_l(q) = sum_m a_{l,m} Y_{l,m}(q); the cap mass at
/// any radius is then an O(L) dot product against the profile coefficients.
pub struct CapEvaluator {
    lmax: usize,
    /// Angular width of the smoothing layer.
    ramp_width: f64,
    spectral: SpectralField,
    gauss_nodes: Vec<f64>,
    gauss_weights: Vec<f64>,
}

impl CapEvaluator {
    pub fn new(f: &GridField) -> GcResult<Self> {
        let lmax = f.grid.max_exact_bandlimit;
        let spectral = analyze_to(f, lmax)?;
        let (gauss_nodes, gauss_weights) = gauss_legendre(32);
        Ok(Self {
            lmax,
            ramp_width: 2.0 * PI / f.grid.n_lat as f64,
            spectral,
            gauss_nodes,
            gauss_weights,
        })
    }

    /// Zonal sums around a center; reusable across radii.
    pub fn center_sums(&self, center: &[f64; 3]) -> Vec<f64> {
        let lmax = self.lmax;
        let cos_theta = center[2].clamp(-1.0, 1.0);
        let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
        let phi = center[1].atan2(center[0]);
        let mut q_row = vec![0.0; tri_len(lmax)];
        normalized_assoc_legendre_row(lmax, cos_theta, sin_theta, &mut q_row);
        let mut b = vec![0.0; lmax + 1];
        let sqrt2 = std::f64::consts::SQRT_2;
        let (cos1, sin1) = (phi.cos(), phi.sin());
        let (mut cos_prev, mut sin_prev) = (1.0, 0.0);
        for l in 0..=lmax {
            b[l] = q_row[tri_index(l, 0)] * self.spectral.get(l, 0);
        }
        for m in 1..=lmax {
            let cos_m = cos_prev * cos1 - sin_prev * sin1;
            let sin_m = sin_prev * cos1 + cos_prev * sin1;
            cos_prev = cos_m;
            sin_prev = sin_m;
            for l in m..=lmax {
                let q = q_row[tri_index(l, m)];
                b[l] += sqrt2
                    * q
                    * (self.spectral.get(l, m as i64) * cos_m
                        + self.spectral.get(l, -(m as i64)) * sin_m);
            }
        }
        b
    }

    /// Smoothed-cap mass at radius `r` around a center whose zonal sums are
    /// `b` (from [`Self::center_sums`]).
    pub fn mass_at(&self, b: &[f64], r: f64) -> f64 {
        let profile = self.profile_coefficients(r);
        profile.iter().zip(b.iter()).map(|(c, v)| c * v).sum()
    }

    /// c_l = 2 pi int_{-1}^{1} chi_r(t) P_l(t) dt for the smoothed indicator.
    ///
    /// The plateau part is the closed form int_a^1 P_l = -(P_{l+1}(a) -
    /// P_{l-1}(a)) / (2l+1); the ramp is a short Gauss rule, with all degrees
    /// of P_l produced by one upward recurrence per node.
    fn profile_coefficients(&self, r: f64) -> Vec<f64> {
        let lmax = self.lmax;
        let mut c = vec![0.0; lmax + 1];
        let t0 = r.cos();
        // Half-width of the ramp in t; clamped so the layer stays inside
        // [-1, 1] near the poles.
        let delta = (0.5 * self.ramp_width * r.sin()).max(1e-12);
        let t_hi = (t0 + delta).min(1.0);
        let t_lo = (t0 - delta).max(-1.0);

        // Plateau [t_hi, 1]: needs P_l(t_hi) up to lmax + 1.
        let mut p_hi = vec![0.0; lmax + 2];
        legendre_all(t_hi, &mut p_hi);
        c[0] = 1.0 - t_hi;
        for l in 1..=lmax {
            c[l] = -(p_hi[l + 1] - p_hi[l - 1]) / (2 * l + 1) as f64;
        }

        // Ramp [t_lo, t_hi].
        if t_hi > t_lo {
            let half = 0.5 * (t_hi - t_lo);
            let mid = 0.5 * (t_hi + t_lo);
            let mut p = vec![0.0; lmax + 1];
            for (x, w) in self.gauss_nodes.iter().zip(self.gauss_weights.iter()) {
                let t = mid + half * x;
                let chi = (0.5 * (1.0 + (PI * (t - t0) / (2.0 * delta)).sin())).clamp(0.0, 1.0);
                let scale = half * w * chi;
                legendre_all(t, &mut p);
                for l in 0..=lmax {
                    c[l] += scale * p[l];
                }
            }
        }
        for cl in c.iter_mut() {
            *cl *= 2.0 * PI;
        }
        c
    }
}

/// Quadrature of `f` over the geodesic cap of radius `r` (radians) around
/// `center`, with the smoothed boundary indicator.
pub fn geodesic_cap_integral(f: &GridField, center: &[f64; 3], r: f64) -> GcResult<f64> {
    if !(r > 0.0 && r <= PI) || !r.is_finite() {
        return Err(GcError::InvalidArgument(format!(
            "cap radius must lie in (0, pi], got {r}"
        )));
    }
    let norm = (center[0] * center[0] + center[1] * center[1] + center[2] * center[2]).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(GcError::InvalidArgument("cap center must be a nonzero vector".into()));
    }
    let c = [center[0] / norm, center[1] / norm, center[2] / norm];
    let eval = CapEvaluator::new(f)?;
    let b = eval.center_sums(&c);
    Ok(eval.mass_at(&b, r))
}
