//! Real spherical-harmonic analysis and synthesis by dense summation.
//!
//! Coefficients are stored against the orthonormal-in-dv_c real harmonics
//! (see [`crate::sphere::legendre`]), indexed l^2 + l + m for -l <= m <= l.
//! Analysis is Gauss-Legendre quadrature of f Y_{l,m}, done in two separated
//! stages (longitude first, then latitude), and is exact for band-limited
//! input; synthesis is the plain pointwise sum. No fast transforms: at desk
//! scale the dense path is fast enough and easier to trust.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{GcError, GcResult};
use crate::sphere::grid::{GridField, SphereGrid};
use crate::sphere::legendre::{normalized_assoc_legendre_row, tri_index, tri_len};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Spherical-harmonic coefficients up to a bandlimit.
#[derive(Clone, Debug)]
pub struct SpectralField {
    pub bandlimit: usize,
    /// (bandlimit + 1)^2 coefficients, index l^2 + l + m.
    pub coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(bandlimit: usize) -> Self {
        Self {
            bandlimit,
            coeffs: vec![0.0; (bandlimit + 1) * (bandlimit + 1)],
        }
    }

    #[inline]
    pub fn index(l: usize, m: i64) -> usize {
        (l * l) as usize + (l as i64 + m) as usize
    }

    #[inline]
    pub fn get(&self, l: usize, m: i64) -> f64 {
        self.coeffs[Self::index(l, m)]
    }

    #[inline]
    pub fn set(&mut self, l: usize, m: i64, v: f64) {
        self.coeffs[Self::index(l, m)] = v;
    }

    pub fn check_finite(&self) -> GcResult<()> {
        if self.coeffs.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(GcError::InvalidData(
                "spectral field contains non-finite coefficients".into(),
            ))
        }
    }

    /// Copy truncated (or zero-padded) to another bandlimit.
    pub fn resized(&self, bandlimit: usize) -> Self {
        let mut out = Self::zeros(bandlimit);
        let lmax = self.bandlimit.min(bandlimit);
        for l in 0..=lmax {
            for m in -(l as i64)..=(l as i64) {
                out.set(l, m, self.get(l, m));
            }
        }
        out
    }

    /// Largest degree carrying coefficients above a relative threshold;
    /// lets synthesis and point evaluation skip an all-zero tail.
    pub fn effective_bandlimit(&self) -> usize {
        let peak = self.coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        if peak == 0.0 {
            return 0;
        }
        let floor = 1e-14 * peak;
        for l in (0..=self.bandlimit).rev() {
            let mut row_max = 0.0f64;
            for m in -(l as i64)..=(l as i64) {
                row_max = row_max.max(self.get(l, m).abs());
            }
            if row_max > floor {
                return l;
            }
        }
        0
    }

    /// Fraction of squared coefficient mass carried by the top 20% of
    /// degrees, a cheap aliasing monitor for non-band-limited data.
    pub fn tail_fraction(&self, band: usize) -> f64 {
        let band = band.min(self.bandlimit);
        let cut = (4 * band) / 5;
        let mut total = 0.0;
        let mut tail = 0.0;
        for l in 0..=band {
            for m in -(l as i64)..=(l as i64) {
                let c2 = self.get(l, m) * self.get(l, m);
                total += c2;
                if l > cut {
                    tail += c2;
                }
            }
        }
        if total > 0.0 {
            tail / total
        } else {
            0.0
        }
    }
}

/// Harmonic analysis at the grid's declared bandlimit.
pub fn analyze(f: &GridField) -> GcResult<SpectralField> {
    analyze_to(f, f.grid.bandlimit)
}

/// Harmonic analysis up to `lmax <= grid.max_exact_bandlimit`.
pub fn analyze_to(f: &GridField, lmax: usize) -> GcResult<SpectralField> {
    f.check_finite()?;
    let g = &f.grid;
    if lmax > g.max_exact_bandlimit {
        return Err(GcError::InvalidArgument(format!(
            "analysis bandlimit {lmax} exceeds grid capacity {}",
            g.max_exact_bandlimit
        )));
    }
    let n_lat = g.n_lat;
    let n_lon = g.n_lon;
    let n_m = lmax + 1;

    // Stage 1: weighted Fourier sums per latitude ring.
    // fc[i][m] = w_i * dphi * sum_j f_ij cos(m phi_j), fs likewise with sin.
    let mut fc = vec![0.0; n_lat * n_m];
    let mut fs = vec![0.0; n_lat * n_m];
    fc.par_chunks_mut(n_m)
        .zip(fs.par_chunks_mut(n_m))
        .enumerate()
        .for_each(|(i, (fci, fsi))| {
            let row = f.values.row(i);
            let row = row.as_slice().expect("standard layout");
            let scale = g.weights[i] * g.d_phi;
            for m in 0..n_m {
                let cm = g.cos_m_phi(m);
                let sm = g.sin_m_phi(m);
                let mut ac = 0.0;
                let mut as_ = 0.0;
                for j in 0..n_lon {
                    ac += row[j] * cm[j];
                    as_ += row[j] * sm[j];
                }
                fci[m] = scale * ac;
                fsi[m] = scale * as_;
            }
        });

    // Stage 2: latitude sums against the Legendre table, one task per order m.
    let per_m: Vec<Vec<f64>> = (0..=lmax)
        .into_par_iter()
        .map(|m| {
            let mut acc = vec![0.0; 2 * (lmax + 1 - m)];
            for i in 0..n_lat {
                let qrow = g.legendre_row(i);
                let c = fc[i * n_m + m];
                let s = fs[i * n_m + m];
                for l in m..=lmax {
                    let q = qrow[tri_index(l, m)];
                    acc[2 * (l - m)] += q * c;
                    acc[2 * (l - m) + 1] += q * s;
                }
            }
            acc
        })
        .collect();

    let mut out = SpectralField::zeros(lmax);
    for (m, acc) in per_m.into_iter().enumerate() {
        for l in m..=lmax {
            if m == 0 {
                out.set(l, 0, acc[2 * (l - m)]);
            } else {
                out.set(l, m as i64, SQRT2 * acc[2 * (l - m)]);
                out.set(l, -(m as i64), SQRT2 * acc[2 * (l - m) + 1]);
            }
        }
    }
    Ok(out)
}

/// Pointwise synthesis of a spectral field on a grid.
pub fn synthesize(a: &SpectralField, grid: &Arc<SphereGrid>) -> GcResult<GridField> {
    a.check_finite()?;
    if a.bandlimit > grid.max_exact_bandlimit {
        return Err(GcError::InvalidArgument(format!(
            "grid bandlimit {} too small for spectral field of bandlimit {}",
            grid.max_exact_bandlimit, a.bandlimit
        )));
    }
    let lmax = a.bandlimit;
    let n_lon = grid.n_lon;
    let mut values = ndarray::Array2::zeros((grid.n_lat, n_lon));
    let g = grid.clone();
    values
        .as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(n_lon)
        .enumerate()
        .for_each(|(i, row)| {
            let qrow = g.legendre_row(i);
            // Per-ring Legendre sums g_m, h_m, then the Fourier sum.
            for m in 0..=lmax {
                let mut gm = 0.0;
                let mut hm = 0.0;
                for l in m..=lmax {
                    let q = qrow[tri_index(l, m)];
                    if m == 0 {
                        gm += q * a.get(l, 0);
                    } else {
                        gm += q * a.get(l, m as i64);
                        hm += q * a.get(l, -(m as i64));
                    }
                }
                if m == 0 {
                    for v in row.iter_mut() {
                        *v += gm;
                    }
                } else {
                    let cm = g.cos_m_phi(m);
                    let sm = g.sin_m_phi(m);
                    for j in 0..n_lon {
                        row[j] += SQRT2 * (gm * cm[j] + hm * sm[j]);
                    }
                }
            }
        });
    Ok(GridField {
        grid: grid.clone(),
        values,
    })
}

/// Evaluate a spectral field at one point given by colatitude/longitude.
///
/// `scratch` is a reusable buffer of length >= tri_len(a.bandlimit).
pub fn eval_point(a: &SpectralField, cos_theta: f64, phi: f64, scratch: &mut Vec<f64>) -> f64 {
    let lmax = a.bandlimit;
    scratch.resize(tri_len(lmax), 0.0);
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    normalized_assoc_legendre_row(lmax, cos_theta, sin_theta, scratch);
    let mut total = 0.0;
    // m = 0
    for l in 0..=lmax {
        total += scratch[tri_index(l, 0)] * a.get(l, 0);
    }
    // m > 0 terms with recurrent cos/sin
    let (mut cos_prev, mut sin_prev) = (1.0, 0.0);
    let (cos1, sin1) = (phi.cos(), phi.sin());
    for m in 1..=lmax {
        let cos_m = cos_prev * cos1 - sin_prev * sin1;
        let sin_m = sin_prev * cos1 + cos_prev * sin1;
        cos_prev = cos_m;
        sin_prev = sin_m;
        let mut gm = 0.0;
        let mut hm = 0.0;
        for l in m..=lmax {
            let q = scratch[tri_index(l, m)];
            gm += q * a.get(l, m as i64);
            hm += q * a.get(l, -(m as i64));
        }
        total += SQRT2 * (gm * cos_m + hm * sin_m);
    }
    total
}

/// Evaluate a spectral field at an arbitrary unit vector.
pub fn eval_at(a: &SpectralField, p: &[f64; 3], scratch: &mut Vec<f64>) -> f64 {
    let cos_theta = p[2].clamp(-1.0, 1.0);
    let phi = p[1].atan2(p[0]);
    eval_point(a, cos_theta, phi, scratch)
}

/// Spectral Laplacian: coefficientwise multiplication by -l(l+1).
pub fn laplacian(a: &SpectralField) -> SpectralField {
    let mut out = a.clone();
    for l in 0..=a.bandlimit {
        let factor = -((l * (l + 1)) as f64);
        for m in -(l as i64)..=(l as i64) {
            let idx = SpectralField::index(l, m);
            out.coeffs[idx] = factor * a.coeffs[idx];
        }
    }
    out
}

/// Dirichlet energy integral |grad u|^2 dv_c via Parseval:
/// sum l(l+1) a_{l,m}^2.
pub fn grad_energy(a: &SpectralField) -> f64 {
    let mut total = 0.0;
    for l in 1..=a.bandlimit {
        let factor = (l * (l + 1)) as f64;
        for m in -(l as i64)..=(l as i64) {
            let c = a.get(l, m);
            total += factor * c * c;
        }
    }
    total
}
