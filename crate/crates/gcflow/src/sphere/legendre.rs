//! Fully normalized associated Legendre functions.
//!
//! `Q_{l,m}` here is N_{l,m} P_l^m with the Condon-Shortley-free P_l^m and
//! the normalization chosen so that the real harmonics
//!
//!   Y_{l,0}  = Q_{l,0},
//!   Y_{l,m}  = sqrt(2) Q_{l,m} cos(m phi),   m > 0,
//!   Y_{l,-m} = sqrt(2) Q_{l,m} sin(m phi),   m > 0,
//!
//! are orthonormal with respect to the round area element dv_c. The values
//! are produced by the standard stable three-term recurrence with the
//! normalization folded in, which keeps every intermediate bounded and is
//! safe far beyond L = 64.

use std::f64::consts::PI;

/// Packed index of (l, m) with 0 <= m <= l.
#[inline]
pub fn tri_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Number of packed (l, m) entries for degrees 0..=lmax.
#[inline]
pub fn tri_len(lmax: usize) -> usize {
    (lmax + 1) * (lmax + 2) / 2
}

/// Fill `out` (length `tri_len(lmax)`) with Q_{l,m}(x) for one node.
pub fn normalized_assoc_legendre_row(lmax: usize, x: f64, sin_theta: f64, out: &mut [f64]) {
    debug_assert_eq!(out.len(), tri_len(lmax));
    // Q_{0,0} = Y_{0,0} = 1 / sqrt(4 pi)
    out[tri_index(0, 0)] = 0.5 / PI.sqrt();
    for m in 1..=lmax {
        let prev = out[tri_index(m - 1, m - 1)];
        let ratio = ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
        out[tri_index(m, m)] = ratio * sin_theta * prev;
    }
    for m in 0..lmax {
        out[tri_index(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * x * out[tri_index(m, m)];
    }
    for m in 0..=lmax {
        for l in (m + 2)..=lmax {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                .sqrt();
            out[tri_index(l, m)] =
                a * (x * out[tri_index(l - 1, m)] - b * out[tri_index(l - 2, m)]);
        }
    }
}

/// Unnormalized Legendre polynomial P_l(x), used by the cap quadrature.
pub fn legendre_p(l: usize, x: f64) -> f64 {
    match l {
        0 => 1.0,
        1 => x,
        _ => {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=l {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    }
}

/// Antiderivative helper: integral of P_l over [a, b].
pub fn legendre_p_integral(l: usize, a: f64, b: f64) -> f64 {
    if l == 0 {
        return b - a;
    }
    // int P_l = (P_{l+1} - P_{l-1}) / (2l + 1)
    let prim = |x: f64| (legendre_p(l + 1, x) - legendre_p(l - 1, x)) / (2 * l + 1) as f64;
    prim(b) - prim(a)
}
