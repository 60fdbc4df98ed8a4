//! Independent oracles for the test suites.
//!
//! Everything here deliberately avoids the library's transform internals:
//! harmonics are evaluated through the unnormalized Legendre recurrence with
//! explicit normalization factors, integrals use closed forms or refined
//! quadrature on sampled closures, and the hypothesis oracle classifies by
//! finite differences of plain function evaluations.

#![allow(dead_code)]

use std::f64::consts::PI;

use gcflow::curvature::CurvatureSpec;
use gcflow::sphere::grid::gauss_legendre;
use gcflow::sphere::spectral::SpectralField;

/// Real spherical harmonic via the plain (unnormalized) associated Legendre
/// recurrence and explicit factorial-ratio normalization. Valid for modest
/// degrees (l <= ~60 before the ratio underflows).
pub fn harmonic_oracle(l: usize, m: i64, theta: f64, phi: f64) -> f64 {
    let ma = m.unsigned_abs() as usize;
    let x = theta.cos();
    let s = theta.sin();
    // P_ma^ma = (2 ma - 1)!! s^ma, Condon-Shortley-free
    let mut pmm = 1.0;
    for k in 1..=ma {
        pmm *= (2 * k - 1) as f64 * s;
    }
    let p = if l == ma {
        pmm
    } else {
        let mut p_prev = pmm;
        let mut p_curr = (2 * ma + 1) as f64 * x * pmm;
        for ll in (ma + 2)..=l {
            let next = ((2 * ll - 1) as f64 * x * p_curr - (ll + ma - 1) as f64 * p_prev)
                / (ll - ma) as f64;
            p_prev = p_curr;
            p_curr = next;
        }
        p_curr
    };
    let mut ratio = 1.0; // (l - ma)! / (l + ma)!
    for k in (l - ma + 1)..=(l + ma) {
        ratio /= k as f64;
    }
    let norm = ((2 * l + 1) as f64 / (4.0 * PI) * ratio).sqrt();
    match m.cmp(&0) {
        std::cmp::Ordering::Equal => norm * p,
        std::cmp::Ordering::Greater => 2f64.sqrt() * norm * p * (m as f64 * phi).cos(),
        std::cmp::Ordering::Less => 2f64.sqrt() * norm * p * (ma as f64 * phi).sin(),
    }
}

/// Direct dense summation of a spectral field at one point.
pub fn eval_oracle(a: &SpectralField, theta: f64, phi: f64) -> f64 {
    let mut total = 0.0;
    for l in 0..=a.bandlimit {
        for m in -(l as i64)..=(l as i64) {
            let c = a.get(l, m);
            if c != 0.0 {
                total += c * harmonic_oracle(l, m, theta, phi);
            }
        }
    }
    total
}

/// Quadrature of a closure over the sphere on a refined Gauss-Legendre x
/// uniform grid, independent of the library's grid sizes.
pub fn refined_quadrature(n_lat: usize, n_lon: usize, f: impl Fn(&[f64; 3]) -> f64) -> f64 {
    let (x, w) = gauss_legendre(n_lat);
    let d_phi = 2.0 * PI / n_lon as f64;
    let mut total = 0.0;
    for i in 0..n_lat {
        let st = (1.0 - x[i] * x[i]).sqrt();
        let mut ring = 0.0;
        for j in 0..n_lon {
            let phi = d_phi * j as f64;
            ring += f(&[st * phi.cos(), st * phi.sin(), x[i]]);
        }
        total += w[i] * ring;
    }
    total * d_phi
}

/// Closed form: e^{2u} mass of the Moebius factor with strength s within
/// angular radius r of the bubble point.
pub fn bubble_cap_mass(s: f64, r: f64) -> f64 {
    2.0 * PI * (1.0 - s * s) / s * (1.0 / (1.0 - s) - 1.0 / (1.0 - s * r.cos()))
}

/// Closed form: third component of the conformal center of mass of the
/// Moebius factor with parameter (0, 0, s).
pub fn bubble_center_of_mass(s: f64) -> f64 {
    1.0 / s - (1.0 - s * s) / (2.0 * s * s) * ((1.0 + s) / (1.0 - s)).ln()
}

fn unit(v: &[f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn tangent_pair(x: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let pick = if x[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let d = pick[0] * x[0] + pick[1] * x[1] + pick[2] * x[2];
    let e1 = unit(&[pick[0] - d * x[0], pick[1] - d * x[1], pick[2] - d * x[2]]);
    let e2 = [
        x[1] * e1[2] - x[2] * e1[1],
        x[2] * e1[0] - x[0] * e1[2],
        x[0] * e1[1] - x[1] * e1[0],
    ];
    (e1, e2)
}

fn geodesic_step(x: &[f64; 3], dir: &[f64; 3], h: f64) -> [f64; 3] {
    unit(&[x[0] + h * dir[0], x[1] + h * dir[1], x[2] + h * dir[2]])
}

/// Finite-difference tangential gradient magnitude of f at x.
pub fn fd_gradient_norm(spec: &CurvatureSpec, x: &[f64; 3], h: f64) -> f64 {
    let (e1, e2) = tangent_pair(x);
    let g1 = (spec.eval(&geodesic_step(x, &e1, h)) - spec.eval(&geodesic_step(x, &e1, -h)))
        / (2.0 * h);
    let g2 = (spec.eval(&geodesic_step(x, &e2, h)) - spec.eval(&geodesic_step(x, &e2, -h)))
        / (2.0 * h);
    (g1 * g1 + g2 * g2).sqrt()
}

/// Finite-difference intrinsic Hessian eigenvalues and Laplacian at x.
pub fn fd_hessian(spec: &CurvatureSpec, x: &[f64; 3], h: f64) -> ([f64; 2], f64) {
    let (e1, e2) = tangent_pair(x);
    let f0 = spec.eval(x);
    let fpp = |a: &[f64; 3]| spec.eval(a);
    let h11 = (fpp(&geodesic_step(x, &e1, h)) - 2.0 * f0 + fpp(&geodesic_step(x, &e1, -h)))
        / (h * h);
    let h22 = (fpp(&geodesic_step(x, &e2, h)) - 2.0 * f0 + fpp(&geodesic_step(x, &e2, -h)))
        / (h * h);
    let corner = |s1: f64, s2: f64| {
        fpp(&unit(&[
            x[0] + h * (s1 * e1[0] + s2 * e2[0]),
            x[1] + h * (s1 * e1[1] + s2 * e2[1]),
            x[2] + h * (s1 * e1[2] + s2 * e2[2]),
        ]))
    };
    let h12 = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
        / (4.0 * h * h);
    let tr = h11 + h22;
    let det = h11 * h22 - h12 * h12;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    ([tr / 2.0 - disc, tr / 2.0 + disc], tr)
}

/// Brute-force hypothesis flags from plain evaluations on dense grids:
/// (nonnegative, positive_somewhere, nondegenerate_on_positive_part,
///  two_positive_maxima, saddle_laplacian_positive).
pub fn brute_force_hypothesis_flags(spec: &CurvatureSpec) -> (bool, bool, bool, bool, bool) {
    // global range on a fine lat-lon grid
    let (n_th, n_ph) = (400, 800);
    let mut min_f = f64::INFINITY;
    let mut max_f = f64::NEG_INFINITY;
    let mut values = vec![vec![0.0f64; n_ph]; n_th];
    let mut points = vec![vec![[0.0f64; 3]; n_ph]; n_th];
    for i in 0..n_th {
        let th = PI * (i as f64 + 0.5) / n_th as f64;
        for j in 0..n_ph {
            let ph = 2.0 * PI * j as f64 / n_ph as f64;
            let p = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
            let v = spec.eval(&p);
            values[i][j] = v;
            points[i][j] = p;
            min_f = min_f.min(v);
            max_f = max_f.max(v);
        }
    }
    let nonnegative = min_f >= -1e-10;
    let positive = max_f > 0.0;
    let zero_threshold = 1e-10 * max_f.max(0.0);

    // Local maxima over the 8-neighborhood: no neighbor above, at least one
    // strictly below (plateau cells, e.g. ties straddling a symmetry circle,
    // count once after clustering; an everywhere-constant f counts none).
    let mut maxima: Vec<[f64; 3]> = Vec::new();
    for i in 0..n_th {
        for j in 0..n_ph {
            let v = values[i][j];
            if v <= zero_threshold {
                continue;
            }
            let mut above = false;
            let mut below = false;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let ii = i as i64 + di;
                    if ii < 0 || ii >= n_th as i64 {
                        continue;
                    }
                    let jj = ((j as i64 + dj).rem_euclid(n_ph as i64)) as usize;
                    let w = values[ii as usize][jj];
                    if w > v {
                        above = true;
                    }
                    if w < v {
                        below = true;
                    }
                }
            }
            if !above && below {
                let p = points[i][j];
                if !maxima.iter().any(|q| {
                    (p[0] * q[0] + p[1] * q[1] + p[2] * q[2]).clamp(-1.0, 1.0).acos() < 0.15
                }) {
                    maxima.push(p);
                }
            }
        }
    }
    let two_maxima = maxima.len() >= 2;

    // Critical-point classification: near-critical seeds refined by damped
    // descent on |grad f|^2 (all derivatives by finite differences of plain
    // evaluations), then classified by the FD Hessian.
    let scan = gcflow::curvature::icosahedral_points(40);
    let g_scale = scan
        .iter()
        .step_by(7)
        .fold(0.0f64, |s, p| s.max(fd_gradient_norm(spec, p, 1e-4)))
        .max(1e-9);
    let mut degenerate_on_positive = false;
    let mut saddle_lap_ok = true;
    let f_scale = max_f.abs().max(1.0);
    for seed in &scan {
        if spec.eval(seed) <= zero_threshold {
            continue;
        }
        if fd_gradient_norm(spec, seed, 1e-4) > 0.1 * g_scale {
            continue;
        }
        let Some(p) = fd_refine_critical(spec, seed, g_scale) else {
            continue;
        };
        if spec.eval(&p) <= zero_threshold {
            continue;
        }
        let (eigs, lap) = fd_hessian(spec, &p, 2e-3);
        let min_eig = eigs[0].abs().min(eigs[1].abs());
        if min_eig < 1e-3 * f_scale {
            degenerate_on_positive = true;
        } else if eigs[0] < 0.0 && eigs[1] > 0.0 && lap <= 1e-4 * f_scale {
            saddle_lap_ok = false;
        }
    }
    (
        nonnegative,
        positive,
        !degenerate_on_positive,
        two_maxima,
        saddle_lap_ok,
    )
}

/// Damped descent on |grad f|^2 with FD derivatives only; returns a point
/// with |grad f| below the acceptance threshold, or None.
fn fd_refine_critical(spec: &CurvatureSpec, seed: &[f64; 3], g_scale: f64) -> Option<[f64; 3]> {
    let target = 1e-5 * g_scale;
    let mut x = *seed;
    let obj = |y: &[f64; 3]| {
        let g = fd_gradient_norm(spec, y, 1e-5);
        g * g
    };
    let mut value = obj(&x);
    let mut eta = 0.05 / (g_scale * g_scale);
    for _ in 0..200 {
        if value.sqrt() <= target {
            return Some(x);
        }
        let (e1, e2) = tangent_pair(&x);
        let h = 1e-5;
        let d1 = (obj(&geodesic_step(&x, &e1, h)) - obj(&geodesic_step(&x, &e1, -h))) / (2.0 * h);
        let d2 = (obj(&geodesic_step(&x, &e2, h)) - obj(&geodesic_step(&x, &e2, -h))) / (2.0 * h);
        let mut improved = false;
        for _ in 0..25 {
            let cand = unit(&[
                x[0] - eta * (d1 * e1[0] + d2 * e2[0]),
                x[1] - eta * (d1 * e1[1] + d2 * e2[1]),
                x[2] - eta * (d1 * e1[2] + d2 * e2[2]),
            ]);
            let cv = obj(&cand);
            if cv < value {
                x = cand;
                value = cv;
                eta *= 1.3;
                improved = true;
                break;
            }
            eta *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if value.sqrt() <= target {
        Some(x)
    } else {
        None
    }
}
