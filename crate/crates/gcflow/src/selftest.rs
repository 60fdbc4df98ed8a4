//! Runtime invariant suite behind the `selftest` subcommand: a compact,
//! self-contained sweep over the core identities. The authoritative
//! versions, with their independent oracles, live in the test suite.

use std::f64::consts::PI;

use crate::conformal::{
    center_of_mass, gaussian_curvature, liouville_energy, mobius_factor, mobius_pullback,
    onofri_gap, recenter, volume, ConformalFactor, MobiusParameter,
};
use crate::curvature::preset;
use crate::flow::{
    detect_concentration, make_state, random_initial, FlowConfig, InitialData,
};
use crate::sphere::cap::geodesic_cap_integral;
use crate::sphere::grid::{integrate, GridField, SphereGrid};
use crate::sphere::spectral::{analyze, grad_energy, synthesize};

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

/// Run the invariant sweep; every entry prints one pass/fail line.
pub fn run_all() -> Vec<Check> {
    let mut out = Vec::new();
    let grid = match SphereGrid::new(32, 2.0) {
        Ok(g) => g,
        Err(e) => {
            out.push(check("grid construction", false, e.to_string()));
            return out;
        }
    };

    {
        let total = grid.total_weight();
        let rel = (total - 4.0 * PI).abs() / (4.0 * PI);
        out.push(check("quadrature weight 4pi", rel <= 1e-13, format!("rel {rel:.2e}")));
    }
    {
        let u = random_initial(&grid, 11, 0.5, 16).unwrap();
        let round_trip = synthesize(&analyze(u.field()).unwrap(), &grid).unwrap();
        let err = round_trip.max_abs_diff(u.field()) / u.sup_norm().max(1e-300);
        out.push(check("transform round-trip", err <= 1e-12, format!("rel {err:.2e}")));
    }
    {
        let u = random_initial(&grid, 12, 1.0, 16).unwrap();
        let a = u.spectral();
        let lap = synthesize(&crate::sphere::spectral::laplacian(a), &grid).unwrap();
        let quad = -crate::sphere::grid::integrate_product(u.field(), &lap);
        let spec = grad_energy(a);
        let rel = (quad - spec).abs() / spec.max(1e-300);
        out.push(check("Parseval gradient energy", rel <= 1e-10, format!("rel {rel:.2e}")));
    }
    {
        let one = GridField::constant(grid.clone(), 1.0);
        let r = PI / 3.0;
        let got = geodesic_cap_integral(&one, &[0.2, -0.3, 0.93], r).unwrap();
        let rel = (got - PI).abs() / PI;
        out.push(check("cap area pi at r=pi/3", rel <= 1e-6, format!("rel {rel:.2e}")));
    }
    {
        let u = random_initial(&grid, 13, 0.5, 16).unwrap();
        let k = gaussian_curvature(&u).unwrap();
        let density = u.area_density().unwrap();
        let gb = crate::sphere::grid::integrate_product(&k, &density) - 4.0 * PI;
        out.push(check(
            "Gauss-Bonnet on random factor",
            gb.abs() <= 1e-6 * 4.0 * PI,
            format!("residual {gb:.2e}"),
        ));
    }
    {
        let p = MobiusParameter::new([0.2, 0.3, 0.8]).unwrap();
        let u = mobius_factor(&p, &grid).unwrap();
        let vol = volume(&u).unwrap();
        let e = liouville_energy(&u);
        let ok = (vol - 4.0 * PI).abs() <= 1e-8 * 4.0 * PI && e.abs() <= 1e-6;
        out.push(check(
            "Moebius factor volume and energy",
            ok,
            format!("vol residual {:.2e}, E {:.2e}", (vol - 4.0 * PI).abs(), e),
        ));
    }
    {
        let u = random_initial(&grid, 14, 0.4, 12).unwrap();
        let p = MobiusParameter::new([0.3, -0.2, 0.5]).unwrap();
        let v = mobius_pullback(&u, &p).unwrap();
        let de = (liouville_energy(&v) - liouville_energy(&u)).abs();
        out.push(check("conformal invariance of E", de <= 1e-6, format!("diff {de:.2e}")));
    }
    {
        let u = random_initial(&grid, 15, 0.4, 12).unwrap();
        let gap = onofri_gap(&u).unwrap();
        out.push(check("Onofri gap nonnegative", gap >= -1e-8, format!("gap {gap:.2e}")));
    }
    {
        let u = random_initial(&grid, 16, 0.3, 8).unwrap();
        match recenter(&u) {
            Ok((v, _)) => {
                let m = center_of_mass(&v).unwrap();
                let n = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
                out.push(check("recentering residual", n <= 1e-9, format!("|m| {n:.2e}")));
            }
            Err(e) => out.push(check("recentering residual", false, e.to_string())),
        }
    }
    {
        let cfg = FlowConfig::new(preset("round").unwrap(), InitialData::Zero);
        let f = cfg.spec.evaluate_on(&grid);
        let s = make_state(ConformalFactor::zero(grid.clone()), 0.0, 0, &f).unwrap();
        let ok = s.energies.calabi <= 1e-14;
        let det = detect_concentration(&s, &cfg).unwrap();
        out.push(check(
            "round stationary state",
            ok && !det.concentrated && (det.r_star - PI / 3.0).abs() <= 1e-3,
            format!("calabi {:.2e}, r* {:.6}", s.energies.calabi, det.r_star),
        ));
    }
    {
        let cfg = FlowConfig::new(preset("round").unwrap(), InitialData::Zero);
        let f = cfg.spec.evaluate_on(&grid);
        let p = MobiusParameter::new([0.0, 0.0, 0.9]).unwrap();
        let u = mobius_factor(&p, &grid).unwrap();
        let s = make_state(u, 0.0, 0, &f).unwrap();
        let det = detect_concentration(&s, &cfg).unwrap();
        out.push(check(
            "bubble concentration detection",
            det.concentrated && det.local_mass >= 0.9 * 4.0 * PI,
            format!("r* {:.4}, local mass / 4pi {:.4}", det.r_star, det.local_mass / (4.0 * PI)),
        ));
    }
    {
        let one = GridField::constant(grid.clone(), 1.0);
        let q = integrate(&one).unwrap();
        let x3sq = GridField::from_fn(grid.clone(), |p| p[2] * p[2]);
        let q2 = integrate(&x3sq).unwrap();
        let ok = (q - 4.0 * PI).abs() <= 1e-12 && (q2 - 4.0 * PI / 3.0).abs() <= 1e-12;
        out.push(check("integral closed forms", ok, format!("{q:.12} {q2:.12}")));
    }
    out
}
