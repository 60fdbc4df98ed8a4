//! Acceptance suite: one test per criterion, each printing its own
//! pass/fail line with the measured values.
//!
//! Criteria 6 and 8 are implemented exactly as stated and are expected to
//! fail: criterion 8 asks the tilted flow to converge although no conformal
//! metric with K proportional to 2 + x3 exists (the flow correctly bubbles
//! at the maximum instead), and criterion 6's 0.1% slack on the Calabi time
//! integral is below the O(dt) bias of the first-order scheme at the pinned
//! dt = 1e-3 (measured ~9%). The failures are deliberate; details live in
//! the repository-external decisions ledger.

mod common;

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use gcflow::conformal::{mobius_factor, recenter, ConformalFactor, MobiusParameter};
use gcflow::curvature::{initial_positivity, preset};
use gcflow::diagnostics::{audit_step, AuditContext, AuditRecord};
use gcflow::flow::{
    build_initial, detect_concentration, gaussian_curvature_residual_sup, make_state,
    random_initial, renormalize_volume, run, step, FlowConfig, InitialData, RunResult,
    Termination,
};
use gcflow::io::write_timeseries;
use gcflow::rng::SplitMix64;
use gcflow::sphere::grid::{integrate_product, SphereGrid};

fn criterion3_config() -> FlowConfig {
    FlowConfig::new(
        preset("round").unwrap(),
        InitialData::Random {
            seed: 1,
            amplitude: 0.1,
            bandlimit: 8,
        },
    )
}

struct TimedRun {
    result: RunResult,
    elapsed: Duration,
}

static ROUND_RUN: OnceLock<TimedRun> = OnceLock::new();

fn round_run() -> &'static TimedRun {
    ROUND_RUN.get_or_init(|| {
        let t0 = Instant::now();
        let result = run(&criterion3_config()).expect("criterion 3 run");
        TimedRun {
            result,
            elapsed: t0.elapsed(),
        }
    })
}

static BUMP_RUN: OnceLock<RunResult> = OnceLock::new();

fn two_bump_zero_run() -> &'static RunResult {
    BUMP_RUN.get_or_init(|| {
        let mut cfg = FlowConfig::new(preset("two-bump-zero").unwrap(), InitialData::Zero);
        cfg.tol_converge = 1e-6;
        cfg.t_max = 200.0;
        cfg.snapshot_stride = 500;
        run(&cfg).expect("criterion 9 run")
    })
}

/// Audit residuals measured one step after a fixed probe time, at one dt.
fn residual_probe(dt: f64, t_probe: f64) -> AuditRecord {
    let mut cfg = criterion3_config();
    cfg.dt = dt;
    let grid = SphereGrid::new(cfg.bandlimit, cfg.oversample).unwrap();
    let f = cfg.spec.evaluate_on(&grid);
    let u0 = renormalize_volume(&build_initial(&cfg, &grid).unwrap()).unwrap();
    let mut s = make_state(u0, 0.0, 0, &f).unwrap();
    let ctx = AuditContext {
        f: f.clone(),
        max_f: cfg.spec.dense_max(),
        e_f_initial: s.energies.flow,
        band: cfg.bandlimit,
    };
    let n = (t_probe / dt).round() as u64;
    for _ in 0..n {
        s = step(&s, &cfg, &f).unwrap();
    }
    let next = step(&s, &cfg, &f).unwrap();
    audit_step(&s, &next, &ctx)
}

static PROBES: OnceLock<[AuditRecord; 3]> = OnceLock::new();

fn dt_probes() -> &'static [AuditRecord; 3] {
    PROBES.get_or_init(|| {
        [
            residual_probe(4e-3, 0.2),
            residual_probe(2e-3, 0.2),
            residual_probe(1e-3, 0.2),
        ]
    })
}

#[test]
fn criterion_01_gauss_bonnet_suite() {
    let t0 = Instant::now();
    let grid = SphereGrid::new(32, 2.0).unwrap();
    let mut rng = SplitMix64::new(101);
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let band = 4 + (rng.next_u64() % 13) as usize; // <= 16
        let amplitude = 0.05 + 0.45 * rng.next_f64(); // <= 0.5
        let u = random_initial(&grid, seed, amplitude, band).unwrap();
        let k = gcflow::conformal::gaussian_curvature(&u).unwrap();
        let density = u.area_density().unwrap();
        let gb = (integrate_product(&k, &density) - 4.0 * PI).abs();
        worst = worst.max(gb);
    }
    let elapsed = t0.elapsed();
    println!(
        "criterion 01 (Gauss-Bonnet suite): worst residual {worst:.3e} (tol {:.3e}), {:.2}s",
        1e-6 * 4.0 * PI,
        elapsed.as_secs_f64()
    );
    assert!(worst <= 1e-6 * 4.0 * PI);
    assert!(elapsed <= Duration::from_secs(30));
}

#[test]
fn criterion_02_stationarity() {
    let cfg = FlowConfig::new(preset("round").unwrap(), InitialData::Zero);
    let r = run(&cfg).unwrap();
    println!(
        "criterion 02 (stationarity): termination {:?}, steps {}, calabi {:.3e}",
        r.termination, r.steps, r.final_calabi
    );
    assert_eq!(r.termination, Termination::Converged);
    assert_eq!(r.steps, 0);
    assert!(r.final_calabi.abs() <= 1e-14);
}

#[test]
fn criterion_03_round_attraction() {
    let run = round_run();
    let r = &run.result;
    let last = &r.trajectory.last().unwrap().state;
    let (v, _) = recenter(&last.u).unwrap();
    let sup_v = v.sup_norm();
    println!(
        "criterion 03 (round attraction): {:?} at t {:.3} (steps {}), calabi {:.3e}, sup|v| {:.3e}, {:.1}s",
        r.termination,
        r.final_t,
        r.steps,
        r.final_calabi,
        sup_v,
        run.elapsed.as_secs_f64()
    );
    assert_eq!(r.termination, Termination::Converged);
    assert!(r.final_t <= 50.0);
    assert!(r.final_calabi < 1e-8);
    assert!(sup_v <= 1e-4);
    assert!(run.elapsed <= Duration::from_secs(120));
}

#[test]
fn criterion_04_energy_monotonicity() {
    let r = &round_run().result;
    let probes = dt_probes();
    let m: Vec<f64> = probes.iter().map(|p| p.monotonicity_residual.abs()).collect();
    let r1 = m[0] / m[1];
    let r2 = m[1] / m[2];
    println!(
        "criterion 04 (monotonicity): max per-step dE_f {:.3e} (slack 1e-10); residuals {:.3e} / {:.3e} / {:.3e}, ratios {:.2}, {:.2}",
        r.max_ef_step_increase, m[0], m[1], m[2], r1, r2
    );
    assert!(r.max_ef_step_increase <= 1e-10);
    assert!(r1 >= 1.8, "first halving ratio {r1:.2}");
    assert!(r2 >= 1.8, "second halving ratio {r2:.2}");
}

#[test]
fn criterion_05_alpha_bounds() {
    let r = &round_run().result;
    let b = two_bump_zero_run();
    println!(
        "criterion 05 (alpha bounds): round margins lower {:.3e} upper {:.3e} (printed bound held: {}); two-bump-zero margins lower {:.3e} upper {:.3e} (printed bound held: {})",
        r.min_alpha_lower_margin,
        r.min_alpha_upper_margin,
        r.printed_alpha_bound_held,
        b.min_alpha_lower_margin,
        b.min_alpha_upper_margin,
        b.printed_alpha_bound_held
    );
    for rr in [r, b] {
        assert!(rr.min_alpha_lower_margin >= -1e-9);
        assert!(rr.min_alpha_upper_margin >= -1e-6);
    }
}

#[test]
fn criterion_06_calabi_time_integral() {
    let r = &round_run().result;
    let bound = 4.0 * PI * r.e_f_initial * (1.0 + 1e-3);
    println!(
        "criterion 06 (Calabi integral): 2 sum dt calabi = {:.6e} vs bound {:.6e} (ratio {:.4}) \
         -- expected to exceed: the first-order scheme's O(dt) dissipation bias at dt = 1e-3 \
         is ~9%, far above the stated 0.1% slack (see decisions ledger)",
        r.calabi_time_integral,
        bound,
        r.calabi_time_integral / bound
    );
    assert!(
        r.calabi_time_integral <= bound,
        "Calabi time integral {:.6e} exceeds the stated bound {:.6e}",
        r.calabi_time_integral,
        bound
    );
}

#[test]
fn criterion_07_evolution_identities() {
    let probes = dt_probes();
    let c: Vec<f64> = probes
        .iter()
        .map(|p| p.curvature_evolution_residual)
        .collect();
    let a: Vec<f64> = probes.iter().map(|p| p.alpha_rate_residual.abs()).collect();
    let c1 = c[0] / c[1];
    let c2 = c[1] / c[2];
    println!(
        "criterion 07 (evolution identities): curvature residuals {:.3e}/{:.3e}/{:.3e} ratios {:.2},{:.2}; alpha-rate residuals {:.3e}/{:.3e}/{:.3e}",
        c[0], c[1], c[2], c1, c2, a[0], a[1], a[2]
    );
    assert!(c1 >= 1.8 && c2 >= 1.8, "curvature identity ratios {c1:.2}, {c2:.2}");
    // For the round preset the alpha identity is 0 = 0 and its residual sits
    // at the roundoff floor at every dt, which cannot halve; accept either
    // first-order decay or full saturation.
    let alpha_ok = (a[0] / a[1] >= 1.8 && a[1] / a[2] >= 1.8) || a.iter().all(|v| *v <= 1e-9);
    assert!(alpha_ok, "alpha-rate residuals {a:?}");
}

#[test]
fn criterion_08_positive_f_convergence() {
    let cfg = FlowConfig::new(
        preset("tilted").unwrap(),
        InitialData::Random {
            seed: 1,
            amplitude: 0.1,
            bandlimit: 8,
        },
    );
    let r = run(&cfg).unwrap();
    let last = &r.trajectory.last().unwrap().state;
    let residual = gaussian_curvature_residual_sup(last, &cfg);
    println!(
        "criterion 08 (tilted convergence): termination {:?} at t {:.3}, calabi {:.3e}, max|K - alpha f| {:.3e} \
         -- expected to fail: f = 2 + x3 admits no conformal metric with K = alpha f \
         (first-harmonic obstruction), so the flow correctly concentrates at the maximum \
         instead of converging (see decisions ledger)",
        r.termination, r.final_t, r.final_calabi, residual
    );
    assert_eq!(
        r.termination,
        Termination::Converged,
        "tilted flow did not converge (it cannot; see the decisions ledger)"
    );
    assert!(residual <= 1e-3);
}

#[test]
fn criterion_09_nonnegative_f_with_zeros() {
    let grid = SphereGrid::new(32, 2.0).unwrap();
    let spec = preset("two-bump-zero").unwrap();
    let u0 = ConformalFactor::zero(grid);
    let p0 = initial_positivity(&u0, &spec).unwrap();
    let r = two_bump_zero_run();
    println!(
        "criterion 09 (two-bump-zero): initial positivity {:.4e}, termination {:?} at t {:.3} (steps {}), calabi {:.3e}",
        p0, r.termination, r.final_t, r.steps, r.final_calabi
    );
    assert!(p0 > 0.0);
    match r.termination {
        Termination::Converged => assert!(r.final_calabi < 1e-6),
        Termination::Concentrated => {
            let c = r.concentration.as_ref().expect("concentration report");
            assert!(c.r_star > 0.0 && c.r_star <= PI);
            assert!(c.local_mass >= 0.0 && c.local_mass <= 4.0 * PI * (1.0 + 1e-6));
        }
        other => panic!("run ended in {other:?}; neither converged nor concentrated"),
    }
}

#[test]
fn criterion_10_concentration_detector() {
    let cfg = FlowConfig::new(preset("round").unwrap(), InitialData::Zero);
    let grid = SphereGrid::new(32, 2.0).unwrap();
    let f = cfg.spec.evaluate_on(&grid);
    // Moebius bubbles: the oracle direction for a = (0, 0, s) is +e3 (the
    // closed-form center of mass is positive along the axis).
    for s in [0.9, 0.99] {
        assert!(common::bubble_center_of_mass(s) > 0.0);
        let u = mobius_factor(&MobiusParameter::new([0.0, 0.0, s]).unwrap(), &grid).unwrap();
        let state = make_state(u, 0.0, 0, &f).unwrap();
        let det = detect_concentration(&state, &cfg).unwrap();
        let angle = det.center[2].clamp(-1.0, 1.0).acos();
        println!(
            "criterion 10 (detector, |a| = {s}): concentrated {}, r* {:.4}, angle to +e3 {:.4}, local mass / 4pi {:.4}",
            det.concentrated,
            det.r_star,
            angle,
            det.local_mass / (4.0 * PI)
        );
        assert!(det.concentrated);
        assert!(angle <= 0.1);
        assert!(det.local_mass >= 0.9 * 4.0 * PI);
    }
    let state = make_state(ConformalFactor::zero(grid), 0.0, 0, &f).unwrap();
    let det = detect_concentration(&state, &cfg).unwrap();
    println!(
        "criterion 10 (detector, round): concentrated {}, r* {:.6} (pi/3 = {:.6})",
        det.concentrated,
        det.r_star,
        PI / 3.0
    );
    assert!(!det.concentrated);
    assert!((det.r_star - PI / 3.0).abs() <= 1e-3);
}

#[test]
fn criterion_11_invariance_and_inequalities() {
    let grid = SphereGrid::new(32, 2.0).unwrap();
    let mut rng = SplitMix64::new(1111);
    let mut worst_de = 0.0f64;
    let mut worst_gap = f64::INFINITY;
    for k in 0..50u64 {
        let band = 4 + (rng.next_u64() % 9) as usize;
        let amplitude = 0.1 + 0.4 * rng.next_f64();
        let u = random_initial(&grid, 7000 + k, amplitude, band).unwrap();
        let s = 0.8 * rng.next_f64();
        let d = [
            rng.next_symmetric(),
            rng.next_symmetric(),
            rng.next_symmetric(),
        ];
        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt().max(1e-9);
        let p = MobiusParameter::new([s * d[0] / n, s * d[1] / n, s * d[2] / n]).unwrap();
        let v = gcflow::conformal::mobius_pullback(&u, &p).unwrap();
        let de = (gcflow::conformal::liouville_energy(&v)
            - gcflow::conformal::liouville_energy(&u))
        .abs();
        worst_de = worst_de.max(de);
        worst_gap = worst_gap.min(gcflow::conformal::onofri_gap(&u).unwrap());
    }
    // Jensen on the audited snapshots of the converged round run
    let r = &round_run().result;
    let worst_jensen = r
        .trajectory
        .iter()
        .map(|s| s.audit.jensen_vbar)
        .fold(f64::NEG_INFINITY, f64::max);
    println!(
        "criterion 11 (invariance + inequalities): worst |dE| {worst_de:.3e}, worst Onofri gap {worst_gap:.3e}, worst snapshot jensen {worst_jensen:.3e}"
    );
    assert!(worst_de <= 1e-6);
    assert!(worst_gap >= -1e-8);
    assert!(worst_jensen <= 1e-10);
}

#[test]
fn criterion_12_determinism() {
    let cfg = criterion3_config();
    let write = |tag: &str| {
        let r = run(&cfg).unwrap();
        let records: Vec<AuditRecord> = r.trajectory.iter().map(|s| s.audit.clone()).collect();
        let dir = std::env::temp_dir().join(format!("gcflow-determinism-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("timeseries.csv");
        write_timeseries(&records, &path).unwrap();
        std::fs::read(&path).unwrap()
    };
    let a = write("a");
    let b = write("b");
    println!(
        "criterion 12 (determinism): two runs, {} vs {} bytes, identical: {}",
        a.len(),
        b.len(),
        a == b
    );
    assert_eq!(a, b, "CSV outputs differ between identical runs");
}
