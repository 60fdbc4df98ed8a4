//! End-to-end exercises of the command-line surface: subcommands, exit
//! codes, output files, and cross-invocation determinism.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gcflow"))
}

#[test]
fn presets_lists_registry() {
    let out = bin().arg("presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "round",
        "tilted",
        "quad-saddle",
        "two-bump",
        "two-bump-zero",
        "bubble-start",
    ] {
        assert!(text.lines().any(|l| l == name), "missing {name} in {text}");
    }
}

#[test]
fn run_round_zero_exits_converged() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--preset", "round", "--u0", "zero", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    // run directory contract: config echo, time series, first/last
    // snapshots, result summary
    assert!(dir.path().join("config.json").exists());
    assert!(dir.path().join("timeseries.csv").exists());
    assert!(dir.path().join("result.json").exists());
    let snapshots: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| {
            let n = e.file_name().to_string_lossy().to_string();
            n.starts_with("u_") && n.ends_with(".txt")
        })
        .collect();
    assert!(!snapshots.is_empty());
    let result: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("result.json")).unwrap())
            .unwrap();
    assert_eq!(result["termination"], "converged");
    assert_eq!(result["steps"], 0);
    assert!(result["final_calabi"].as_f64().unwrap().abs() <= 1e-14);
}

#[test]
fn run_bubble_start_exits_concentrated() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--preset", "bubble-start", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let result: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("result.json")).unwrap())
            .unwrap();
    assert_eq!(result["termination"], "concentrated");
    assert!(result["concentration"]["r_star"].as_f64().unwrap() < 0.35);
}

#[test]
fn bad_config_exits_one_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"preset":"round","dt":-1.0}"#).unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("dt"), "stderr: {err}");

    let cfg2 = dir.path().join("unknown.json");
    std::fs::write(&cfg2, r#"{"preset":"round","mystery_knob":3}"#).unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg2).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("mystery_knob"), "stderr: {err}");
}

#[test]
fn verify_f_tilted_reports_two_points_and_failure() {
    let out = bin()
        .args(["verify-f", "--preset", "tilted"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("critical points of 'tilted': 2"), "{text}");
    assert!(text.contains("overall: fail"), "{text}");
}

#[test]
fn selftest_passes() {
    let out = bin().arg("selftest").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert!(!text.contains("FAIL"), "{text}");
}

#[test]
fn byte_identical_outputs_across_invocations() {
    let run_once = |dir: &Path| {
        let out = bin()
            .args([
                "run",
                "--preset",
                "round",
                "--u0",
                "random:1,0.1,8",
                "--t-max",
                "0.05",
                "--tol-converge",
                "1e-30",
                "--snapshot-stride",
                "10",
                "--out-dir",
            ])
            .arg(dir)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(3)); // horizon by construction
    };
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    run_once(d1.path());
    run_once(d2.path());
    let a = std::fs::read(d1.path().join("timeseries.csv")).unwrap();
    let b = std::fs::read(d2.path().join("timeseries.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    // snapshots as well
    let sa = std::fs::read(d1.path().join("u_00000000.txt")).unwrap();
    let sb = std::fs::read(d2.path().join("u_00000000.txt")).unwrap();
    assert_eq!(sa, sb);
}

#[test]
fn emit_images_writes_pgm_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "run",
            "--preset",
            "round",
            "--u0",
            "zero",
            "--emit-images",
            "--out-dir",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let pgm = dir.path().join("u_00000000.pgm");
    assert!(pgm.exists());
    let text = std::fs::read_to_string(&pgm).unwrap();
    assert!(text.starts_with("P2\n130 66\n255\n"), "unexpected header");
    assert!(pgm.with_extension("minmax.txt").exists());
}
