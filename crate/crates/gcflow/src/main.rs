//! Command-line driver: run the flow, sweep the invariant suite, or inspect
//! a prescribed function's critical points.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gcflow::curvature::{find_critical_points, preset, verify_hypotheses, Verdict, PRESET_NAMES};
use gcflow::flow::{run, InitialData};
use gcflow::io::{exit_code, write_run_outputs, RunConfig};
use gcflow::GcError;

#[derive(Parser)]
#[command(name = "gcflow", about = "Prescribed-curvature flow on the 2-sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the flow and write time series, snapshots, and a result
    /// summary into the output directory.
    Run(RunArgs),
    /// Execute the built-in invariant suite and print a pass/fail table.
    Selftest,
    /// Report the critical points and convergence hypotheses of a preset.
    VerifyF(VerifyArgs),
    /// List the registered presets.
    Presets,
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Prescribed-function preset (or "bubble-start").
    #[arg(long)]
    preset: Option<String>,
    /// Initial data: "zero", "random:SEED,AMP,BAND", "mobius:X,Y,Z",
    /// or "file:PATH".
    #[arg(long)]
    u0: Option<String>,
    /// Spectral bandlimit L.
    #[arg(long, value_name = "L")]
    bandlimit: Option<usize>,
    /// Grid oversampling factor q.
    #[arg(long)]
    oversample: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    tol_converge: Option<f64>,
    #[arg(long)]
    tol_concentrate: Option<f64>,
    /// Time scheme: "imex" or "rk4-explicit".
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    snapshot_stride: Option<usize>,
    #[arg(long)]
    emit_images: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    preset: String,
}

fn parse_u0(text: &str, default_seed: u64) -> Result<InitialData, GcError> {
    if text == "zero" {
        return Ok(InitialData::Zero);
    }
    if let Some(rest) = text.strip_prefix("random:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 3 {
            return Err(GcError::Config(
                "random initial data needs SEED,AMPLITUDE,BANDLIMIT".into(),
            ));
        }
        return Ok(InitialData::Random {
            seed: parts[0]
                .parse()
                .map_err(|e| GcError::Config(format!("bad seed: {e}")))?,
            amplitude: parts[1]
                .parse()
                .map_err(|e| GcError::Config(format!("bad amplitude: {e}")))?,
            bandlimit: parts[2]
                .parse()
                .map_err(|e| GcError::Config(format!("bad bandlimit: {e}")))?,
        });
    }
    if text == "random" {
        return Ok(InitialData::Random {
            seed: default_seed,
            amplitude: 0.1,
            bandlimit: 8,
        });
    }
    if let Some(rest) = text.strip_prefix("mobius:") {
        let parts: Vec<f64> = rest
            .split(',')
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| GcError::Config(format!("bad mobius parameter: {e}")))?;
        if parts.len() != 3 {
            return Err(GcError::Config("mobius initial data needs X,Y,Z".into()));
        }
        return Ok(InitialData::Mobius {
            a: [parts[0], parts[1], parts[2]],
        });
    }
    if let Some(rest) = text.strip_prefix("file:") {
        return Ok(InitialData::File(rest.to_string()));
    }
    Err(GcError::Config(format!("unrecognized u0 descriptor '{text}'")))
}

fn build_config(args: &RunArgs) -> Result<RunConfig, GcError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| GcError::io(path.display().to_string(), e))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(p) = &args.preset {
        cfg.preset = Some(p.clone());
        cfg.spec = None;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(u0) = &args.u0 {
        cfg.u0 = parse_u0(u0, cfg.seed)?;
    }
    if let Some(l) = args.bandlimit {
        cfg.bandlimit = l;
    }
    if let Some(q) = args.oversample {
        cfg.q = q;
    }
    if let Some(dt) = args.dt {
        cfg.dt = dt;
    }
    if let Some(t) = args.t_max {
        cfg.t_max = t;
    }
    if let Some(tol) = args.tol_converge {
        cfg.tol_converge = tol;
    }
    if let Some(tol) = args.tol_concentrate {
        cfg.tol_concentrate = tol;
    }
    if let Some(s) = &args.scheme {
        cfg.scheme = match s.as_str() {
            "imex" => gcflow::flow::Scheme::Imex,
            "rk4-explicit" => gcflow::flow::Scheme::Rk4Explicit,
            other => {
                return Err(GcError::Config(format!(
                    "unknown scheme '{other}', expected imex or rk4-explicit"
                )))
            }
        };
    }
    if let Some(dir) = &args.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(stride) = args.snapshot_stride {
        cfg.snapshot_stride = stride;
    }
    if args.emit_images {
        cfg.emit_images = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(args: &RunArgs) -> Result<i32, GcError> {
    let cfg = build_config(args)?;
    let flow_cfg = cfg.resolve()?;
    let result = run(&flow_cfg)?;
    let dir = write_run_outputs(&cfg, &result)?;
    println!(
        "termination: {}  steps: {}  t: {:.6}  calabi: {:.6e}  alpha: {:.12}",
        match result.termination {
            gcflow::flow::Termination::Converged => "converged",
            gcflow::flow::Termination::Concentrated => "concentrated",
            gcflow::flow::Termination::Horizon => "horizon",
            gcflow::flow::Termination::BlowUp => "blow-up",
            gcflow::flow::Termination::PositivityViolation => "positivity-violation",
        },
        result.steps,
        result.final_t,
        result.final_calabi,
        result.final_alpha
    );
    if let Some(c) = &result.concentration {
        println!(
            "concentration: center ({:.6}, {:.6}, {:.6})  r* {:.6}  local mass/4pi {:.4}",
            c.center[0],
            c.center[1],
            c.center[2],
            c.r_star,
            c.local_mass / (4.0 * std::f64::consts::PI)
        );
    }
    println!("outputs: {}", dir.display());
    Ok(exit_code(result.termination))
}

fn cmd_selftest() -> i32 {
    let checks = gcflow::selftest::run_all();
    let mut failed = 0;
    for c in &checks {
        println!(
            "{}  {:<38} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        if !c.passed {
            failed += 1;
        }
    }
    println!("{} / {} checks passed", checks.len() - failed, checks.len());
    if failed == 0 {
        0
    } else {
        1
    }
}

fn cmd_verify_f(args: &VerifyArgs) -> Result<i32, GcError> {
    let spec = preset(&args.preset)?;
    let report = find_critical_points(&spec)?;
    println!(
        "critical points of '{}': {} (complete: {})",
        spec.name,
        report.points.len(),
        report.complete
    );
    let shown = report.points.len().min(24);
    for p in report.points.iter().take(shown) {
        println!(
            "  {:?} at ({:+.6}, {:+.6}, {:+.6})  f = {:.9}  eig = ({:+.3e}, {:+.3e})  lap = {:+.3e}",
            p.class,
            p.location[0],
            p.location[1],
            p.location[2],
            p.f_value,
            p.hessian_eigenvalues[0],
            p.hessian_eigenvalues[1],
            p.laplacian
        );
    }
    if report.points.len() > shown {
        println!("  ... {} more", report.points.len() - shown);
    }
    if let Some(c) = &report.degenerate_circle {
        println!(
            "  degenerate circle: axis ({:+.4}, {:+.4}, {:+.4}), offset {:+.4}, {} members, f = {:.6}",
            c.axis[0], c.axis[1], c.axis[2], c.offset, c.member_count, c.f_value
        );
    }
    let h = verify_hypotheses(&spec, &report)?;
    let mark = |b: bool| if b { "ok " } else { "FAIL" };
    println!("hypotheses:");
    println!("  nonnegative                     {}", mark(h.nonnegative));
    println!("  positive somewhere              {}", mark(h.positive_somewhere));
    println!("  nondegenerate on positive part  {}", mark(h.nondegenerate_on_positive_part));
    println!("  two positive maxima             {}", mark(h.two_positive_maxima));
    println!("  saddle laplacian positive       {}", mark(h.saddle_laplacian_positive));
    println!(
        "  overall: {}",
        match h.overall {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Undecidable => "undecidable",
        }
    );
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Selftest => Ok(cmd_selftest()),
        Command::VerifyF(args) => cmd_verify_f(args),
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            println!("bubble-start");
            Ok(0)
        }
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(GcError::PositivityViolation { value }) => {
            eprintln!("error: positivity violated (integral = {value})");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
