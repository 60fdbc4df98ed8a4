//! Run configuration and the on-disk output formats.
//!
//! Formats are deliberately plain: JSON for config and results, CSV for the
//! audit time series, whitespace text for field snapshots, and PGM (P2) for
//! optional images. Floating-point values are written with 17 significant
//! digits so that files round-trip bit-exactly and identically-seeded runs
//! are byte-identical.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::curvature::{preset, CurvatureSpec};
use crate::diagnostics::AuditRecord;
use crate::error::{GcError, GcResult};
use crate::flow::{
    ConcentrationReport, FlowConfig, InitialData, RunResult, Scheme, Termination,
};
use crate::sphere::grid::{GridField, SphereGrid};

pub const TIMESERIES_HEADER: &str = "t,alpha,E,E_f,calabi,gauss_bonnet_residual,volume_residual,monotonicity_residual,alpha_rate_residual,curvature_evolution_residual,jensen_vbar,onofri_gap,spectral_tail_fraction,positivity_value";

fn default_bandlimit() -> usize {
    32
}
fn default_oversample() -> f64 {
    2.0
}
fn default_dt() -> f64 {
    1e-3
}
fn default_t_max() -> f64 {
    50.0
}
fn default_tol_converge() -> f64 {
    1e-8
}
fn default_tol_concentrate() -> f64 {
    0.35
}
fn default_scheme() -> Scheme {
    Scheme::Imex
}
fn default_u0() -> InitialData {
    InitialData::Zero
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("runs/run")
}
fn default_snapshot_stride() -> usize {
    100
}
fn default_concentration_stride() -> usize {
    25
}

/// On-disk run configuration; unknown keys are rejected.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<CurvatureSpec>,
    #[serde(default = "default_bandlimit", rename = "L")]
    pub bandlimit: usize,
    #[serde(default = "default_oversample")]
    pub q: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_tol_converge")]
    pub tol_converge: f64,
    #[serde(default = "default_tol_concentrate")]
    pub tol_concentrate: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_u0")]
    pub u0: InitialData,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_snapshot_stride")]
    pub snapshot_stride: usize,
    #[serde(default = "default_concentration_stride")]
    pub concentration_stride: usize,
    #[serde(default)]
    pub emit_images: bool,
    /// Seed used when `u0` is "random" without an explicit seed override.
    #[serde(default)]
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            preset: Some("round".into()),
            spec: None,
            bandlimit: default_bandlimit(),
            q: default_oversample(),
            dt: default_dt(),
            t_max: default_t_max(),
            tol_converge: default_tol_converge(),
            tol_concentrate: default_tol_concentrate(),
            scheme: default_scheme(),
            u0: default_u0(),
            out_dir: default_out_dir(),
            snapshot_stride: default_snapshot_stride(),
            concentration_stride: default_concentration_stride(),
            emit_images: false,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Parse and validate a JSON configuration document.
    pub fn parse(text: &str) -> GcResult<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| GcError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> GcResult<()> {
        let fail = |field: &str, detail: String| -> GcResult<()> {
            Err(GcError::Config(format!(
                "field '{field}' out of range: {detail}"
            )))
        };
        if self.bandlimit < 8 || self.bandlimit > 128 {
            return fail("L", format!("must be in [8, 128], got {}", self.bandlimit));
        }
        if !(self.q >= 1.0 && self.q <= 8.0) {
            return fail("q", format!("must be in [1, 8], got {}", self.q));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return fail("dt", format!("must be > 0, got {}", self.dt));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return fail("t_max", format!("must be > 0, got {}", self.t_max));
        }
        if !(self.tol_converge > 0.0) {
            return fail(
                "tol_converge",
                format!("must be > 0, got {}", self.tol_converge),
            );
        }
        if !(self.tol_concentrate > 0.0 && self.tol_concentrate <= std::f64::consts::PI) {
            return fail(
                "tol_concentrate",
                format!("must be in (0, pi], got {}", self.tol_concentrate),
            );
        }
        if self.snapshot_stride == 0 {
            return fail("snapshot_stride", "must be >= 1".into());
        }
        if self.concentration_stride == 0 {
            return fail("concentration_stride", "must be >= 1".into());
        }
        if self.preset.is_none() && self.spec.is_none() {
            return Err(GcError::Config(
                "one of 'preset' or 'spec' is required".into(),
            ));
        }
        if let Some(s) = &self.spec {
            s.validate().map_err(|e| GcError::Config(e.to_string()))?;
        }
        if let Some(p) = &self.preset {
            if p != "bubble-start" {
                preset(p).map_err(|e| GcError::Config(e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Resolve the prescribed function and initial data; the "bubble-start"
    /// preset is round f with a strong Moebius bubble as initial data.
    pub fn resolve(&self) -> GcResult<FlowConfig> {
        let (spec, u0_override) = match (&self.preset, &self.spec) {
            (Some(p), None) if p == "bubble-start" => (
                preset("round")?,
                Some(InitialData::Mobius {
                    a: [0.0, 0.0, 0.99],
                }),
            ),
            (Some(p), None) => (preset(p)?, None),
            (None, Some(s)) => (s.clone(), None),
            (Some(_), Some(_)) => {
                return Err(GcError::Config(
                    "'preset' and 'spec' are mutually exclusive".into(),
                ))
            }
            (None, None) => unreachable!("validated"),
        };
        let u0 = u0_override.unwrap_or_else(|| self.u0.clone());
        let mut flow = FlowConfig::new(spec, u0);
        flow.bandlimit = self.bandlimit;
        flow.oversample = self.q;
        flow.dt = self.dt;
        flow.t_max = self.t_max;
        flow.tol_converge = self.tol_converge;
        flow.tol_concentrate = self.tol_concentrate;
        flow.scheme = self.scheme;
        flow.snapshot_stride = self.snapshot_stride;
        flow.concentration_stride = self.concentration_stride;
        flow.validate()?;
        Ok(flow)
    }
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write the audit ledger as CSV with the fixed 14-column header.
pub fn write_timeseries(records: &[AuditRecord], path: &Path) -> GcResult<()> {
    if records.is_empty() {
        return Err(GcError::InvalidArgument(
            "refusing to write an empty time series".into(),
        ));
    }
    let mut text = String::with_capacity(records.len() * 300);
    text.push_str(TIMESERIES_HEADER);
    text.push('\n');
    for r in records {
        let fields = [
            r.t,
            r.alpha,
            r.liouville_energy,
            r.flow_energy,
            r.calabi,
            r.gauss_bonnet_residual,
            r.volume_residual,
            r.monotonicity_residual,
            r.alpha_rate_residual,
            r.curvature_evolution_residual,
            r.jensen_vbar,
            r.onofri_gap,
            r.spectral_tail_fraction,
            r.positivity_value,
        ];
        let row: Vec<String> = fields.iter().map(|v| fmt17(*v)).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| GcError::io(path.display().to_string(), e))
}

/// Plain-text snapshot: "nlat nlon L" then nlat rows of nlon samples,
/// row i at colatitude node i, column j at longitude 2 pi j / nlon.
pub fn write_snapshot(field: &GridField, path: &Path) -> GcResult<()> {
    let g = &field.grid;
    let mut text = String::with_capacity(g.n_lat * g.n_lon * 25);
    text.push_str(&format!("{} {} {}\n", g.n_lat, g.n_lon, g.bandlimit));
    for i in 0..g.n_lat {
        let row: Vec<String> = field.values.row(i).iter().map(|v| fmt17(*v)).collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| GcError::io(path.display().to_string(), e))
}

/// Read a snapshot back onto a compatible grid.
pub fn read_snapshot(path: &Path, grid: &Arc<SphereGrid>) -> GcResult<GridField> {
    let text =
        fs::read_to_string(path).map_err(|e| GcError::io(path.display().to_string(), e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| GcError::InvalidData("empty snapshot file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| GcError::InvalidData(format!("bad snapshot header: {e}")))?;
    if dims.len() != 3 {
        return Err(GcError::InvalidData("snapshot header needs 3 fields".into()));
    }
    let (n_lat, n_lon) = (dims[0], dims[1]);
    if n_lat != grid.n_lat || n_lon != grid.n_lon {
        return Err(GcError::InvalidArgument(format!(
            "snapshot is {n_lat}x{n_lon}, grid is {}x{}",
            grid.n_lat, grid.n_lon
        )));
    }
    let mut values = ndarray::Array2::zeros((n_lat, n_lon));
    for i in 0..n_lat {
        let line = lines
            .next()
            .ok_or_else(|| GcError::InvalidData(format!("snapshot truncated at row {i}")))?;
        let mut count = 0;
        for (j, tok) in line.split_whitespace().enumerate() {
            if j >= n_lon {
                return Err(GcError::InvalidData(format!("row {i} too long")));
            }
            values[[i, j]] = tok
                .parse::<f64>()
                .map_err(|e| GcError::InvalidData(format!("row {i}: {e}")))?;
            count += 1;
        }
        if count != n_lon {
            return Err(GcError::InvalidData(format!(
                "row {i} has {count} values, expected {n_lon}"
            )));
        }
    }
    GridField::from_values(grid.clone(), values)
}

/// PGM (P2) image with linear min-max scaling, plus a sidecar text file
/// recording the scale.
pub fn write_pgm(field: &GridField, path: &Path) -> GcResult<()> {
    let g = &field.grid;
    let min = field.min_value();
    let max = field.max_value();
    let span = max - min;
    let mut text = format!("P2\n{} {}\n255\n", g.n_lon, g.n_lat);
    for i in 0..g.n_lat {
        let row: Vec<String> = field
            .values
            .row(i)
            .iter()
            .map(|v| {
                let level = if span > 0.0 {
                    ((v - min) / span * 255.0).round() as i64
                } else {
                    0
                };
                level.clamp(0, 255).to_string()
            })
            .collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| GcError::io(path.display().to_string(), e))?;
    let sidecar = path.with_extension("minmax.txt");
    fs::write(&sidecar, format!("{} {}\n", fmt17(min), fmt17(max)))
        .map_err(|e| GcError::io(sidecar.display().to_string(), e))
}

#[derive(Serialize)]
struct ResultDoc<'a> {
    termination: Termination,
    steps: u64,
    final_t: f64,
    final_calabi: f64,
    final_alpha: f64,
    concentration: Option<&'a ConcentrationReport>,
    e_f_initial: f64,
    max_f: f64,
    calabi_time_integral: f64,
    calabi_integral_bound: f64,
    max_ef_step_increase: f64,
    min_alpha_lower_margin: f64,
    min_alpha_upper_margin: f64,
    printed_alpha_bound_held: bool,
}

/// Exit code convention: 0 converged, 2 concentrated, 3 horizon,
/// 4 blow-up or positivity violation (1 is reserved for usage errors).
pub fn exit_code(t: Termination) -> i32 {
    match t {
        Termination::Converged => 0,
        Termination::Concentrated => 2,
        Termination::Horizon => 3,
        Termination::BlowUp | Termination::PositivityViolation => 4,
    }
}

/// Write config echo, time series, first/last snapshots, optional images,
/// and the result JSON into the run directory.
pub fn write_run_outputs(cfg: &RunConfig, result: &RunResult) -> GcResult<PathBuf> {
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(|e| GcError::io(dir.display().to_string(), e))?;

    let echo = serde_json::to_string_pretty(cfg).map_err(|e| GcError::Config(e.to_string()))?;
    let cfg_path = dir.join("config.json");
    fs::write(&cfg_path, echo + "\n").map_err(|e| GcError::io(cfg_path.display().to_string(), e))?;

    let records: Vec<AuditRecord> = result.trajectory.iter().map(|s| s.audit.clone()).collect();
    write_timeseries(&records, &dir.join("timeseries.csv"))?;

    for snap in &result.trajectory {
        let idx = snap.state.step_index;
        let path = dir.join(format!("u_{idx:08}.txt"));
        write_snapshot(snap.state.u.field(), &path)?;
        if cfg.emit_images {
            write_pgm(snap.state.u.field(), &dir.join(format!("u_{idx:08}.pgm")))?;
            write_pgm(
                &snap.state.curvature,
                &dir.join(format!("curvature_{idx:08}.pgm")),
            )?;
        }
    }

    let bound = 4.0 * std::f64::consts::PI * (result.e_f_initial + result.max_f.ln());
    let doc = ResultDoc {
        termination: result.termination,
        steps: result.steps,
        final_t: result.final_t,
        final_calabi: result.final_calabi,
        final_alpha: result.final_alpha,
        concentration: result.concentration.as_ref(),
        e_f_initial: result.e_f_initial,
        max_f: result.max_f,
        calabi_time_integral: result.calabi_time_integral,
        calabi_integral_bound: bound,
        max_ef_step_increase: result.max_ef_step_increase,
        min_alpha_lower_margin: result.min_alpha_lower_margin,
        min_alpha_upper_margin: result.min_alpha_upper_margin,
        printed_alpha_bound_held: result.printed_alpha_bound_held,
    };
    let json =
        serde_json::to_string_pretty(&doc).map_err(|e| GcError::Config(e.to_string()))?;
    let result_path = dir.join("result.json");
    fs::write(&result_path, json + "\n")
        .map_err(|e| GcError::io(result_path.display().to_string(), e))?;
    Ok(dir.clone())
}

/// Convenience writer used by tests: like `write_run_outputs` but into an
/// explicit directory.
pub fn write_run_outputs_to(cfg: &RunConfig, result: &RunResult, dir: &Path) -> GcResult<PathBuf> {
    let mut cfg = cfg.clone();
    cfg.out_dir = dir.to_path_buf();
    write_run_outputs(&cfg, result)
}

pub fn write_report_json<T: Serialize>(value: &T, path: &Path) -> GcResult<()> {
    let json = serde_json::to_string_pretty(value).map_err(|e| GcError::Config(e.to_string()))?;
    let mut file =
        fs::File::create(path).map_err(|e| GcError::io(path.display().to_string(), e))?;
    writeln!(file, "{json}").map_err(|e| GcError::io(path.display().to_string(), e))
}
