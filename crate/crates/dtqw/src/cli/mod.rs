//! The `phase-scan` command-line driver.

pub mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::Error;
use crate::protocol::{ProtocolSpec, Symbol, REGISTRY};
use crate::spectrum::{bloch, group_velocity_numeric, FD_STEP};
use crate::symmetry::{classify_on, generic_spec, golden_diff, SymmetryReport, DEFAULT_GRID};
use crate::topology::{
    chiral_axis, classify_boundary, critical_values, find_gap_closings, invariant, merge_critical, phase_boundary_trace,
    BoundaryClassification, GapPoint, GapStatus, InvariantResult,
};
use config::{eval_expr, Overrides, SweepConfig, SweepParam};

/// Version tag carried by every JSON artifact.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "phase-scan", version, about = "Band, invariant and symmetry sweeps for discrete-time quantum walks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quasi-energy and group velocity on a momentum grid (CSV).
    Bands(ScanArgs),
    /// Winding (1-d) or Chern (2-d) number along a sweep (CSV).
    Invariant(ScanArgs),
    /// Gap closings and boundary-state kinds along a sweep (JSON).
    ClassifyGaps(ScanArgs),
    /// Symmetry classification of registry protocols (JSON).
    Symmetry(SymmetryArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    /// TOML fixture with protocol, angles, steps, grid and sweep.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub protocol: Option<String>,
    /// Fixed angle; the value may be an expression in `pi` and the swept angle.
    #[arg(long = "set", value_name = "ANGLE=VALUE")]
    pub set: Vec<String>,
    /// Sweep an angle (or `T`) over COUNT evenly spaced values.
    #[arg(long, value_name = "SYMBOL:START:STOP:COUNT")]
    pub sweep: Option<String>,
    /// Step number(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub steps: Option<Vec<u32>>,
    /// Momentum points per axis.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Evaluate with step-independent coins (angles not scaled by T).
    #[arg(long)]
    pub step_independent: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SymmetryArgs {
    /// Protocol ids, or `all`.
    #[arg(required = true)]
    pub ids: Vec<String>,
    /// Compare against the bundled reference table; exit 3 on mismatch.
    #[arg(long)]
    pub golden: bool,
    /// Momentum points per axis.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Step number (default 3).
    #[arg(long)]
    pub steps: Option<u32>,
    /// Angle override for a single protocol.
    #[arg(long = "set", value_name = "ANGLE=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Failure of a command, with its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::UnknownProtocol { .. } | Error::Unsupported(_) | Error::Config(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Shortest round-trip decimal; exponent form outside [1e-5, 1e16).
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if (1e-5..1e16).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// One output artifact: file-name suffix (empty for the primary file) and body.
struct Artifact {
    suffix: String,
    body: String,
}

/// Runs a parsed command, writing to `--out` or to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> CliResult<()> {
    let workers = match &cli.command {
        Command::Bands(a) | Command::Invariant(a) | Command::ClassifyGaps(a) => a.workers,
        Command::Symmetry(a) => a.workers,
    };
    let pool = match workers {
        Some(0) => return Err(CliError::Usage("--workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    }
    .map_err(|e| CliError::Numeric(format!("cannot start worker pool: {e}")))?;
    let (artifacts, out, golden_failure) = pool.install(|| -> CliResult<_> {
        Ok(match &cli.command {
            Command::Bands(a) => (cmd_bands(&load(a)?)?, a.out.clone(), None),
            Command::Invariant(a) => (cmd_invariant(&load(a)?)?, a.out.clone(), None),
            Command::ClassifyGaps(a) => (vec![cmd_classify_gaps(&load(a)?)?], a.out.clone(), None),
            Command::Symmetry(a) => {
                let (art, fail) = cmd_symmetry(a)?;
                (vec![art], a.out.clone(), fail)
            }
        })
    })?;
    write_artifacts(&artifacts, out.as_deref(), stdout)?;
    match golden_failure {
        Some(msg) => Err(CliError::Numeric(msg)),
        None => Ok(()),
    }
}

fn load(a: &ScanArgs) -> CliResult<SweepConfig> {
    let ov = Overrides {
        protocol: a.protocol.clone(),
        set: a.set.clone(),
        sweep: a.sweep.clone(),
        steps: a.steps.clone(),
        grid: a.grid,
        step_independent: a.step_independent,
    };
    Ok(SweepConfig::load(a.config.as_deref(), &ov)?)
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    if suffix.is_empty() {
        return path.to_path_buf();
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}

fn write_artifacts(arts: &[Artifact], out: Option<&Path>, stdout: &mut dyn Write) -> CliResult<()> {
    let io = |e: std::io::Error| CliError::Numeric(format!("write failed: {e}"));
    match out {
        None => {
            if arts.len() > 1 {
                return Err(CliError::Usage("several step numbers with an angle sweep need --out".into()));
            }
            for a in arts {
                stdout.write_all(a.body.as_bytes()).map_err(io)?;
            }
        }
        Some(path) => {
            for a in arts {
                std::fs::write(suffixed(path, &a.suffix), &a.body).map_err(io)?;
            }
        }
    }
    Ok(())
}

/// (file suffix, rows of (sweep value, protocol, step)) per output file.
type Groups = Vec<(String, Vec<(f64, ProtocolSpec)>)>;

fn groups(cfg: &SweepConfig) -> CliResult<Groups> {
    match cfg.sweep.as_ref().map(|s| (s.param, &s.values)) {
        Some((SweepParam::Angle(_), values)) => cfg
            .steps
            .iter()
            .map(|&t| {
                let suffix = if cfg.steps.len() > 1 { format!("_T{t}") } else { String::new() };
                let rows = values.iter().map(|&v| Ok((v, cfg.spec_at(t, Some(v))?))).collect::<CliResult<Vec<_>>>()?;
                Ok((suffix, rows))
            })
            .collect(),
        _ => {
            let rows = cfg.steps.iter().map(|&t| Ok((f64::from(t), cfg.spec_at(t, None)?))).collect::<CliResult<Vec<_>>>()?;
            Ok(vec![(String::new(), rows)])
        }
    }
}

fn sweep_name(cfg: &SweepConfig) -> &'static str {
    cfg.sweep.as_ref().map(|s| s.param.name()).unwrap_or("T")
}

fn k_grid(dim: usize, n: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..n).map(|i| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / n as f64).collect();
    (0..n.pow(dim as u32))
        .map(|f| (0..dim).map(|a| axis[(f / n.pow((dim - 1 - a) as u32)) % n]).collect())
        .collect()
}

fn band_row(spec: &ProtocolSpec, k: &[f64]) -> crate::Result<(f64, Option<Vec<f64>>, &'static str)> {
    let b = bloch(spec, k)?;
    if b.is_gapless() {
        return Ok((b.e_plus(), None, "gapless"));
    }
    let mut v = Vec::with_capacity(k.len());
    for axis in 0..k.len() {
        match group_velocity_numeric(spec, k, axis, FD_STEP) {
            Ok(x) if x.is_finite() => v.push(x),
            Ok(_) | Err(Error::Gapless { .. }) => return Ok((b.e_plus(), None, "ill_defined_velocity")),
            Err(e) => return Err(e),
        }
    }
    Ok((b.e_plus(), Some(v), "gapped"))
}

fn cmd_bands(cfg: &SweepConfig) -> CliResult<Vec<Artifact>> {
    if !cfg.template.is_two_band() {
        return Err(CliError::Usage(format!("bands needs a two-band protocol; `{}` has four bands", cfg.template.id)));
    }
    let dim = cfg.template.dimension;
    let ks = k_grid(dim, cfg.grid);
    let mut header: Vec<String> = vec!["sweep_param".into()];
    header.extend((1..=dim).map(|i| format!("k{i}")));
    header.push("e_plus".into());
    header.extend((1..=dim).map(|i| format!("v_k{i}")));
    header.push("status".into());
    groups(cfg)?
        .into_iter()
        .map(|(suffix, rows)| {
            let jobs: Vec<(usize, usize)> = (0..rows.len()).flat_map(|r| (0..ks.len()).map(move |j| (r, j))).collect();
            let lines: Vec<String> = jobs
                .par_iter()
                .map(|&(r, j)| {
                    let (value, spec) = &rows[r];
                    let k = &ks[j];
                    let (e, v, status) = band_row(spec, k)?;
                    let mut f: Vec<String> = vec![fmt_f64(*value)];
                    f.extend(k.iter().map(|x| fmt_f64(*x)));
                    f.push(fmt_f64(e));
                    match v {
                        Some(v) => f.extend(v.iter().map(|x| fmt_f64(*x))),
                        None => f.extend(std::iter::repeat_n(String::new(), dim)),
                    }
                    f.push(status.into());
                    Ok(f.join(","))
                })
                .collect::<crate::Result<_>>()?;
            let mut body = header.join(",");
            body.push('\n');
            for l in lines {
                body.push_str(&l);
                body.push('\n');
            }
            Ok(Artifact { suffix, body })
        })
        .collect()
}

fn invariant_line(value: f64, inv: Option<InvariantResult>, gapless: bool) -> String {
    match (inv, gapless) {
        (Some(r), false) => format!("{},{},{},ok", fmt_f64(value), r.value, fmt_f64(r.raw)),
        _ => format!("{},,,boundary", fmt_f64(value)),
    }
}

fn check_invariant_support(spec: &ProtocolSpec) -> CliResult<()> {
    if !spec.is_two_band() || spec.dimension == 3 {
        return Err(CliError::Usage(format!(
            "invariants are computed for one- and two-dimensional two-band protocols, not `{}`",
            spec.id
        )));
    }
    if spec.dimension == 1 {
        chiral_axis(spec)?;
    }
    Ok(())
}

fn cmd_invariant(cfg: &SweepConfig) -> CliResult<Vec<Artifact>> {
    let header = "sweep_param,invariant,raw,status\n";
    let grid = cfg.grid;
    let mut out = Vec::new();
    for (suffix, rows) in groups(cfg)? {
        check_invariant_support(&rows[0].1)?;
        let lines: Vec<String> = match cfg.swept_angle() {
            Some(sym) => {
                let t = rows[0].1.steps;
                let values: Vec<f64> = rows.iter().map(|r| r.0).collect();
                let link = |_: &ProtocolSpec, _: Symbol, v: f64| cfg.spec_at(t, Some(v));
                phase_boundary_trace(&rows[0].1, sym, &values, grid, &link)?
                    .into_iter()
                    .map(|r| {
                        if r.status == GapStatus::Gapped && r.invariant.is_none() {
                            return Err(CliError::Usage(format!("no invariant at {} = {}", sym, r.value)));
                        }
                        Ok(invariant_line(r.value, r.invariant, r.status == GapStatus::Gapless))
                    })
                    .collect::<CliResult<_>>()?
            }
            None => rows
                .par_iter()
                .map(|(v, spec)| match invariant(spec, grid) {
                    Ok(Some(r)) => Ok(invariant_line(*v, Some(r), false)),
                    Ok(None) => Err(CliError::Usage(format!("no invariant for `{}`", spec.id))),
                    Err(Error::Gapless { .. }) => Ok(invariant_line(*v, None, true)),
                    Err(e) => Err(e.into()),
                })
                .collect::<CliResult<_>>()?,
        };
        let mut body = String::from(header);
        for l in lines {
            body.push_str(&l);
            body.push('\n');
        }
        out.push(Artifact { suffix, body });
    }
    Ok(out)
}

#[derive(Serialize)]
struct GapRecord {
    steps: u32,
    sweep_value: f64,
    critical: bool,
    gap_points: Vec<GapPoint>,
    classification: BoundaryClassification,
}

fn gap_record(spec: &ProtocolSpec, value: f64, critical: bool, grid: usize) -> crate::Result<Option<GapRecord>> {
    let pts = find_gap_closings(spec, grid)?;
    Ok(classify_boundary(spec, &pts)?.map(|classification| GapRecord {
        steps: spec.steps,
        sweep_value: value,
        critical,
        gap_points: pts,
        classification,
    }))
}

fn cmd_classify_gaps(cfg: &SweepConfig) -> CliResult<Artifact> {
    if !cfg.template.is_two_band() {
        return Err(CliError::Usage(format!("classify-gaps needs a two-band protocol; `{}` has four bands", cfg.template.id)));
    }
    let grid = cfg.grid;
    let mut records: Vec<GapRecord> = Vec::new();
    for (_, rows) in groups(cfg)? {
        let samples: Vec<(f64, bool, ProtocolSpec)> = match cfg.swept_angle() {
            Some(sym) => {
                let t = rows[0].1.steps;
                let values: Vec<f64> = rows.iter().map(|r| r.0).collect();
                let link = |_: &ProtocolSpec, _: Symbol, v: f64| cfg.spec_at(t, Some(v));
                let crit = critical_values(&rows[0].1, sym, &values, grid, &link)?;
                merge_critical(&values, &crit)
                    .into_iter()
                    .map(|(v, c)| Ok((v, c, cfg.spec_at(t, Some(v))?)))
                    .collect::<crate::Result<_>>()?
            }
            None => rows.into_iter().map(|(v, s)| (v, false, s)).collect(),
        };
        let recs: Vec<Option<GapRecord>> =
            samples.par_iter().map(|(v, c, s)| gap_record(s, *v, *c, grid)).collect::<crate::Result<_>>()?;
        records.extend(recs.into_iter().flatten());
    }
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "classify-gaps",
        "protocol": cfg.template.id,
        "sweep_param": sweep_name(cfg),
        "records": records,
    });
    Ok(Artifact { suffix: String::new(), body: to_json(&doc) })
}

fn to_json(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON value serializes");
    s.push('\n');
    s
}

fn cmd_symmetry(a: &SymmetryArgs) -> CliResult<(Artifact, Option<String>)> {
    let ids: Vec<String> = if a.ids.iter().any(|i| i == "all") {
        REGISTRY.iter().map(|s| s.to_string()).collect()
    } else {
        a.ids.clone()
    };
    if !a.set.is_empty() && ids.len() != 1 {
        return Err(CliError::Usage("--set needs exactly one protocol id".into()));
    }
    let grid = a.grid.unwrap_or(DEFAULT_GRID);
    if grid < 2 {
        return Err(CliError::Usage("grid must have at least 2 points per axis".into()));
    }
    let specs: Vec<ProtocolSpec> = ids
        .iter()
        .map(|id| {
            let mut s = generic_spec(id)?;
            if let Some(t) = a.steps {
                if t == 0 {
                    return Err(Error::Config("step number must be positive".into()));
                }
                s = s.with_steps(t);
            }
            for item in &a.set {
                let (name, value) = item
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("`--set {item}` is not ANGLE=VALUE")))?;
                s = s.with_angle(Symbol::parse(name.trim())?, eval_expr(value.trim(), &[])?)?;
            }
            Ok(s)
        })
        .collect::<crate::Result<_>>()?;
    let reports: Vec<SymmetryReport> = specs.iter().map(|s| classify_on(s, grid)).collect::<crate::Result<_>>()?;
    let failure = if a.golden {
        let diff = golden_diff(&reports);
        (!diff.is_empty()).then(|| {
            diff.iter()
                .map(|(got, want)| format!("mismatch: got {got:?}, reference {want:?}"))
                .collect::<Vec<_>>()
                .join("\n")
        })
    } else {
        None
    };
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "symmetry",
        "grid": grid,
        "records": reports,
    });
    Ok((Artifact { suffix: String::new(), body: to_json(&doc) }, failure))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -2.5, 1e-7, 123456789.125, std::f64::consts::PI, 1e20, -0.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), if v == 0.0 { 0.0 } else { v }, "{s}");
        }
        assert_eq!(fmt_f64(-0.0), "0");
        assert_eq!(fmt_f64(0.5), "0.5");
    }

    #[test]
    fn grid_is_lexicographic() {
        let g = k_grid(2, 3);
        assert_eq!(g.len(), 9);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn suffix_names() {
        assert_eq!(suffixed(Path::new("/a/fig1.csv"), "_T3"), PathBuf::from("/a/fig1_T3.csv"));
        assert_eq!(suffixed(Path::new("out"), "_T3"), PathBuf::from("out_T3"));
    }
}
