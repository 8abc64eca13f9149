//! Experiment runner for the sequence-prediction pipeline.
//!
//! Subcommands: `run` executes one dataset (or synthetic stream) across one
//! or more modes and writes metric, timing, and cost reports; `sweep-cu-window`
//! sweeps the control-unit window against an SM-only baseline; `selftest`
//! replays the oracle-equivalence suites.
//!
//! Exit codes: 0 success, 1 validation error, 2 I/O error, 3 selftest
//! failure.

mod report;
mod selftest;

use ahtm_core::config::ConfigMap;
use ahtm_core::pipeline::{run_repeated, Mode, PipelineConfig, RunResult};
use ahtm_core::synth::{synth_stream, SynthKind};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
    Selftest(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
            CliError::Selftest(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "validation error: {msg}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
            CliError::Selftest(msg) => write!(f, "selftest failure: {msg}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "ahtm", about = "Online sequence prediction and anomaly detection pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one dataset or synthetic stream across the requested modes.
    Run(RunArgs),
    /// Sweep the control-unit window against an SM-only baseline.
    SweepCuWindow(SweepArgs),
    /// Replay the oracle-equivalence and invariant suites.
    Selftest,
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    /// CSV dataset with a header row (columns `timestamp,value`).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Value column to read from the dataset.
    #[arg(long, default_value = "value")]
    column: String,
    /// Synthetic stream spec, e.g. `cycle:period=8`,
    /// `noisy-cycle:period=8,noise_every=25`, `random-walk`,
    /// `injected-anomaly:period=8,count=20,warmup=200`.
    #[arg(long)]
    synth: Option<String>,
    /// Length of the synthetic stream.
    #[arg(long, default_value_t = 2000)]
    length: usize,
    /// Flat key-value config file with dotted keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Timing repeats per run.
    #[arg(long)]
    repeat: Option<usize>,
    /// Output directory for reports.
    #[arg(long)]
    out: PathBuf,
    /// Stream generator seed (also the spatial pooler seed unless the
    /// config overrides it).
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Modes to run (repeatable). Defaults to all three.
    #[arg(long = "mode")]
    modes: Vec<String>,
    /// Also write per-step traces as JSON lines.
    #[arg(long, default_value_t = false)]
    trace: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Comma-separated control-unit windows, at least two.
    #[arg(long)]
    windows: String,
}

/// A named stream plus optional ground-truth anomaly labels.
struct Stream {
    name: String,
    values: Vec<f64>,
    labels: Option<Vec<bool>>,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::SweepCuWindow(args) => cmd_sweep(args),
        Command::Selftest => selftest::cmd_selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn parse_synth_spec(spec: &str) -> Result<SynthKind, CliError> {
    let (kind, params) = match spec.split_once(':') {
        Some((k, p)) => (k, p),
        None => (spec, ""),
    };
    let mut map = std::collections::BTreeMap::new();
    for piece in params.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = piece.split_once('=').ok_or_else(|| {
            CliError::Validation(format!("synth parameter {piece:?} is not key=value"))
        })?;
        let v: usize = v
            .parse()
            .map_err(|_| CliError::Validation(format!("synth parameter {k}={v} is not an integer")))?;
        map.insert(k.to_string(), v);
    }
    let get = |key: &str, default: usize| map.get(key).copied().unwrap_or(default);
    match kind {
        "cycle" => Ok(SynthKind::Cycle { period: get("period", 8) }),
        "noisy-cycle" => Ok(SynthKind::NoisyCycle {
            period: get("period", 8),
            noise_every: get("noise_every", 25),
        }),
        "random-walk" => Ok(SynthKind::RandomWalk),
        "injected-anomaly" => Ok(SynthKind::InjectedAnomaly {
            period: get("period", 8),
            anomaly_count: get("count", 20),
            warmup: get("warmup", 200),
        }),
        other => Err(CliError::Validation(format!("unknown synth kind {other:?}"))),
    }
}

fn load_dataset(path: &Path, column: &str) -> Result<Stream, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?
        .clone();
    let col = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| {
            CliError::Validation(format!(
                "column {column:?} not found in {} (have: {})",
                path.display(),
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })?;
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let field = record.get(col).unwrap_or("");
        let value: f64 = field.trim().parse().map_err(|_| {
            CliError::Validation(format!(
                "{} row {}: cannot parse {field:?} as a number",
                path.display(),
                i + 2
            ))
        })?;
        values.push(value);
    }
    if values.is_empty() {
        return Err(CliError::Validation(format!("{} holds no data rows", path.display())));
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    Ok(Stream { name, values, labels: None })
}

fn resolve_stream(args: &ExperimentArgs) -> Result<Stream, CliError> {
    match (&args.dataset, &args.synth) {
        (Some(path), None) => load_dataset(path, &args.column),
        (None, Some(spec)) => {
            let kind = parse_synth_spec(spec)?;
            let stream = synth_stream(&kind, args.length, args.seed);
            let has_labels = matches!(kind, SynthKind::InjectedAnomaly { .. });
            Ok(Stream {
                name: format!("synth-{}", spec.replace([':', ',', '='], "-")),
                values: stream.values,
                labels: has_labels.then_some(stream.labels),
            })
        }
        (Some(_), Some(_)) => {
            Err(CliError::Validation("--dataset and --synth are mutually exclusive".into()))
        }
        (None, None) => Err(CliError::Validation("one of --dataset or --synth is required".into())),
    }
}

/// Builds the pipeline config: defaults, then the config file, then CLI
/// overrides, then encoder range calibration from the data unless the
/// config pinned it.
fn build_config(args: &ExperimentArgs, values: &[f64]) -> Result<(PipelineConfig, ConfigMap), CliError> {
    let mut map = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
            ConfigMap::parse(&text).map_err(|e| CliError::Validation(e.to_string()))?
        }
        None => ConfigMap::default(),
    };
    if let Some(repeat) = args.repeat {
        map.set("pipeline.repeat", &repeat.to_string());
    }
    if map.get("sp.seed").is_none() {
        map.set("sp.seed", &args.seed.to_string());
    }

    let mut cfg = PipelineConfig::default();
    map.apply(&mut cfg).map_err(|e| CliError::Validation(e.to_string()))?;

    if map.get("encoder.min").is_none() && map.get("encoder.max").is_none() {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let margin = ((max - min) * 0.05).max(1e-6);
        cfg.encoder.min_value = min - margin;
        cfg.encoder.max_value = max + margin;
    }
    Ok((cfg, map))
}

fn validate_modes(modes: &[String]) -> Result<Vec<Mode>, CliError> {
    if modes.is_empty() {
        return Ok(Mode::ALL.to_vec());
    }
    let mut parsed = Vec::new();
    for m in modes {
        let mode: Mode = m.parse().map_err(CliError::Validation)?;
        if !parsed.contains(&mode) {
            parsed.push(mode);
        }
    }
    Ok(parsed)
}

struct ModeOutcome {
    mode: Mode,
    result: RunResult,
    timing: ahtm_core::metrics::TimingStats,
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let modes = validate_modes(&args.modes)?;
    let stream = resolve_stream(&args.experiment)?;
    let (base_cfg, _) = build_config(&args.experiment, &stream.values)?;

    let mut outcomes = Vec::new();
    for &mode in &modes {
        let mut cfg = base_cfg.clone();
        cfg.mode = mode;
        cfg.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        let (result, timing) = run_repeated(&cfg, &stream.values, stream.labels.as_deref())
            .map_err(|e| CliError::Validation(e.to_string()))?;
        eprintln!(
            "{} [{}]: match-rate {:.4}, rm-fraction {:.4}, total {:.1} ms",
            stream.name,
            mode,
            result.summary.match_rate,
            result.summary.rm_hit_fraction,
            timing.total_ms / timing.repeats as f64,
        );
        outcomes.push(ModeOutcome { mode, result, timing });
    }

    // All runs succeeded: now write reports.
    std::fs::create_dir_all(&args.experiment.out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", args.experiment.out.display())))?;
    report::write_metrics_csv(&args.experiment.out, &stream.name, &outcomes)?;
    report::write_timing_csv(&args.experiment.out, &stream.name, &outcomes)?;
    report::write_cam_ledger(&args.experiment.out, &outcomes)?;
    if args.trace {
        report::write_traces(&args.experiment.out, &outcomes)?;
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let windows: Vec<usize> = args
        .windows
        .split(',')
        .map(|w| {
            w.trim()
                .parse()
                .map_err(|_| CliError::Validation(format!("window {w:?} is not an integer")))
        })
        .collect::<Result<_, _>>()?;
    if windows.len() < 2 {
        return Err(CliError::Validation("need at least two window values".into()));
    }
    let stream = resolve_stream(&args.experiment)?;
    let (base_cfg, _) = build_config(&args.experiment, &stream.values)?;

    // SM-only baseline.
    let mut baseline_cfg = base_cfg.clone();
    baseline_cfg.mode = Mode::Htm;
    baseline_cfg.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    let (baseline, baseline_timing) =
        run_repeated(&baseline_cfg, &stream.values, stream.labels.as_deref())
            .map_err(|e| CliError::Validation(e.to_string()))?;
    let baseline_ms = baseline_timing.total_ms / baseline_timing.repeats as f64;

    let mut rows = Vec::new();
    for &window in &windows {
        let mut cfg = base_cfg.clone();
        cfg.mode = Mode::Ahtm;
        cfg.cu.window = window;
        cfg.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        let (result, timing) = run_repeated(&cfg, &stream.values, stream.labels.as_deref())
            .map_err(|e| CliError::Validation(e.to_string()))?;
        let run_ms = timing.total_ms / timing.repeats as f64;
        let row = report::SweepRow {
            window,
            accuracy_penalty: baseline.summary.match_rate - result.summary.match_rate,
            speedup: baseline_ms / run_ms,
            rm_fraction: result.summary.rm_hit_fraction,
        };
        eprintln!(
            "window {}: penalty {:.4}, speedup {:.2}x, rm-fraction {:.4}",
            row.window, row.accuracy_penalty, row.speedup, row.rm_fraction
        );
        rows.push(row);
    }

    std::fs::create_dir_all(&args.experiment.out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", args.experiment.out.display())))?;
    report::write_sweep_csv(&args.experiment.out, &stream.name, &rows)?;
    Ok(())
}
