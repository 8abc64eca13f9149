//! Report writers. Every CSV carries a `schema_version` column; metric
//! values are fixed-precision so reports are byte-reproducible under fixed
//! seeds (timing columns are measured and excluded from that guarantee).

use crate::{CliError, ModeOutcome};
use ahtm_core::pipeline::Mode;
use std::io::Write;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => "NA".to_string(),
    }
}

fn create(path: &Path) -> Result<std::fs::File, CliError> {
    std::fs::File::create(path)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("cannot write {}: {e}", path.display()))
}

/// One row per (dataset, mode): detection metrics plus the self-supervised
/// match rate and the reflex-served fraction.
pub fn write_metrics_csv(
    out: &Path,
    dataset: &str,
    outcomes: &[ModeOutcome],
) -> Result<(), CliError> {
    let path = out.join("metrics.csv");
    let mut f = create(&path)?;
    writeln!(
        f,
        "schema_version,dataset,mode,precision,recall,f1,roc_auc,match_rate,rm_fraction"
    )
    .map_err(io_err(&path))?;
    for outcome in outcomes {
        let s = &outcome.result.summary;
        writeln!(
            f,
            "{},{},{},{},{},{},{},{:.6},{:.6}",
            SCHEMA_VERSION,
            dataset,
            outcome.mode,
            fmt_opt(s.precision),
            fmt_opt(s.recall),
            fmt_opt(s.f1),
            fmt_opt(s.roc_auc),
            s.match_rate,
            s.rm_hit_fraction,
        )
        .map_err(io_err(&path))?;
    }
    Ok(())
}

/// One row per dataset with one wall-clock column per mode, plus the
/// deterministic simulated CAM latency for the hardware-backed mode.
pub fn write_timing_csv(
    out: &Path,
    dataset: &str,
    outcomes: &[ModeOutcome],
) -> Result<(), CliError> {
    let path = out.join("timing.csv");
    let mut f = create(&path)?;
    writeln!(
        f,
        "schema_version,dataset,HTM (ms),AHTM (ms),H-AHTM (ms),H-AHTM CAM latency (ns)"
    )
    .map_err(io_err(&path))?;
    let wall = |mode: Mode| -> String {
        outcomes
            .iter()
            .find(|o| o.mode == mode)
            .map(|o| format!("{:.3}", o.timing.total_ms / o.timing.repeats as f64))
            .unwrap_or_else(|| "NA".to_string())
    };
    let cam_latency = outcomes
        .iter()
        .find_map(|o| o.result.ledger.as_ref())
        .map(|l| format!("{:.2}", l.latency_ns()))
        .unwrap_or_else(|| "NA".to_string());
    writeln!(
        f,
        "{},{},{},{},{},{}",
        SCHEMA_VERSION,
        dataset,
        wall(Mode::Htm),
        wall(Mode::Ahtm),
        wall(Mode::HAhtm),
        cam_latency,
    )
    .map_err(io_err(&path))?;
    Ok(())
}

/// Per-operation counts and totals of the CAM cost ledger.
pub fn write_cam_ledger(out: &Path, outcomes: &[ModeOutcome]) -> Result<(), CliError> {
    for outcome in outcomes {
        if let Some(ledger) = &outcome.result.ledger {
            let path = out.join("cam_ledger.json");
            let mut value = ledger.to_json();
            value["schema"] = serde_json::json!(SCHEMA_VERSION);
            let mut f = create(&path)?;
            writeln!(f, "{}", serde_json::to_string_pretty(&value).expect("ledger serializes"))
                .map_err(io_err(&path))?;
        }
    }
    Ok(())
}

pub fn write_traces(out: &Path, outcomes: &[ModeOutcome]) -> Result<(), CliError> {
    for outcome in outcomes {
        let path = out.join(format!("trace_{}.jsonl", outcome.mode.as_str().to_lowercase()));
        let mut f = create(&path)?;
        for trace in &outcome.result.traces {
            writeln!(f, "{}", serde_json::to_string(trace).expect("trace serializes"))
                .map_err(io_err(&path))?;
        }
    }
    Ok(())
}

pub struct SweepRow {
    pub window: usize,
    pub accuracy_penalty: f64,
    pub speedup: f64,
    pub rm_fraction: f64,
}

pub fn write_sweep_csv(out: &Path, dataset: &str, rows: &[SweepRow]) -> Result<(), CliError> {
    let path = out.join("sweep.csv");
    let mut f = create(&path)?;
    writeln!(f, "schema_version,dataset,window,accuracy_penalty,speedup,rm_fraction")
        .map_err(io_err(&path))?;
    for row in rows {
        writeln!(
            f,
            "{},{},{},{:.6},{:.4},{:.6}",
            SCHEMA_VERSION, dataset, row.window, row.accuracy_penalty, row.speedup, row.rm_fraction
        )
        .map_err(io_err(&path))?;
    }
    Ok(())
}
