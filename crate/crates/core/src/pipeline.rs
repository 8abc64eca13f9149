//! The online-learning step loop: encoder, spatial pooler, parallel
//! reflex/sequence inference, control-unit arbitration, emission, and
//! training updates.
//!
//! Three modes share the loop. `Htm` runs the sequence memory alone.
//! `Ahtm` adds the reflex memory as a software table; `HAhtm` maps it onto
//! the CAM simulator, which also accumulates the latency and energy
//! ledger. Both accelerated modes emit identical prediction sequences; only
//! the cost model differs.
//!
//! Per step, both memories see the same pooled input and neither sees the
//! other's output; execution is sequential for determinism. The previous
//! step's predictions are scored against the arrived input, the four
//! training cases dispatch memory updates, and the control unit's windowed
//! choice picks the emitted prediction for the next step.

use crate::cam::{CamBackedRm, CamError, CamGeometry, CostLedger};
use crate::cu::{apply_training_rules, Choice, CuConfig, CuError, CuState, MemoryAction};
use crate::encoder::{encode, EncodeError, ScalarEncoderConfig};
use crate::metrics::{
    ars, classification_metrics, is_match, ArsRecord, ClassificationReport, MetricsError,
    MetricsSummary,
};
use crate::rm::{ReflexBackend, ReflexTable, RmStats};
use crate::sdr::{Sdr, SdrError};
use crate::sm::{SmConfig, TemporalNetwork};
use crate::sp::{PermanenceMatrix, SpConfig};
use serde::{Deserialize, Serialize};
use std::str::FromStr;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Sdr(#[from] SdrError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Cu(#[from] CuError),
    #[error(transparent)]
    Cam(#[from] CamError),
    #[error("empty value stream")]
    EmptyStream,
}

/// Which memories run and how the reflex memory is backed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Htm,
    Ahtm,
    HAhtm,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Htm => "HTM",
            Mode::Ahtm => "AHTM",
            Mode::HAhtm => "H-AHTM",
        }
    }

    pub const ALL: [Mode; 3] = [Mode::Htm, Mode::Ahtm, Mode::HAhtm];
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().replace('_', "-").as_str() {
            "HTM" => Ok(Mode::Htm),
            "AHTM" => Ok(Mode::Ahtm),
            "H-AHTM" | "HAHTM" => Ok(Mode::HAhtm),
            other => Err(format!("unknown mode {other:?} (expected HTM, AHTM, or H-AHTM)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub encoder: ScalarEncoderConfig,
    pub sp: SpConfig,
    pub sm: SmConfig,
    pub rm_capacity: usize,
    pub cu: CuConfig,
    pub cam: CamGeometry,
    pub learning: bool,
    /// Repeats for timing benchmarks.
    pub repeat_count: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Ahtm,
            encoder: ScalarEncoderConfig {
                min_value: 0.0,
                max_value: 100.0,
                ..ScalarEncoderConfig::default()
            },
            sp: SpConfig::default(),
            sm: SmConfig::default(),
            rm_capacity: 2048,
            cu: CuConfig::default(),
            cam: CamGeometry::default(),
            learning: true,
            repeat_count: 1,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.encoder
            .validate()
            .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        self.sp.validate().map_err(PipelineError::InvalidConfig)?;
        self.sm.validate().map_err(PipelineError::InvalidConfig)?;
        self.cu.validate().map_err(PipelineError::InvalidConfig)?;
        if self.encoder.width != 0 && self.sp.columns == 0 {
            return Err(PipelineError::InvalidConfig("sp.columns must be positive".into()));
        }
        if self.rm_capacity == 0 {
            return Err(PipelineError::InvalidConfig("rm.capacity must be positive".into()));
        }
        if self.repeat_count == 0 {
            return Err(PipelineError::InvalidConfig("repeat count must be >= 1".into()));
        }
        if self.mode == Mode::HAhtm {
            self.cam.validate()?;
            if self.cam.word_width() != self.sp.columns {
                return Err(PipelineError::InvalidConfig(format!(
                    "cam word width {} must equal sp.columns {} in H-AHTM mode",
                    self.cam.word_width(),
                    self.sp.columns
                )));
            }
            if self.cam.total_rows() != self.rm_capacity {
                return Err(PipelineError::InvalidConfig(format!(
                    "cam rows {} must equal rm.capacity {} in H-AHTM mode",
                    self.cam.total_rows(),
                    self.rm_capacity
                )));
            }
        }
        Ok(())
    }
}

/// Reflex-memory backing for the accelerated modes.
enum RmBackend {
    Software(ReflexTable),
    Cam(Box<CamBackedRm>),
}

impl RmBackend {
    fn as_backend(&mut self) -> &mut dyn ReflexBackend {
        match self {
            RmBackend::Software(t) => t,
            RmBackend::Cam(c) => c.as_mut(),
        }
    }

    fn ledger(&self) -> Option<CostLedger> {
        match self {
            RmBackend::Software(_) => None,
            RmBackend::Cam(c) => Some(*c.ledger()),
        }
    }

    fn stats(&self) -> RmStats {
        match self {
            RmBackend::Software(t) => t.stats(),
            RmBackend::Cam(c) => c.stats(),
        }
    }
}

/// Everything one step produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    pub raw_input: f64,
    pub encoded: Sdr,
    pub pooled: Sdr,
    pub rm_prediction: Option<Sdr>,
    /// `None` when the sequence memory was skipped this step.
    pub sm_prediction: Option<Sdr>,
    pub emitted: Sdr,
    pub chosen: Choice,
    /// Scores of the previous step's predictions against this input;
    /// absent on the first step.
    pub ars: Option<ArsRecord>,
    pub sm_ran: bool,
    pub duration_ms: f64,
}

pub struct Pipeline {
    cfg: PipelineConfig,
    sp: PermanenceMatrix,
    sm: TemporalNetwork,
    rm: Option<RmBackend>,
    cu: CuState,
    step: usize,
    rm_served: usize,
    prev_pooled: Option<Sdr>,
    rm_pred_for_current: Option<Sdr>,
    sm_pred_for_current: Option<Sdr>,
    emitted_for_current: Option<Sdr>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let sp = PermanenceMatrix::init(&cfg.sp, cfg.encoder.width);
        let sm = TemporalNetwork::new(cfg.sp.columns, cfg.sm.clone());
        let rm = match cfg.mode {
            Mode::Htm => None,
            Mode::Ahtm => Some(RmBackend::Software(ReflexTable::with_saturation(
                cfg.rm_capacity,
                cfg.cam.confidence_max(),
            ))),
            Mode::HAhtm => Some(RmBackend::Cam(Box::new(CamBackedRm::new(cfg.cam)?))),
        };
        let cu = CuState::new(cfg.cu.window);
        Ok(Self {
            cfg,
            sp,
            sm,
            rm,
            cu,
            step: 0,
            rm_served: 0,
            prev_pooled: None,
            rm_pred_for_current: None,
            sm_pred_for_current: None,
            emitted_for_current: None,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn ledger(&self) -> Option<CostLedger> {
        self.rm.as_ref().and_then(|rm| rm.ledger())
    }

    pub fn rm_stats(&self) -> Option<RmStats> {
        self.rm.as_ref().map(|rm| rm.stats())
    }

    /// Fraction of completed steps served by the reflex memory.
    pub fn rm_served_fraction(&self) -> f64 {
        if self.step == 0 {
            0.0
        } else {
            self.rm_served as f64 / self.step as f64
        }
    }

    /// Versioned dump of the learned state for persistence.
    pub fn snapshot_json(&self) -> serde_json::Value {
        serde_json::json!({
            "version": 1,
            "mode": self.cfg.mode.as_str(),
            "step": self.step,
            "sp": self.sp,
            "sm": self.sm,
            "rm": match &self.rm {
                Some(RmBackend::Software(t)) => serde_json::Value::String(t.dump_jsonl()),
                Some(RmBackend::Cam(c)) => serde_json::Value::String(c.table().dump_jsonl()),
                None => serde_json::Value::Null,
            },
        })
    }

    /// Runs one input through the pipeline.
    pub fn step(&mut self, x: f64) -> Result<StepTrace, PipelineError> {
        let started = Instant::now();
        let learning = self.cfg.learning;
        let encoded = encode(&self.cfg.encoder, x)?;
        let pooled = self.sp.pool_step(&self.cfg.sp, &encoded, learning)?;

        // Score the predictions made last step against the arrived input,
        // record them, and dispatch the training cases.
        let mut ars_record = None;
        let mut sm_factor = 1.0;
        if let Some(prev_pooled) = self.prev_pooled.take() {
            let rm_pred = self.rm_pred_for_current.take();
            let sm_pred = self.sm_pred_for_current.take();
            let emitted_prev = self.emitted_for_current.take().expect("emitted every step");

            let ars_rm = match &rm_pred {
                Some(p) => ars(p, &pooled)?,
                None => 1.0,
            };
            let ars_sm = match &sm_pred {
                Some(p) => ars(p, &pooled)?,
                None => 1.0,
            };
            let ars_emitted = if emitted_prev.is_empty() {
                1.0
            } else {
                ars(&emitted_prev, &pooled)?
            };
            let matched = !emitted_prev.is_empty() && is_match(&emitted_prev, &pooled)?;
            ars_record = Some(ArsRecord {
                step: self.step,
                ars_rm,
                ars_sm,
                ars_emitted,
                matched,
            });

            if self.cfg.mode != Mode::Htm {
                match &sm_pred {
                    Some(_) => self.cu.record_outcome(ars_rm, ars_sm)?,
                    None => self.cu.record_rm_only(ars_rm)?,
                }

                if learning {
                    let rm = self.rm.as_mut().expect("accelerated modes carry a reflex memory");
                    let rm = rm.as_backend();
                    if self.cfg.cu.pin.is_some() {
                        // Pinned diagnostics: first-order learning only.
                        rm.observe(&prev_pooled, &pooled);
                    } else {
                        let rm_correct =
                            rm_pred.as_ref().map(|p| is_match(p, &pooled)).transpose()?.unwrap_or(false);
                        let sm_correct =
                            sm_pred.as_ref().map(|p| is_match(p, &pooled)).transpose()?.unwrap_or(false);
                        for action in apply_training_rules(rm_correct, sm_correct) {
                            match action {
                                MemoryAction::UpdateBoth => {
                                    rm.observe(&prev_pooled, &pooled);
                                    if let Some(wrong) = &rm_pred {
                                        rm.decrement(&prev_pooled, wrong);
                                    }
                                }
                                MemoryAction::RmDecrement => {
                                    if let Some(wrong) = &rm_pred {
                                        rm.decrement(&prev_pooled, wrong);
                                    }
                                }
                                MemoryAction::RmRetrainFromSm => {
                                    let answer =
                                        sm_pred.as_ref().expect("sm was correct, so it predicted");
                                    rm.retrain(&prev_pooled, answer);
                                }
                                MemoryAction::SmLearnRegular => sm_factor = 1.0,
                                MemoryAction::SmLearnBoosted => sm_factor = self.cfg.cu.boost_factor,
                                MemoryAction::EmitRm | MemoryAction::EmitSm => {}
                            }
                        }
                        // The base first-order loop: correct reflex
                        // predictions still record the observed transition.
                        if rm_correct {
                            rm.observe(&prev_pooled, &pooled);
                        }
                    }
                }
            }
        }

        // Inference for the next step.
        let rm_prediction = match (&mut self.rm, self.cfg.mode) {
            (Some(rm), _) => rm.as_backend().lookup_predict(&pooled),
            (None, _) => None,
        };

        let chosen = match (self.cfg.mode, self.cfg.cu.pin) {
            (Mode::Htm, _) => Choice::Sm,
            (_, Some(pin)) => pin,
            (_, None) => self.cu.choose(),
        };
        if chosen == Choice::Rm {
            self.rm_served += 1;
        }

        let skip_sm = self.cfg.mode != Mode::Htm
            && self.cfg.cu.skip_sm_when_rm_confident
            && chosen == Choice::Rm
            && rm_prediction.is_some();
        let sm_prediction = if skip_sm {
            None
        } else {
            let out = self.sm.sm_step_with(&pooled, learning, sm_factor);
            Some(out.predicted_columns)
        };

        let emitted = match chosen {
            Choice::Rm => rm_prediction.clone().unwrap_or_else(|| Sdr::empty(self.cfg.sp.columns)),
            Choice::Sm => sm_prediction.clone().unwrap_or_else(|| Sdr::empty(self.cfg.sp.columns)),
        };

        let trace = StepTrace {
            step: self.step,
            raw_input: x,
            encoded,
            pooled: pooled.clone(),
            rm_prediction: rm_prediction.clone(),
            sm_prediction: sm_prediction.clone(),
            emitted: emitted.clone(),
            chosen,
            ars: ars_record,
            sm_ran: !skip_sm,
            duration_ms: started.elapsed().as_secs_f64() * 1e3,
        };

        self.prev_pooled = Some(pooled);
        self.rm_pred_for_current = rm_prediction;
        self.sm_pred_for_current = sm_prediction;
        self.emitted_for_current = Some(emitted);
        self.step += 1;
        Ok(trace)
    }
}

/// Full result of one pass over a stream.
pub struct RunResult {
    pub traces: Vec<StepTrace>,
    pub records: Vec<ArsRecord>,
    pub summary: MetricsSummary,
    pub report: Option<ClassificationReport>,
    pub ledger: Option<CostLedger>,
    pub rm_stats: Option<RmStats>,
}

/// Drives `step` over the whole stream without ever resetting learned
/// state. `labels`, when given, are per-step ground-truth anomaly flags
/// used for classification metrics.
pub fn run_stream(
    cfg: &PipelineConfig,
    values: &[f64],
    labels: Option<&[bool]>,
) -> Result<RunResult, PipelineError> {
    if values.is_empty() {
        return Err(PipelineError::EmptyStream);
    }
    let mut pipeline = Pipeline::new(cfg.clone())?;
    let mut traces = Vec::with_capacity(values.len());
    for &x in values {
        traces.push(pipeline.step(x)?);
    }
    let result = summarize(&pipeline, traces, labels);
    Ok(result)
}

fn summarize(pipeline: &Pipeline, traces: Vec<StepTrace>, labels: Option<&[bool]>) -> RunResult {
    let records: Vec<ArsRecord> = traces.iter().filter_map(|t| t.ars.clone()).collect();
    let match_rate = if records.is_empty() {
        0.0
    } else {
        records.iter().filter(|r| r.matched).count() as f64 / records.len() as f64
    };
    let mean_step_time_ms =
        traces.iter().map(|t| t.duration_ms).sum::<f64>() / traces.len().max(1) as f64;

    let report = labels.map(|labels| {
        let aligned: Vec<bool> = records.iter().map(|r| labels[r.step]).collect();
        classification_metrics(&records, &aligned)
    });

    let summary = MetricsSummary {
        precision: report.as_ref().and_then(|r| r.precision),
        recall: report.as_ref().and_then(|r| r.recall),
        f1: report.as_ref().and_then(|r| r.f1),
        roc_auc: report.as_ref().and_then(|r| r.roc_auc),
        match_rate,
        rm_hit_fraction: pipeline.rm_served_fraction(),
        mean_step_time_ms,
    };

    RunResult {
        traces,
        records,
        summary,
        report,
        ledger: pipeline.ledger(),
        rm_stats: pipeline.rm_stats(),
    }
}

/// Timing protocol: the stream is processed `repeat_count` times on fresh
/// pipelines and per-step durations are pooled. Returns the last run's
/// result plus the pooled timing report.
pub fn run_repeated(
    cfg: &PipelineConfig,
    values: &[f64],
    labels: Option<&[bool]>,
) -> Result<(RunResult, crate::metrics::TimingStats), PipelineError> {
    let mut durations: Vec<Duration> = Vec::with_capacity(values.len() * cfg.repeat_count);
    let mut last = None;
    for _ in 0..cfg.repeat_count {
        let result = run_stream(cfg, values, labels)?;
        durations
            .extend(result.traces.iter().map(|t| Duration::from_secs_f64(t.duration_ms / 1e3)));
        last = Some(result);
    }
    let stats = crate::metrics::timing_stats(&durations, cfg.repeat_count)?;
    Ok((last.expect("repeat_count >= 1"), stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_stream, SynthKind};

    fn toy_config(mode: Mode) -> PipelineConfig {
        PipelineConfig {
            mode,
            encoder: ScalarEncoderConfig {
                width: 128,
                active_width: 8,
                min_value: 0.0,
                max_value: 100.0,
                clip_out_of_range: true,
            },
            sp: SpConfig { columns: 128, k: 6, seed: 3, ..SpConfig::default() },
            sm: SmConfig { cells_per_column: 8, activation_threshold: 3, ..SmConfig::default() },
            rm_capacity: 128,
            cu: CuConfig::default(),
            cam: CamGeometry {
                subarrays_per_array: 16,
                arrays_per_stage: 2,
                stages: 3,
                rows_per_subarray: 64,
                bits_per_row: 8,
            },
            learning: true,
            repeat_count: 1,
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = toy_config(Mode::HAhtm);
        assert!(cfg.validate().is_ok());
        cfg.sp.columns = 100;
        assert!(matches!(cfg.validate(), Err(PipelineError::InvalidConfig(_))));
        let mut cfg = toy_config(Mode::Ahtm);
        cfg.repeat_count = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("htm".parse::<Mode>().unwrap(), Mode::Htm);
        assert_eq!("AHTM".parse::<Mode>().unwrap(), Mode::Ahtm);
        assert_eq!("h-ahtm".parse::<Mode>().unwrap(), Mode::HAhtm);
        assert_eq!("H_AHTM".parse::<Mode>().unwrap(), Mode::HAhtm);
        assert!("xyz".parse::<Mode>().is_err());
    }

    #[test]
    fn cycle_converges_to_matching_predictions() {
        let cfg = toy_config(Mode::Ahtm);
        let stream = synth_stream(&SynthKind::Cycle { period: 3 }, 400, 1);
        let result = run_stream(&cfg, &stream.values, None).unwrap();
        for record in result.records.iter().filter(|r| r.step >= 100) {
            assert!(record.matched, "step {} should match", record.step);
        }
    }

    #[test]
    fn period_two_stream_is_rm_served_in_steady_state() {
        let cfg = toy_config(Mode::Ahtm);
        let stream = synth_stream(&SynthKind::Cycle { period: 2 }, 300, 1);
        let result = run_stream(&cfg, &stream.values, None).unwrap();
        // Steady state: pure first-order stream is served by the reflex
        // memory and skips the sequence memory.
        let tail = &result.traces[100..];
        assert!(tail.iter().all(|t| t.chosen == Choice::Rm));
        assert!(tail.iter().all(|t| !t.sm_ran));
        assert!(result.summary.rm_hit_fraction > 0.8);
    }

    // The reflex dump minus access bookkeeping (lookups refresh access
    // stamps even when learning is off).
    fn rm_content(snapshot: &serde_json::Value) -> Vec<serde_json::Value> {
        snapshot["rm"]
            .as_str()
            .unwrap()
            .lines()
            .skip(1)
            .map(|line| {
                let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
                v.as_object_mut().unwrap().remove("last_access");
                v
            })
            .collect()
    }

    #[test]
    fn learning_disabled_freezes_memory() {
        let mut cfg = toy_config(Mode::Ahtm);
        let stream = synth_stream(&SynthKind::Cycle { period: 3 }, 60, 1);
        cfg.learning = false;
        let mut frozen = Pipeline::new(cfg).unwrap();
        for &x in &stream.values[..30] {
            frozen.step(x).unwrap();
        }
        let before = frozen.snapshot_json();
        for &x in &stream.values[30..] {
            frozen.step(x).unwrap();
        }
        let after = frozen.snapshot_json();
        assert_eq!(before["sp"], after["sp"]);
        assert_eq!(before["sm"], after["sm"]);
        assert_eq!(rm_content(&before), rm_content(&after));
    }

    #[test]
    fn ahtm_and_hahtm_emit_identically() {
        let ahtm = toy_config(Mode::Ahtm);
        let hahtm = toy_config(Mode::HAhtm);
        let stream = synth_stream(&SynthKind::NoisyCycle { period: 4, noise_every: 11 }, 400, 9);
        let a = run_stream(&ahtm, &stream.values, None).unwrap();
        let h = run_stream(&hahtm, &stream.values, None).unwrap();
        let a_emitted: Vec<&Sdr> = a.traces.iter().map(|t| &t.emitted).collect();
        let h_emitted: Vec<&Sdr> = h.traces.iter().map(|t| &t.emitted).collect();
        assert_eq!(a_emitted, h_emitted);
        assert!(a.ledger.is_none());
        let ledger = h.ledger.expect("cam mode accumulates costs");
        assert!(ledger.search_ops > 0);
        assert!(ledger.latency_ns() > 0.0);
    }

    #[test]
    fn htm_equals_ahtm_pinned_to_sm() {
        let htm = toy_config(Mode::Htm);
        let mut pinned = toy_config(Mode::Ahtm);
        pinned.cu.pin = Some(Choice::Sm);
        let stream = synth_stream(&SynthKind::NoisyCycle { period: 3, noise_every: 9 }, 300, 4);
        let h = run_stream(&htm, &stream.values, None).unwrap();
        let p = run_stream(&pinned, &stream.values, None).unwrap();
        let h_emitted: Vec<&Sdr> = h.traces.iter().map(|t| &t.emitted).collect();
        let p_emitted: Vec<&Sdr> = p.traces.iter().map(|t| &t.emitted).collect();
        assert_eq!(h_emitted, p_emitted);
        assert_eq!(h.summary.rm_hit_fraction, 0.0);
    }

    #[test]
    fn one_emission_per_step_from_the_chosen_module() {
        let cfg = toy_config(Mode::Ahtm);
        let stream = synth_stream(&SynthKind::NoisyCycle { period: 4, noise_every: 7 }, 200, 2);
        let result = run_stream(&cfg, &stream.values, None).unwrap();
        for t in &result.traces {
            match t.chosen {
                Choice::Rm => {
                    let expected =
                        t.rm_prediction.clone().unwrap_or_else(|| Sdr::empty(128));
                    assert_eq!(t.emitted, expected);
                }
                Choice::Sm => {
                    let expected =
                        t.sm_prediction.clone().unwrap_or_else(|| Sdr::empty(128));
                    assert_eq!(t.emitted, expected);
                }
            }
        }
    }

    #[test]
    fn relearning_beats_first_exposure() {
        // S1 + S2 + S1: the second pass over S1 must match at least as
        // well as the first (no catastrophic forgetting).
        let mut cfg = toy_config(Mode::Ahtm);
        cfg.encoder.max_value = 200.0;
        let s1 = synth_stream(&SynthKind::Cycle { period: 8 }, 200, 1).values;
        let s2: Vec<f64> = synth_stream(&SynthKind::Cycle { period: 5 }, 200, 2)
            .values
            .iter()
            .map(|v| v + 100.0)
            .collect();
        let mut combined = s1.clone();
        combined.extend_from_slice(&s2);
        combined.extend_from_slice(&s1);
        let result = run_stream(&cfg, &combined, None).unwrap();
        let first_pass: Vec<&ArsRecord> =
            result.records.iter().filter(|r| r.step < 200).collect();
        let second_pass: Vec<&ArsRecord> =
            result.records.iter().filter(|r| r.step >= 400).collect();
        let rate = |rs: &[&ArsRecord]| {
            rs.iter().filter(|r| r.matched).count() as f64 / rs.len() as f64
        };
        assert!(
            rate(&second_pass) >= rate(&first_pass),
            "second pass {} < first pass {}",
            rate(&second_pass),
            rate(&first_pass)
        );
    }

    #[test]
    fn empty_stream_is_an_error() {
        let cfg = toy_config(Mode::Htm);
        assert!(matches!(run_stream(&cfg, &[], None), Err(PipelineError::EmptyStream)));
    }

    #[test]
    fn repeat_protocol_pools_timings() {
        let mut cfg = toy_config(Mode::Ahtm);
        cfg.repeat_count = 3;
        let stream = synth_stream(&SynthKind::Cycle { period: 2 }, 40, 1);
        let (_, stats) = run_repeated(&cfg, &stream.values, None).unwrap();
        assert_eq!(stats.repeats, 3);
        assert_eq!(stats.samples, 120);
    }
}
