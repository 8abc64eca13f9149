//! Control unit: arbitrates per step between the reflex memory and the
//! sequence memory, and dispatches the training actions for each
//! correctness case.
//!
//! The arbiter compares the sums of the last `window` anomaly scores from
//! both modules. The reflex memory is preferred by default (ties included)
//! for its speed; the control unit shifts reliance to the sequence memory
//! only while its accumulated score is strictly lower.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CuError {
    #[error("anomaly score {value} outside [0,1]")]
    ScoreOutOfRange { value: f64 },
}

/// Which module serves the emitted prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Choice {
    Rm,
    Sm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuConfig {
    /// Scores summed per module before comparing.
    pub window: usize,
    /// Multiplier on the sequence memory's potentiation step when both
    /// modules predicted correctly.
    pub boost_factor: f64,
    /// Skip sequence-memory inference and learning on steps served by the
    /// reflex memory. Speeds up redundant streams; the strict mode runs
    /// both modules on every step.
    pub skip_sm_when_rm_confident: bool,
    /// Diagnostic override: pin arbitration to one module and suppress the
    /// four-case training rules (regular learning only).
    pub pin: Option<Choice>,
}

impl Default for CuConfig {
    fn default() -> Self {
        Self {
            window: 4,
            boost_factor: 1.5,
            skip_sm_when_rm_confident: true,
            pin: None,
        }
    }
}

impl CuConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.window == 0 {
            return Err("cu.window must be >= 1".into());
        }
        if !(self.boost_factor > 0.0) {
            return Err("cu.boost_factor must be positive".into());
        }
        Ok(())
    }
}

/// Ring buffers of the last `window` anomaly scores per module. Cold
/// buffers count as zero-filled, so the reflex memory is chosen from the
/// first step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuState {
    window: usize,
    rm_scores: VecDeque<f64>,
    sm_scores: VecDeque<f64>,
}

impl CuState {
    pub fn new(window: usize) -> Self {
        assert!(window >= 1, "window must be >= 1");
        Self {
            window,
            rm_scores: VecDeque::with_capacity(window),
            sm_scores: VecDeque::with_capacity(window),
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn rm_sum(&self) -> f64 {
        self.rm_scores.iter().sum()
    }

    pub fn sm_sum(&self) -> f64 {
        self.sm_scores.iter().sum()
    }

    /// The reflex memory wins whenever its windowed sum is no worse.
    pub fn choose(&self) -> Choice {
        if self.rm_sum() <= self.sm_sum() {
            Choice::Rm
        } else {
            Choice::Sm
        }
    }

    /// Pushes one score pair, dropping entries older than the window.
    pub fn record_outcome(&mut self, rm_ars: f64, sm_ars: f64) -> Result<(), CuError> {
        check_score(rm_ars)?;
        check_score(sm_ars)?;
        push_bounded(&mut self.rm_scores, rm_ars, self.window);
        push_bounded(&mut self.sm_scores, sm_ars, self.window);
        Ok(())
    }

    /// Records only the reflex memory's score, for steps where the
    /// sequence memory was skipped and produced nothing to score. Its
    /// buffer keeps the last measured values.
    pub fn record_rm_only(&mut self, rm_ars: f64) -> Result<(), CuError> {
        check_score(rm_ars)?;
        push_bounded(&mut self.rm_scores, rm_ars, self.window);
        Ok(())
    }
}

fn check_score(value: f64) -> Result<(), CuError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(CuError::ScoreOutOfRange { value });
    }
    Ok(())
}

fn push_bounded(buf: &mut VecDeque<f64>, value: f64, window: usize) {
    buf.push_back(value);
    while buf.len() > window {
        buf.pop_front();
    }
}

/// Memory updates dispatched after judging both modules' predictions
/// against the arrived input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemoryAction {
    /// Serve the reflex memory's output.
    EmitRm,
    /// Serve the sequence memory's output, bypassing the reflex memory.
    EmitSm,
    /// Both modules update their predictions; the reflex memory's
    /// recurrence counts are adjusted toward the observed transition.
    UpdateBoth,
    /// Lower the count of the reflex memory's wrong prediction.
    RmDecrement,
    /// Retrain the reflex memory toward the sequence memory's answer.
    RmRetrainFromSm,
    /// Regular confidence update for the sequence memory.
    SmLearnRegular,
    /// Higher-confidence update for the sequence memory.
    SmLearnBoosted,
}

/// The four training cases, keyed by each module's correctness.
pub fn apply_training_rules(rm_correct: bool, sm_correct: bool) -> Vec<MemoryAction> {
    use MemoryAction::*;
    match (rm_correct, sm_correct) {
        (false, false) => vec![UpdateBoth],
        (false, true) => vec![EmitSm, RmDecrement, RmRetrainFromSm],
        (true, false) => vec![EmitRm, SmLearnRegular],
        (true, true) => vec![EmitRm, SmLearnBoosted],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use MemoryAction::*;

    #[test]
    fn arbitration_examples() {
        let mut cu = CuState::new(4);
        cu.record_outcome(0.6, 0.9).unwrap();
        cu.record_outcome(0.6, 0.6).unwrap(); // rm 1.2 vs sm 1.5
        assert_eq!(cu.rm_sum(), 1.2);
        assert_eq!(cu.sm_sum(), 1.5);
        assert_eq!(cu.choose(), Choice::Rm);

        let mut cu = CuState::new(4);
        cu.record_outcome(1.0, 0.5).unwrap();
        cu.record_outcome(1.0, 0.5).unwrap(); // rm 2.0 vs sm 1.0
        assert_eq!(cu.choose(), Choice::Sm);

        let mut cu = CuState::new(4);
        assert_eq!(cu.choose(), Choice::Rm, "cold buffers prefer the reflex memory");
        cu.record_outcome(0.5, 0.5).unwrap();
        assert_eq!(cu.choose(), Choice::Rm, "ties prefer the reflex memory");
    }

    #[test]
    fn ring_buffer_semantics() {
        let mut cu = CuState::new(3);
        cu.record_outcome(1.0, 0.0).unwrap();
        for _ in 0..3 {
            cu.record_outcome(0.0, 0.0).unwrap();
        }
        // The 1.0 fell out of the window.
        assert_eq!(cu.rm_sum(), 0.0);
        assert_eq!(cu.choose(), Choice::Rm);
    }

    #[test]
    fn repeated_zeroes_stay_rm() {
        let mut cu = CuState::new(4);
        for _ in 0..20 {
            cu.record_outcome(0.0, 0.0).unwrap();
            assert_eq!(cu.choose(), Choice::Rm);
        }
    }

    #[test]
    fn sustained_rm_failure_switches() {
        let mut cu = CuState::new(4);
        for _ in 0..4 {
            cu.record_outcome(1.0, 0.0).unwrap();
        }
        assert_eq!(cu.choose(), Choice::Sm);
    }

    #[test]
    fn rejects_out_of_range_scores() {
        let mut cu = CuState::new(4);
        assert!(matches!(
            cu.record_outcome(1.5, 0.0),
            Err(CuError::ScoreOutOfRange { .. })
        ));
        assert!(cu.record_outcome(0.0, -0.1).is_err());
        assert!(cu.record_rm_only(2.0).is_err());
    }

    #[test]
    fn training_rule_truth_table() {
        assert_eq!(apply_training_rules(false, false), vec![UpdateBoth]);
        assert_eq!(
            apply_training_rules(false, true),
            vec![EmitSm, RmDecrement, RmRetrainFromSm]
        );
        assert_eq!(apply_training_rules(true, false), vec![EmitRm, SmLearnRegular]);
        assert_eq!(apply_training_rules(true, true), vec![EmitRm, SmLearnBoosted]);
    }

    #[test]
    fn choice_is_pure_replay() {
        let scores: Vec<(f64, f64)> = (0..40)
            .map(|i| (((i * 7) % 11) as f64 / 10.0, ((i * 5) % 11) as f64 / 10.0))
            .collect();
        let run = |scores: &[(f64, f64)]| -> Vec<Choice> {
            let mut cu = CuState::new(4);
            scores
                .iter()
                .map(|&(r, s)| {
                    cu.record_outcome(r, s).unwrap();
                    cu.choose()
                })
                .collect()
        };
        assert_eq!(run(&scores), run(&scores));
    }

    #[test]
    fn pairwise_dominated_rm_always_chosen() {
        // If every rm score is <= its paired sm score, the choice is
        // always RM regardless of window.
        for window in [1, 2, 4, 8] {
            let mut cu = CuState::new(window);
            for i in 0..50 {
                let sm = ((i * 13) % 10) as f64 / 10.0;
                let rm = sm * 0.7;
                cu.record_outcome(rm, sm).unwrap();
                assert_eq!(cu.choose(), Choice::Rm);
            }
        }
    }

    #[test]
    fn rm_only_recording_keeps_sm_history() {
        let mut cu = CuState::new(2);
        cu.record_outcome(0.0, 0.4).unwrap();
        cu.record_outcome(0.0, 0.3).unwrap();
        cu.record_rm_only(1.0).unwrap();
        cu.record_rm_only(1.0).unwrap();
        // rm window now [1,1], sm window still [0.4,0.3].
        assert_eq!(cu.rm_sum(), 2.0);
        assert!((cu.sm_sum() - 0.7).abs() < 1e-12);
        assert_eq!(cu.choose(), Choice::Sm);
    }
}
