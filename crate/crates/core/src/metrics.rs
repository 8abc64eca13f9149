//! Anomaly scoring and evaluation metrics.
//!
//! The anomaly raw score of a prediction is one minus the fraction of the
//! actual SDR's active bits it covered; a prediction "matches" when it
//! covers at least half of them. Classification metrics treat mismatch
//! events as detections and score them against ground-truth anomaly labels.

use crate::sdr::Sdr;
use serde::{Deserialize, Serialize};
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("sdr width mismatch: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },
    #[error("anomaly score undefined for an empty actual vector")]
    EmptyActual,
    #[error("timing stats need at least one sample")]
    NoSamples,
}

/// Anomaly raw score: `1 - nz(predicted ∩ actual) / nz(actual)`, in [0,1].
/// An empty prediction scores 1.0 (nothing covered).
pub fn ars(predicted: &Sdr, actual: &Sdr) -> Result<f64, MetricsError> {
    if predicted.width() != actual.width() {
        return Err(MetricsError::WidthMismatch {
            left: predicted.width(),
            right: actual.width(),
        });
    }
    if actual.is_empty() {
        return Err(MetricsError::EmptyActual);
    }
    let overlap = predicted.overlap_count(actual).expect("widths checked");
    Ok(1.0 - overlap as f64 / actual.active_count() as f64)
}

/// A prediction matches when it covers at least 50% of the actual active
/// bits. Evaluated on integer counts, so the boundary is exact:
/// `is_match <=> ars <= 0.5`.
pub fn is_match(predicted: &Sdr, actual: &Sdr) -> Result<bool, MetricsError> {
    if predicted.width() != actual.width() {
        return Err(MetricsError::WidthMismatch {
            left: predicted.width(),
            right: actual.width(),
        });
    }
    if actual.is_empty() {
        return Err(MetricsError::EmptyActual);
    }
    let overlap = predicted.overlap_count(actual).expect("widths checked");
    Ok(2 * overlap >= actual.active_count())
}

/// Per-step anomaly scores recorded by the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArsRecord {
    pub step: usize,
    pub ars_rm: f64,
    pub ars_sm: f64,
    pub ars_emitted: f64,
    /// Whether the emitted prediction matched the arrived input.
    pub matched: bool,
}

/// Precision/recall style summary of one run. `None` marks metrics whose
/// denominator was empty (e.g. recall with no positive labels).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub roc_auc: Option<f64>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

/// Scores detections (mismatch events) against ground-truth labels and
/// computes the ROC-AUC of the emitted anomaly scores.
///
/// `records` and `labels` are per-step; `labels[i]` is true when step `i`
/// is a ground-truth anomaly.
pub fn classification_metrics(records: &[ArsRecord], labels: &[bool]) -> ClassificationReport {
    assert_eq!(records.len(), labels.len(), "one label per record");
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (record, &label) in records.iter().zip(labels) {
        let detected = !record.matched;
        match (detected, label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let precision = (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64);
    let recall = (tp + fn_ > 0).then(|| tp as f64 / (tp + fn_) as f64);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    let scores: Vec<f64> = records.iter().map(|r| r.ars_emitted).collect();
    ClassificationReport {
        precision,
        recall,
        f1,
        roc_auc: roc_auc(&scores, labels),
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fn_,
    }
}

/// ROC-AUC by trapezoidal integration over score thresholds, ties grouped.
/// `None` when either class is absent.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len());
    let total_pos = labels.iter().filter(|&&l| l).count() as f64;
    let total_neg = labels.len() as f64 - total_pos;
    if total_pos == 0.0 || total_neg == 0.0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("scores are not NaN"));

    let (mut tp, mut fp) = (0.0f64, 0.0f64);
    let (mut prev_tp, mut prev_fp) = (0.0f64, 0.0f64);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        area += (fp - prev_fp) * (tp + prev_tp) / 2.0;
        prev_tp = tp;
        prev_fp = fp;
    }
    Some(area / (total_pos * total_neg))
}

/// Run-level summary combining detection quality, the self-supervised
/// match rate, and how often the reflex memory served the emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub roc_auc: Option<f64>,
    /// Fraction of scored steps whose emitted prediction matched.
    pub match_rate: f64,
    /// Fraction of steps served by the reflex memory.
    pub rm_hit_fraction: f64,
    pub mean_step_time_ms: f64,
}

/// Timing report over per-step durations, averaged across repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub total_ms: f64,
    pub samples: usize,
    pub repeats: usize,
}

pub fn timing_stats(durations: &[Duration], repeats: usize) -> Result<TimingStats, MetricsError> {
    if durations.is_empty() {
        return Err(MetricsError::NoSamples);
    }
    let mut ms: Vec<f64> = durations.iter().map(|d| d.as_secs_f64() * 1e3).collect();
    ms.sort_by(|a, b| a.partial_cmp(b).expect("durations are finite"));
    let total: f64 = ms.iter().sum();
    let rank = |q: f64| -> f64 {
        let idx = ((q * ms.len() as f64).ceil() as usize).clamp(1, ms.len());
        ms[idx - 1]
    };
    Ok(TimingStats {
        mean_ms: total / ms.len() as f64,
        p50_ms: rank(0.50),
        p95_ms: rank(0.95),
        total_ms: total,
        samples: ms.len(),
        repeats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sdr(bits: &[usize]) -> Sdr {
        Sdr::new(128, bits.iter().copied()).unwrap()
    }

    fn record(ars_emitted: f64, matched: bool) -> ArsRecord {
        ArsRecord { step: 0, ars_rm: 0.0, ars_sm: 0.0, ars_emitted, matched }
    }

    #[test]
    fn ars_examples() {
        let a = sdr(&[1, 2, 3, 4]);
        assert_eq!(ars(&a, &a).unwrap(), 0.0);
        assert_eq!(ars(&sdr(&[9, 10]), &a).unwrap(), 1.0);
        // Intersection 20 of 40 actual bits scores 0.5.
        let actual = Sdr::new(128, 0..40).unwrap();
        let predicted = Sdr::new(128, (0..20).chain(100..120)).unwrap();
        assert_eq!(ars(&predicted, &actual).unwrap(), 0.5);
        assert_eq!(ars(&Sdr::empty(128), &a).unwrap(), 1.0);
        assert!(matches!(ars(&a, &Sdr::empty(128)), Err(MetricsError::EmptyActual)));
        assert!(ars(&Sdr::empty(64), &a).is_err());
    }

    #[test]
    fn match_threshold() {
        let actual = Sdr::new(128, 0..10).unwrap();
        // 6 of 10 covered.
        assert!(is_match(&Sdr::new(128, 0..6).unwrap(), &actual).unwrap());
        // Exactly half.
        assert!(is_match(&Sdr::new(128, 0..5).unwrap(), &actual).unwrap());
        // 49 of 100.
        let wide_actual = Sdr::new(128, 0..100).unwrap();
        assert!(!is_match(&Sdr::new(128, 0..49).unwrap(), &wide_actual).unwrap());
    }

    #[test]
    fn perfect_and_inverted_auc() {
        let records = vec![record(0.9, false), record(0.1, true)];
        let report = classification_metrics(&records, &[true, false]);
        assert_eq!(report.roc_auc, Some(1.0));
        let inverted = classification_metrics(&records, &[false, true]);
        assert_eq!(inverted.roc_auc, Some(0.0));
    }

    #[test]
    fn degenerate_labels_are_marked_undefined() {
        // Everything matches and nothing is labeled anomalous: no
        // detections, no positives.
        let records = vec![record(0.0, true), record(0.0, true)];
        let report = classification_metrics(&records, &[false, false]);
        assert_eq!(report.false_positives, 0);
        assert_eq!(report.precision, None);
        assert_eq!(report.recall, None);
        assert_eq!(report.f1, None);
        assert_eq!(report.roc_auc, None);
    }

    #[test]
    fn counts_and_f1() {
        let records = vec![
            record(0.9, false), // detected, anomaly: TP
            record(0.8, false), // detected, normal: FP
            record(0.1, true),  // missed, anomaly: FN
            record(0.0, true),  // matched, normal: TN
        ];
        let labels = [true, false, true, false];
        let report = classification_metrics(&records, &labels);
        assert_eq!(
            (report.true_positives, report.false_positives, report.true_negatives, report.false_negatives),
            (1, 1, 1, 1)
        );
        assert_eq!(report.precision, Some(0.5));
        assert_eq!(report.recall, Some(0.5));
        assert_eq!(report.f1, Some(0.5));
    }

    #[test]
    fn random_scores_hover_near_half_auc() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let n = 20_000;
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_range(0..2) == 1).collect();
        let auc = roc_auc(&scores, &labels).unwrap();
        assert!((auc - 0.5).abs() < 0.05, "auc {auc}");
    }

    #[test]
    fn auc_handles_ties() {
        // All scores equal: AUC is exactly 0.5 by the trapezoid through
        // the single tie group.
        let scores = [0.3, 0.3, 0.3, 0.3];
        let labels = [true, false, true, false];
        assert_eq!(roc_auc(&scores, &labels), Some(0.5));
    }

    #[test]
    fn timing_basics() {
        let steps = vec![Duration::from_millis(2); 10];
        let stats = timing_stats(&steps, 10).unwrap();
        assert!((stats.mean_ms - 2.0).abs() < 1e-9);
        assert_eq!(stats.repeats, 10);
        assert_eq!(stats.samples, 10);
        assert!(timing_stats(&[], 1).is_err());
    }

    proptest! {
        #[test]
        fn ars_bounds_and_match_iff(
            p_bits in proptest::collection::vec(0usize..64, 0..30),
            a_bits in proptest::collection::vec(0usize..64, 1..30),
        ) {
            let predicted = Sdr::new(64, p_bits).unwrap();
            let actual = Sdr::new(64, a_bits).unwrap();
            let score = ars(&predicted, &actual).unwrap();
            prop_assert!((0.0..=1.0).contains(&score));
            prop_assert_eq!(is_match(&predicted, &actual).unwrap(), score <= 0.5);
        }

        #[test]
        fn ars_antimonotone_in_overlap(extra in 1usize..20) {
            let actual = Sdr::new(64, 0..40).unwrap();
            let small = Sdr::new(64, 0..10).unwrap();
            let large = Sdr::new(64, 0..(10 + extra).min(40)).unwrap();
            prop_assert!(ars(&large, &actual).unwrap() <= ars(&small, &actual).unwrap());
        }
    }
}
