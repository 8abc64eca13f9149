//! Deterministic synthetic value streams for experiments and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Stream families. All are deterministic given a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SynthKind {
    /// Repeating ladder of `period` distinct levels.
    Cycle { period: usize },
    /// Cycle with a novel random value substituted every `noise_every`
    /// steps; the rest of the transitions stay first-order deterministic.
    NoisyCycle { period: usize, noise_every: usize },
    /// Bounded random walk.
    RandomWalk,
    /// Cycle with `anomaly_count` labeled out-of-band jumps at seeded
    /// positions, none earlier than `warmup` and no two adjacent.
    InjectedAnomaly { period: usize, anomaly_count: usize, warmup: usize },
    /// Cycle where every `perturb_every`-th value is shifted by a seeded
    /// random offset in `[delta/2, delta]`: the pattern stays close in
    /// encoder space but lands on a fresh exact representation each time.
    PerturbedCycle { period: usize, perturb_every: usize, delta: f64 },
}

/// Generated values plus per-step ground-truth anomaly labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthStream {
    pub values: Vec<f64>,
    pub labels: Vec<bool>,
}

/// Base levels spread across [10, 60]; anomalies jump into [80, 95].
fn cycle_level(slot: usize, period: usize) -> f64 {
    if period == 1 {
        return 35.0;
    }
    10.0 + 50.0 * slot as f64 / (period - 1) as f64
}

pub fn synth_stream(kind: &SynthKind, length: usize, seed: u64) -> SynthStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = vec![false; length];
    let values = match kind {
        SynthKind::Cycle { period } => {
            assert!(*period >= 1);
            (0..length).map(|i| cycle_level(i % period, *period)).collect()
        }
        SynthKind::NoisyCycle { period, noise_every } => {
            assert!(*period >= 1 && *noise_every >= 2);
            (0..length)
                .map(|i| {
                    if i > 0 && i % noise_every == 0 {
                        rng.random_range(62.0..78.0)
                    } else {
                        cycle_level(i % period, *period)
                    }
                })
                .collect()
        }
        SynthKind::RandomWalk => {
            let mut v = 50.0f64;
            (0..length)
                .map(|_| {
                    v = (v + rng.random_range(-2.0..2.0)).clamp(0.0, 100.0);
                    v
                })
                .collect()
        }
        SynthKind::PerturbedCycle { period, perturb_every, delta } => {
            assert!(*period >= 1 && *perturb_every >= 2);
            (0..length)
                .map(|i| {
                    let base = cycle_level(i % period, *period);
                    if i > 0 && i % perturb_every == 0 {
                        base + rng.random_range(delta * 0.5..=*delta)
                    } else {
                        base
                    }
                })
                .collect()
        }
        SynthKind::InjectedAnomaly { period, anomaly_count, warmup } => {
            assert!(*period >= 1);
            let mut values: Vec<f64> =
                (0..length).map(|i| cycle_level(i % period, *period)).collect();
            // Candidate slots on an every-other-step grid keep anomalies
            // non-adjacent.
            let candidates: Vec<usize> = (*warmup..length).step_by(2).collect();
            assert!(
                candidates.len() >= *anomaly_count,
                "stream too short for {anomaly_count} anomalies"
            );
            let picks = rand::seq::index::sample(&mut rng, candidates.len(), *anomaly_count);
            for pick in picks.iter() {
                let pos = candidates[pick];
                values[pos] = rng.random_range(80.0..130.0);
                labels[pos] = true;
            }
            values
        }
    };
    SynthStream { values, labels }
}
