//! Spatial pooler: turns encoder SDRs into fixed-sparsity column SDRs.
//!
//! Each column owns a random pool of potential synapses onto the input
//! space. A column's overlap score counts connected synapses (permanence at
//! or above the connect threshold) landing on active input bits; the top k
//! columns win, and Hebbian updates strengthen synapses onto active bits of
//! winning columns while weakening the rest.

use crate::sdr::{Sdr, SdrError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How a column's overlap score is computed. `ConnectedCount` counts
/// connected synapses onto active bits and yields integer scores;
/// `WeightedSum` sums raw permanences over active pool bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum OverlapScoring {
    #[default]
    ConnectedCount,
    WeightedSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpConfig {
    pub columns: usize,
    /// Winner count for kWTA selection.
    pub k: usize,
    /// Hebbian learning rate.
    pub alpha: f64,
    pub connect_threshold: f64,
    /// Fraction of the input bits each column may synapse onto.
    pub pool_fraction: f64,
    pub seed: u64,
    pub scoring: OverlapScoring,
}

impl Default for SpConfig {
    fn default() -> Self {
        Self {
            columns: 1024,
            k: 20,
            alpha: 0.05,
            connect_threshold: 0.2,
            pool_fraction: 0.5,
            seed: 1,
            scoring: OverlapScoring::ConnectedCount,
        }
    }
}

impl SpConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.columns == 0 {
            return Err("sp.columns must be positive".into());
        }
        if self.k == 0 || self.k > self.columns {
            return Err(format!("sp.k {} must be in [1, {}]", self.k, self.columns));
        }
        if !(self.alpha > 0.0) {
            return Err("sp.alpha must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.connect_threshold) {
            return Err("sp.connect_threshold must be in [0,1]".into());
        }
        if !(self.pool_fraction > 0.0 && self.pool_fraction <= 1.0) {
            return Err("sp.pool_fraction must be in (0,1]".into());
        }
        Ok(())
    }
}

/// Dense column-by-input permanence state plus the fixed potential pools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermanenceMatrix {
    version: u32,
    columns: usize,
    input_width: usize,
    connect_threshold: f64,
    /// Sorted input-bit indices per column; fixed after init.
    pools: Vec<Vec<usize>>,
    /// Permanence per pooled synapse, aligned with `pools`.
    perms: Vec<Vec<f64>>,
    /// Input bit -> (column, synapse slot) touching it.
    #[serde(skip)]
    bit_index: Vec<Vec<(u32, u32)>>,
    /// Per column, one bit per input position: pooled and connected.
    #[serde(skip)]
    connected: Vec<Vec<u64>>,
}

fn mask_words(bits: usize) -> usize {
    bits.div_ceil(64)
}

impl PermanenceMatrix {
    /// Random pools (size `round(pool_fraction * input_width)`) and uniform
    /// permanences in [0,1], fully reproducible from `cfg.seed`.
    pub fn init(cfg: &SpConfig, input_width: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let pool_size = ((cfg.pool_fraction * input_width as f64).round() as usize)
            .clamp(1, input_width);
        let mut pools = Vec::with_capacity(cfg.columns);
        let mut perms = Vec::with_capacity(cfg.columns);
        for _ in 0..cfg.columns {
            let mut pool = rand::seq::index::sample(&mut rng, input_width, pool_size).into_vec();
            pool.sort_unstable();
            let perm: Vec<f64> = (0..pool_size)
                .map(|_| rand::Rng::random_range(&mut rng, 0.0..=1.0))
                .collect();
            pools.push(pool);
            perms.push(perm);
        }
        let mut m = Self {
            version: 1,
            columns: cfg.columns,
            input_width,
            connect_threshold: cfg.connect_threshold,
            pools,
            perms,
            bit_index: Vec::new(),
            connected: Vec::new(),
        };
        m.rebuild_caches();
        m
    }

    /// Builds a matrix from explicit pools and permanences, for fixtures
    /// and restored snapshots. Pools must be sorted and in range; each
    /// pool's permanence list must have the same length.
    pub fn from_parts(
        input_width: usize,
        connect_threshold: f64,
        pools: Vec<Vec<usize>>,
        perms: Vec<Vec<f64>>,
    ) -> Self {
        assert_eq!(pools.len(), perms.len());
        for (pool, perm) in pools.iter().zip(&perms) {
            assert_eq!(pool.len(), perm.len());
            assert!(pool.windows(2).all(|w| w[0] < w[1]));
            assert!(pool.last().is_none_or(|&b| b < input_width));
        }
        let mut m = Self {
            version: 1,
            columns: pools.len(),
            input_width,
            connect_threshold,
            pools,
            perms,
            bit_index: Vec::new(),
            connected: Vec::new(),
        };
        m.rebuild_caches();
        m
    }

    /// Rebuilds the derived lookup structures; required after deserializing.
    pub fn rebuild_caches(&mut self) {
        let words = mask_words(self.input_width);
        self.bit_index = vec![Vec::new(); self.input_width];
        self.connected = vec![vec![0u64; words]; self.columns];
        for (col, pool) in self.pools.iter().enumerate() {
            for (slot, &bit) in pool.iter().enumerate() {
                self.bit_index[bit].push((col as u32, slot as u32));
                if self.perms[col][slot] >= self.connect_threshold {
                    self.connected[col][bit / 64] |= 1 << (bit % 64);
                }
            }
        }
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn pool(&self, column: usize) -> &[usize] {
        &self.pools[column]
    }

    pub fn permanences(&self, column: usize) -> &[f64] {
        &self.perms[column]
    }

    fn check_input(&self, e: &Sdr) -> Result<(), SdrError> {
        if e.width() != self.input_width {
            return Err(SdrError::WidthMismatch {
                left: e.width(),
                right: self.input_width,
            });
        }
        Ok(())
    }

    /// Connected-synapse overlap count per column.
    pub fn overlap_scores(&self, e: &Sdr) -> Result<Vec<u32>, SdrError> {
        self.check_input(e)?;
        let words = mask_words(self.input_width);
        let mut active_mask = vec![0u64; words];
        for &bit in e.active() {
            active_mask[bit / 64] |= 1 << (bit % 64);
        }
        Ok(self
            .connected
            .iter()
            .map(|mask| {
                mask.iter()
                    .zip(&active_mask)
                    .map(|(a, b)| (a & b).count_ones())
                    .sum()
            })
            .collect())
    }

    /// Raw permanence-weighted overlap per column (no connect threshold).
    pub fn weighted_overlap_scores(&self, e: &Sdr) -> Result<Vec<f64>, SdrError> {
        self.check_input(e)?;
        let mut scores = vec![0.0; self.columns];
        for &bit in e.active() {
            for &(col, slot) in &self.bit_index[bit] {
                scores[col as usize] += self.perms[col as usize][slot as usize];
            }
        }
        Ok(scores)
    }

    /// Hebbian update: for every pooled pair touching an active input bit,
    /// permanence moves by `alpha * (2*S_j - 1)`, clamped to [0,1]. Bits
    /// outside the pool and inactive bits are untouched.
    pub fn learn(&mut self, e: &Sdr, winners: &Sdr, alpha: f64) -> Result<(), SdrError> {
        self.check_input(e)?;
        for &bit in e.active() {
            for &(col, slot) in &self.bit_index[bit] {
                let (col, slot) = (col as usize, slot as usize);
                let delta = if winners.contains(col) { alpha } else { -alpha };
                let perm = (self.perms[col][slot] + delta).clamp(0.0, 1.0);
                self.perms[col][slot] = perm;
                let word = &mut self.connected[col][bit / 64];
                if perm >= self.connect_threshold {
                    *word |= 1 << (bit % 64);
                } else {
                    *word &= !(1 << (bit % 64));
                }
            }
        }
        Ok(())
    }

    /// Full stage: overlap scores, kWTA selection, optional learning.
    /// Output sparsity is exactly `k / columns`.
    pub fn pool_step(&mut self, cfg: &SpConfig, e: &Sdr, learning: bool) -> Result<Sdr, SdrError> {
        let winners = match cfg.scoring {
            OverlapScoring::ConnectedCount => {
                let scores = self.overlap_scores(e)?;
                kwta_select_counts(&scores, cfg.k)
            }
            OverlapScoring::WeightedSum => {
                let scores = self.weighted_overlap_scores(e)?;
                kwta_select(&scores, cfg.k)
            }
        };
        if learning {
            self.learn(e, &winners, cfg.alpha)?;
        }
        Ok(winners)
    }
}

/// Selects the k highest-scoring columns; ties at the cutoff go to the
/// lowest column index. Always returns exactly `min(k, len)` active columns.
pub fn kwta_select(scores: &[f64], k: usize) -> Sdr {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("overlap scores are never NaN")
            .then(a.cmp(&b))
    });
    let mut winners: Vec<usize> = order.into_iter().take(k).collect();
    winners.sort_unstable();
    Sdr::from_sorted_unchecked(scores.len(), winners)
}

/// Integer-score variant of [`kwta_select`].
pub fn kwta_select_counts(scores: &[u32], k: usize) -> Sdr {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].cmp(&scores[a]).then(a.cmp(&b)));
    let mut winners: Vec<usize> = order.into_iter().take(k).collect();
    winners.sort_unstable();
    Sdr::from_sorted_unchecked(scores.len(), winners)
}
