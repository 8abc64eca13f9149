//! Functional and cost simulator of the three-stage CAM unit backing the
//! reflex memory.
//!
//! The array holds one dictionary slot per row: a present-state word, a
//! Q-bit confidence counter, and a next-state word. Five operations are
//! modeled bit-exactly (write, search, update, min/max, predict), each
//! charging the ledger its unit latency and per-bit energy. Analog matchline
//! behavior is abstracted away; only functional results and costs remain.
//!
//! [`CamBackedRm`] maps the reflex-memory contract onto the array the way
//! the host controller would: searches locate rows, confidence counters
//! mirror recurrence counts (host-driven writes), predictions are read out
//! of the next-state stage, and a host-side scan picks eviction victims by
//! the same frequency-then-recency policy as the software table.

use crate::rm::{ReflexBackend, ReflexTable, RmStats, SlotChange};
use crate::sdr::{Fingerprint, Sdr};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CamError {
    #[error("row {row} out of range (rows: {rows})")]
    RowOutOfRange { row: usize, rows: usize },
    #[error("row {row} is not valid")]
    InvalidRow { row: usize },
    #[error("query width {got} does not match word width {want}")]
    WidthMismatch { got: usize, want: usize },
    #[error("confidence value {value} exceeds counter maximum {max}")]
    ConfidenceOverflow { value: u32, max: u32 },
    #[error("min/max needs a non-empty candidate set")]
    EmptyCandidates,
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
}

/// Array dimensions. Words are `subarrays_per_array * bits_per_row` bits
/// wide and the unit holds `arrays_per_stage * rows_per_subarray` rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CamGeometry {
    /// Subarrays per array (`n`).
    pub subarrays_per_array: usize,
    /// Arrays per stage column (`M`).
    pub arrays_per_stage: usize,
    /// Stages: present state, confidence level, next state.
    pub stages: usize,
    /// Rows per subarray (`P`).
    pub rows_per_subarray: usize,
    /// Bits per subarray row (`Q`).
    pub bits_per_row: usize,
}

impl Default for CamGeometry {
    fn default() -> Self {
        Self {
            subarrays_per_array: 128,
            arrays_per_stage: 16,
            stages: 3,
            rows_per_subarray: 128,
            bits_per_row: 8,
        }
    }
}

impl CamGeometry {
    pub fn word_width(&self) -> usize {
        self.subarrays_per_array * self.bits_per_row
    }

    pub fn total_rows(&self) -> usize {
        self.arrays_per_stage * self.rows_per_subarray
    }

    /// Largest value a Q-bit confidence counter can hold.
    pub fn confidence_max(&self) -> u32 {
        ((1u64 << self.bits_per_row) - 1) as u32
    }

    pub fn validate(&self) -> Result<(), CamError> {
        if self.subarrays_per_array == 0
            || self.arrays_per_stage == 0
            || self.rows_per_subarray == 0
            || self.bits_per_row == 0
        {
            return Err(CamError::InvalidGeometry("all dimensions must be positive".into()));
        }
        if self.stages != 3 {
            return Err(CamError::InvalidGeometry("exactly 3 stages required".into()));
        }
        if self.bits_per_row > 30 {
            return Err(CamError::InvalidGeometry("bits_per_row above 30 unsupported".into()));
        }
        Ok(())
    }
}

/// Unit costs per operation class: (latency ns, energy fJ per bit).
pub const WRITE_COST: (f64, f64) = (20.0, 0.16);
pub const SEARCH_COST: (f64, f64) = (0.25, 0.22);
pub const UPDATE_COST: (f64, f64) = (20.25, 0.54);
pub const MINMAX_COST: (f64, f64) = (1.2, 1.76);
pub const PREDICT_COST: (f64, f64) = (2.3, 1.76);

/// Per-operation counters. Totals are derived on demand so they are exactly
/// `sum(op count * unit latency)` and `sum(bits touched * unit energy)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLedger {
    pub write_ops: u64,
    pub search_ops: u64,
    pub update_ops: u64,
    pub minmax_ops: u64,
    pub predict_ops: u64,
    pub write_bits: u64,
    pub search_bits: u64,
    pub update_bits: u64,
    pub minmax_bits: u64,
    pub predict_bits: u64,
    /// Precharge-presearch cycles spent reading predictions (Q per predict).
    pub predict_cycles: u64,
}

impl CostLedger {
    pub fn latency_ns(&self) -> f64 {
        self.write_ops as f64 * WRITE_COST.0
            + self.search_ops as f64 * SEARCH_COST.0
            + self.update_ops as f64 * UPDATE_COST.0
            + self.minmax_ops as f64 * MINMAX_COST.0
            + self.predict_ops as f64 * PREDICT_COST.0
    }

    pub fn energy_fj(&self) -> f64 {
        self.write_bits as f64 * WRITE_COST.1
            + self.search_bits as f64 * SEARCH_COST.1
            + self.update_bits as f64 * UPDATE_COST.1
            + self.minmax_bits as f64 * MINMAX_COST.1
            + self.predict_bits as f64 * PREDICT_COST.1
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "ops": {
                "write": self.write_ops,
                "search": self.search_ops,
                "update": self.update_ops,
                "minmax": self.minmax_ops,
                "predict": self.predict_ops,
            },
            "bits": {
                "write": self.write_bits,
                "search": self.search_bits,
                "update": self.update_bits,
                "minmax": self.minmax_bits,
                "predict": self.predict_bits,
            },
            "predict_cycles": self.predict_cycles,
            "total_latency_ns": self.latency_ns(),
            "total_energy_fj": self.energy_fj(),
        })
    }
}

/// The two word-bearing stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateStage {
    Present,
    Next,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinMaxMode {
    Max,
    Min,
}

/// Result of a search: matching row addresses (ascending) and the miss flag
/// raised by the all-0/1 block when nothing matched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchResult {
    pub rows: Vec<usize>,
    pub miss: bool,
}

/// Bit-exact contents of the three stages plus the cost ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct CamState {
    geometry: CamGeometry,
    blocks_per_word: usize,
    present: Vec<u64>,
    next: Vec<u64>,
    confidence: Vec<u32>,
    valid: Vec<bool>,
    ledger: CostLedger,
}

impl CamState {
    pub fn new(geometry: CamGeometry) -> Result<Self, CamError> {
        geometry.validate()?;
        let rows = geometry.total_rows();
        let blocks_per_word = geometry.word_width().div_ceil(64);
        Ok(Self {
            geometry,
            blocks_per_word,
            present: vec![0; rows * blocks_per_word],
            next: vec![0; rows * blocks_per_word],
            confidence: vec![0; rows],
            valid: vec![false; rows],
            ledger: CostLedger::default(),
        })
    }

    pub fn geometry(&self) -> &CamGeometry {
        &self.geometry
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    pub fn is_valid(&self, row: usize) -> bool {
        self.valid[row]
    }

    pub fn confidence(&self, row: usize) -> u32 {
        self.confidence[row]
    }

    pub fn valid_rows(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    fn check_row(&self, row: usize) -> Result<(), CamError> {
        let rows = self.geometry.total_rows();
        if row >= rows {
            return Err(CamError::RowOutOfRange { row, rows });
        }
        Ok(())
    }

    fn check_word(&self, word: &Sdr) -> Result<(), CamError> {
        if word.width() != self.geometry.word_width() {
            return Err(CamError::WidthMismatch {
                got: word.width(),
                want: self.geometry.word_width(),
            });
        }
        Ok(())
    }

    fn word_blocks(&self, stage: StateStage, row: usize) -> &[u64] {
        let store = match stage {
            StateStage::Present => &self.present,
            StateStage::Next => &self.next,
        };
        &store[row * self.blocks_per_word..(row + 1) * self.blocks_per_word]
    }

    fn encode_word(&self, word: &Sdr) -> Vec<u64> {
        let mut blocks = vec![0u64; self.blocks_per_word];
        for &bit in word.active() {
            blocks[bit / 64] |= 1 << (bit % 64);
        }
        blocks
    }

    fn decode_word(&self, blocks: &[u64]) -> Sdr {
        let mut active = Vec::new();
        for (i, &block) in blocks.iter().enumerate() {
            let mut b = block;
            while b != 0 {
                let bit = b.trailing_zeros() as usize;
                active.push(i * 64 + bit);
                b &= b - 1;
            }
        }
        Sdr::from_sorted_unchecked(self.geometry.word_width(), active)
    }

    /// Writes a state word into a row. Writing the present stage makes the
    /// row valid. Charges one write of `word_width` bits.
    pub fn write_state(&mut self, stage: StateStage, row: usize, word: &Sdr) -> Result<(), CamError> {
        self.check_row(row)?;
        self.check_word(word)?;
        let blocks = self.encode_word(word);
        let store = match stage {
            StateStage::Present => &mut self.present,
            StateStage::Next => &mut self.next,
        };
        store[row * self.blocks_per_word..(row + 1) * self.blocks_per_word]
            .copy_from_slice(&blocks);
        if stage == StateStage::Present {
            self.valid[row] = true;
        }
        self.ledger.write_ops += 1;
        self.ledger.write_bits += self.geometry.word_width() as u64;
        Ok(())
    }

    /// Writes a Q-bit confidence counter. Charges one write of Q bits.
    pub fn write_confidence(&mut self, row: usize, value: u32) -> Result<(), CamError> {
        self.check_row(row)?;
        let max = self.geometry.confidence_max();
        if value > max {
            return Err(CamError::ConfidenceOverflow { value, max });
        }
        self.confidence[row] = value;
        self.ledger.write_ops += 1;
        self.ledger.write_bits += self.geometry.bits_per_row as u64;
        Ok(())
    }

    /// Exact-match search over valid rows, modeled as the two-phase scheme:
    /// the pre-search phase catches rows storing 1 where 0 is searched, the
    /// search phase catches rows storing 0 where 1 is searched. Charges one
    /// search of `word_width` bits.
    pub fn search(&mut self, stage: StateStage, query: &Sdr) -> Result<SearchResult, CamError> {
        self.check_word(query)?;
        let query_blocks = self.encode_word(query);
        let mut rows = Vec::new();
        for row in 0..self.geometry.total_rows() {
            if !self.valid[row] {
                continue;
            }
            let stored = self.word_blocks(stage, row);
            let pre_search_mismatch = stored
                .iter()
                .zip(&query_blocks)
                .any(|(s, q)| s & !q != 0);
            let search_mismatch = stored
                .iter()
                .zip(&query_blocks)
                .any(|(s, q)| !s & q != 0);
            if !pre_search_mismatch && !search_mismatch {
                rows.push(row);
            }
        }
        self.ledger.search_ops += 1;
        self.ledger.search_bits += self.geometry.word_width() as u64;
        let miss = rows.is_empty();
        Ok(SearchResult { rows, miss })
    }

    /// Simultaneous search of the present and next stages for one pair;
    /// returns rows matching both. Charges one search per stage.
    pub fn search_pair(&mut self, present: &Sdr, next: &Sdr) -> Result<SearchResult, CamError> {
        let p = self.search(StateStage::Present, present)?;
        let n = self.search(StateStage::Next, next)?;
        let n_set: BTreeSet<usize> = n.rows.into_iter().collect();
        let rows: Vec<usize> = p.rows.into_iter().filter(|r| n_set.contains(r)).collect();
        let miss = rows.is_empty();
        Ok(SearchResult { rows, miss })
    }

    /// Clears a row back to its initial state: both words zeroed, the
    /// confidence counter reset, the row marked invalid and ready to be
    /// overwritten. Charges one update touching both words plus the counter.
    pub fn update(&mut self, row: usize) -> Result<(), CamError> {
        self.check_row(row)?;
        if !self.valid[row] {
            return Err(CamError::InvalidRow { row });
        }
        let span = row * self.blocks_per_word..(row + 1) * self.blocks_per_word;
        self.present[span.clone()].fill(0);
        self.next[span].fill(0);
        self.confidence[row] = 0;
        self.valid[row] = false;
        self.ledger.update_ops += 1;
        self.ledger.update_bits +=
            (2 * self.geometry.word_width() + self.geometry.bits_per_row) as u64;
        Ok(())
    }

    /// Iterative bitwise min/max over the candidates' confidence counters,
    /// MSB to LSB. For max, rows storing 0 at a discriminating bit are
    /// excluded; for min, rows storing 1. The scan stops once a single row
    /// remains; residual ties fall to the priority encoder, i.e. the lowest
    /// row address. Charges one op over `Q * candidates` bits.
    pub fn minmax(&mut self, candidates: &[usize], mode: MinMaxMode) -> Result<usize, CamError> {
        if candidates.is_empty() {
            return Err(CamError::EmptyCandidates);
        }
        for &row in candidates {
            self.check_row(row)?;
        }
        self.ledger.minmax_ops += 1;
        self.ledger.minmax_bits += (self.geometry.bits_per_row * candidates.len()) as u64;

        let mut survivors: Vec<usize> = candidates.to_vec();
        for bit in (0..self.geometry.bits_per_row).rev() {
            if survivors.len() == 1 {
                break;
            }
            let keep_value = match mode {
                MinMaxMode::Max => 1,
                MinMaxMode::Min => 0,
            };
            let any_keep = survivors
                .iter()
                .any(|&r| (self.confidence[r] >> bit) & 1 == keep_value);
            if any_keep {
                survivors.retain(|&r| (self.confidence[r] >> bit) & 1 == keep_value);
            }
        }
        Ok(*survivors.iter().min().expect("survivors non-empty"))
    }

    /// Reads the stored next-state word of a valid row, bit-exactly, through
    /// Q precharge-presearch cycles into the output registers. Charges one
    /// predict over `word_width` bits and Q cycles.
    pub fn predict(&mut self, row: usize) -> Result<Sdr, CamError> {
        self.check_row(row)?;
        if !self.valid[row] {
            return Err(CamError::InvalidRow { row });
        }
        let word = self.decode_word(self.word_blocks(StateStage::Next, row));
        self.ledger.predict_ops += 1;
        self.ledger.predict_bits += self.geometry.word_width() as u64;
        self.ledger.predict_cycles += self.geometry.bits_per_row as u64;
        Ok(word)
    }
}

/// Reflex memory realized on the CAM array.
///
/// The host controller keeps the same bounded table the software backend
/// uses (it drives confidence writes and the eviction scan anyway), so both
/// backends share one policy for prediction tie-breaks and victim selection.
/// All stored words flow through the array: predictions returned to the
/// caller are read out of the next-state stage, never from host memory.
pub struct CamBackedRm {
    cam: CamState,
    table: ReflexTable,
    row_of_pair: BTreeMap<(Fingerprint, Fingerprint), usize>,
    rows_of_present: BTreeMap<Fingerprint, Vec<usize>>,
    pair_of_row: Vec<Option<(Fingerprint, Fingerprint)>>,
    free_rows: BTreeSet<usize>,
    /// Row holding a present word whose next state has not arrived yet.
    pending: Option<(Fingerprint, usize)>,
}

impl CamBackedRm {
    pub fn new(geometry: CamGeometry) -> Result<Self, CamError> {
        let cam = CamState::new(geometry)?;
        let rows = geometry.total_rows();
        Ok(Self {
            cam,
            table: ReflexTable::with_saturation(rows, geometry.confidence_max()),
            row_of_pair: BTreeMap::new(),
            rows_of_present: BTreeMap::new(),
            pair_of_row: vec![None; rows],
            free_rows: (0..rows).collect(),
            pending: None,
        })
    }

    pub fn ledger(&self) -> &CostLedger {
        self.cam.ledger()
    }

    pub fn cam(&self) -> &CamState {
        &self.cam
    }

    pub fn table(&self) -> &ReflexTable {
        &self.table
    }

    /// One mapped step: optionally confirm a `present -> next` observation,
    /// then run present-state processing for `present`.
    ///
    /// Inference searches the present stage. A unique confirmed match
    /// bypasses confidence processing and predicts directly; multiple
    /// matches go through a max operation over their confidence counters.
    /// A miss registers `present` in a free row (when one is available)
    /// so the next state can later land in the same row.
    pub fn rm_step_mapped(
        &mut self,
        present: &Sdr,
        provide_next: Option<&Sdr>,
    ) -> Result<Option<Sdr>, CamError> {
        if let Some(next) = provide_next {
            self.record_pair(present, next)?;
        }
        self.infer(present, provide_next.is_none())
    }

    fn infer(&mut self, present: &Sdr, register_pending: bool) -> Result<Option<Sdr>, CamError> {
        let policy = self.table.lookup_predict(present);
        let result = self.cam.search(StateStage::Present, present)?;
        let key = present.fingerprint();
        let confirmed = self.rows_of_present.get(&key).cloned().unwrap_or_default();

        match policy {
            None => {
                debug_assert!(confirmed.is_empty());
                if register_pending {
                    self.register_pending(present, &key)?;
                }
                Ok(None)
            }
            Some(expected) => {
                debug_assert!(!confirmed.is_empty());
                debug_assert!(confirmed.iter().all(|r| result.rows.contains(r)));
                let row = if confirmed.len() == 1 {
                    // Single match: bypass confidence level processing.
                    confirmed[0]
                } else {
                    let hw_row = self.cam.minmax(&confirmed, MinMaxMode::Max)?;
                    // Confidence ties are resolved by the host with the
                    // shared recency-then-fingerprint rule; the hardware
                    // result already carries the winning count.
                    let semantic_row = self.row_of_pair[&(key.clone(), expected.fingerprint())];
                    debug_assert_eq!(self.cam.confidence(hw_row), self.cam.confidence(semantic_row));
                    semantic_row
                };
                let word = self.cam.predict(row)?;
                debug_assert_eq!(word, expected);
                Ok(Some(word))
            }
        }
    }

    fn register_pending(&mut self, present: &Sdr, key: &Fingerprint) -> Result<(), CamError> {
        if let Some((pending_key, _)) = &self.pending {
            if pending_key == key {
                return Ok(());
            }
        }
        // At most one unconfirmed row exists: a newer present overwrites
        // the previous one. A full table never evicts for an unconfirmed
        // present, so registration is skipped when no row is left.
        let row = if let Some(row) = self.pending.as_ref().map(|(_, r)| *r) {
            row
        } else if let Some(free) = self.free_rows.first().copied() {
            self.free_rows.remove(&free);
            free
        } else {
            return Ok(());
        };
        self.cam.write_state(StateStage::Present, row, present)?;
        self.pending = Some((key.clone(), row));
        Ok(())
    }

    fn record_pair(&mut self, present: &Sdr, next: &Sdr) -> Result<(), CamError> {
        // The update path locates the pair by searching both stages at once.
        let located = self.cam.search_pair(present, next)?;
        let effect = self.table.observe_with_effect(present, next);
        let p_key = present.fingerprint();
        let n_key = next.fingerprint();

        for victim in &effect.evicted {
            let rows = self.rows_of_present.remove(victim).unwrap_or_default();
            for row in rows {
                self.cam.update(row)?;
                if let Some(pair) = self.pair_of_row[row].take() {
                    self.row_of_pair.remove(&pair);
                }
                self.free_rows.insert(row);
            }
        }

        match effect.change {
            SlotChange::Incremented { count } => {
                let row = self.row_of_pair[&(p_key, n_key)];
                debug_assert_eq!(located.rows, vec![row]);
                self.cam.write_confidence(row, count)?;
            }
            SlotChange::Inserted => {
                debug_assert!(located.miss);
                let (row, present_written) = self.allocate_row(&p_key);
                if !present_written {
                    self.cam.write_state(StateStage::Present, row, present)?;
                }
                self.cam.write_state(StateStage::Next, row, next)?;
                self.cam.write_confidence(row, 1)?;
                let pair = (p_key.clone(), n_key);
                self.row_of_pair.insert(pair.clone(), row);
                self.pair_of_row[row] = Some(pair);
                let rows = self.rows_of_present.entry(p_key).or_default();
                rows.push(row);
                rows.sort_unstable();
            }
        }
        Ok(())
    }

    /// Picks the row for a new pair. The pending row is reused when it
    /// already holds this present word (returning `true` for "present word
    /// already written"); otherwise the lowest free row is taken, falling
    /// back to repurposing the pending row when nothing else is free.
    fn allocate_row(&mut self, key: &Fingerprint) -> (usize, bool) {
        if let Some((pending_key, row)) = self.pending.clone() {
            if &pending_key == key {
                self.pending = None;
                return (row, true);
            }
        }
        if let Some(row) = self.free_rows.first().copied() {
            self.free_rows.remove(&row);
            return (row, false);
        }
        let (_, row) = self.pending.take().expect("a row must be free or pending");
        (row, false)
    }
}

impl ReflexBackend for CamBackedRm {
    fn lookup_predict(&mut self, present: &Sdr) -> Option<Sdr> {
        self.infer(present, true).expect("cam geometry matches stream width")
    }

    fn observe(&mut self, present: &Sdr, next: &Sdr) {
        self.record_pair(present, next).expect("cam geometry matches stream width");
    }

    fn decrement(&mut self, present: &Sdr, wrong_next: &Sdr) {
        if let Some(count) = self.table.decrement_with_effect(present, wrong_next) {
            let row = self.row_of_pair[&(present.fingerprint(), wrong_next.fingerprint())];
            self.cam
                .write_confidence(row, count)
                .expect("row index tracked by host");
        }
    }

    fn retrain(&mut self, present: &Sdr, correct_next: &Sdr) {
        self.observe(present, correct_next);
    }

    fn stats(&self) -> RmStats {
        self.table.stats()
    }

    fn eviction_log(&self) -> &[Fingerprint] {
        self.table.eviction_log()
    }
}
