//! Reflex memory: a bounded first-order transition table.
//!
//! Keys are exact SDR fingerprints of the present state; each key maps to
//! the successors seen after it, with recurrence counts. Prediction returns
//! the highest-count successor. When full, the table evicts the entry with
//! the lowest total count, oldest access on ties.
//!
//! [`ReflexBackend`] is the contract shared by this software table and the
//! CAM-backed implementation in [`crate::cam`]: both must produce identical
//! prediction sequences and identical eviction victims for identical call
//! sequences. Recurrence counts saturate at `count_saturation` (default 255,
//! the ceiling of an 8-bit hardware confidence counter) on every backend so
//! the two cannot drift apart on long streams.

use crate::sdr::{Fingerprint, Sdr};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RmError {
    #[error("evict_one called on an empty table")]
    EmptyTable,
    #[error("malformed table dump: {0}")]
    RestoreError(String),
}

/// Counters exposed by every reflex-memory backend.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RmStats {
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
    /// Stored (present, next) pairs. Each pair occupies one dictionary slot
    /// (one CAM row), so this is what `capacity` bounds.
    pub size: usize,
    pub decrement_misses: u64,
}

/// Common operations of the software table and the CAM-backed table.
pub trait ReflexBackend {
    /// Predicts the successor of `present`, refreshing its access stamp.
    fn lookup_predict(&mut self, present: &Sdr) -> Option<Sdr>;
    /// Records one observed `present -> next` transition.
    fn observe(&mut self, present: &Sdr, next: &Sdr);
    /// Lowers the count of a mispredicted pair, floored at 1.
    fn decrement(&mut self, present: &Sdr, wrong_next: &Sdr);
    /// Realigns the table toward a correction; same contract as `observe`.
    fn retrain(&mut self, present: &Sdr, correct_next: &Sdr);
    fn stats(&self) -> RmStats;
    /// Evicted entry keys in eviction order.
    fn eviction_log(&self) -> &[Fingerprint];
}

/// One stored successor of a present state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessorSlot {
    pub next: Sdr,
    pub count: u32,
    pub last_observed: u64,
}

/// All successors recorded for one present state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflexEntry {
    pub present: Sdr,
    pub successors: Vec<SuccessorSlot>,
    pub last_access: u64,
}

impl ReflexEntry {
    pub fn total_count(&self) -> u64 {
        self.successors.iter().map(|s| s.count as u64).sum()
    }
}

/// What an observe call did, used by the CAM backend to mirror the change
/// into hardware operations.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ObserveEffect {
    pub evicted: Vec<Fingerprint>,
    pub change: SlotChange,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum SlotChange {
    /// Existing pair; carries the post-update count.
    Incremented { count: u32 },
    /// A new slot was created for the pair.
    Inserted,
}

/// Picks the winning successor index: highest count, most recently observed
/// on ties, lowest successor fingerprint after that.
pub(crate) fn pick_successor(slots: &[SuccessorSlot]) -> Option<usize> {
    if slots.is_empty() {
        return None;
    }
    let mut best = 0;
    for i in 1..slots.len() {
        let (a, b) = (&slots[i], &slots[best]);
        let better = match a.count.cmp(&b.count) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => match a.last_observed.cmp(&b.last_observed) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => a.next.fingerprint() < b.next.fingerprint(),
            },
        };
        if better {
            best = i;
        }
    }
    Some(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflexTable {
    capacity: usize,
    count_saturation: u32,
    entries: BTreeMap<Fingerprint, ReflexEntry>,
    slot_count: usize,
    step_clock: u64,
    stats: RmStats,
    eviction_log: Vec<Fingerprint>,
}

pub const DEFAULT_CAPACITY: usize = 2048;
pub const DEFAULT_COUNT_SATURATION: u32 = 255;

impl ReflexTable {
    pub fn new(capacity: usize) -> Self {
        Self::with_saturation(capacity, DEFAULT_COUNT_SATURATION)
    }

    pub fn with_saturation(capacity: usize, count_saturation: u32) -> Self {
        assert!(capacity >= 1, "capacity must be positive");
        assert!(count_saturation >= 1, "count saturation must be positive");
        Self {
            capacity,
            count_saturation,
            entries: BTreeMap::new(),
            slot_count: 0,
            step_clock: 0,
            stats: RmStats::default(),
            eviction_log: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn count_saturation(&self) -> u32 {
        self.count_saturation
    }

    /// Stored pair slots.
    pub fn size(&self) -> usize {
        self.slot_count
    }

    pub fn key_count(&self) -> usize {
        self.entries.len()
    }

    pub fn step_clock(&self) -> u64 {
        self.step_clock
    }

    pub fn entry(&self, key: &Fingerprint) -> Option<&ReflexEntry> {
        self.entries.get(key)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Fingerprint, &ReflexEntry)> {
        self.entries.iter()
    }

    /// Evicts the entry with the minimum (total count, last access),
    /// returning its key.
    pub fn evict_one(&mut self) -> Result<Fingerprint, RmError> {
        let victim = self
            .entries
            .iter()
            .min_by(|(fa, ea), (fb, eb)| {
                ea.total_count()
                    .cmp(&eb.total_count())
                    .then(ea.last_access.cmp(&eb.last_access))
                    .then(fa.cmp(fb))
            })
            .map(|(fp, _)| fp.clone())
            .ok_or(RmError::EmptyTable)?;
        let entry = self.entries.remove(&victim).expect("victim key present");
        self.slot_count -= entry.successors.len();
        self.stats.evictions += 1;
        self.stats.size = self.slot_count;
        self.eviction_log.push(victim.clone());
        Ok(victim)
    }

    /// Decrements a pair's count (floored at 1), returning the new count,
    /// or `None` when the pair is unknown and nothing changed.
    pub(crate) fn decrement_with_effect(&mut self, present: &Sdr, wrong_next: &Sdr) -> Option<u32> {
        self.step_clock += 1;
        let key = present.fingerprint();
        let slot = self
            .entries
            .get_mut(&key)
            .and_then(|e| e.successors.iter_mut().find(|s| &s.next == wrong_next));
        match slot {
            Some(slot) => {
                if slot.count > 1 {
                    slot.count -= 1;
                }
                Some(slot.count)
            }
            None => {
                self.stats.decrement_misses += 1;
                log::debug!("decrement of unknown pair ignored: {present}");
                None
            }
        }
    }

    pub(crate) fn observe_with_effect(&mut self, present: &Sdr, next: &Sdr) -> ObserveEffect {
        self.step_clock += 1;
        let clock = self.step_clock;
        let key = present.fingerprint();

        if let Some(entry) = self.entries.get_mut(&key) {
            if let Some(slot) = entry.successors.iter_mut().find(|s| &s.next == next) {
                slot.count = slot.count.saturating_add(1).min(self.count_saturation);
                slot.last_observed = clock;
                entry.last_access = clock;
                return ObserveEffect {
                    evicted: Vec::new(),
                    change: SlotChange::Incremented { count: slot.count },
                };
            }
        }

        // New pair slot: make room first.
        let mut evicted = Vec::new();
        while self.slot_count >= self.capacity {
            evicted.push(self.evict_one().expect("table non-empty at capacity"));
        }
        let entry = self
            .entries
            .entry(key)
            .or_insert_with(|| ReflexEntry {
                present: present.clone(),
                successors: Vec::new(),
                last_access: clock,
            });
        entry.successors.push(SuccessorSlot {
            next: next.clone(),
            count: 1,
            last_observed: clock,
        });
        entry.last_access = clock;
        self.slot_count += 1;
        self.stats.size = self.slot_count;
        ObserveEffect { evicted, change: SlotChange::Inserted }
    }

    /// Serializes the table as JSON lines: a header record followed by one
    /// record per entry, sorted by present fingerprint.
    pub fn dump_jsonl(&self) -> String {
        let mut out = String::new();
        let header = serde_json::json!({
            "schema": 1,
            "capacity": self.capacity,
            "count_saturation": self.count_saturation,
            "step_clock": self.step_clock,
        });
        out.push_str(&header.to_string());
        out.push('\n');
        for (_, entry) in self.entries.iter() {
            out.push_str(&serde_json::to_string(entry).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn restore_jsonl(dump: &str) -> Result<Self, RmError> {
        let mut lines = dump.lines().filter(|l| !l.trim().is_empty());
        let header: serde_json::Value = serde_json::from_str(
            lines.next().ok_or_else(|| RmError::RestoreError("empty dump".into()))?,
        )
        .map_err(|e| RmError::RestoreError(e.to_string()))?;
        if header.get("schema").and_then(|v| v.as_u64()) != Some(1) {
            return Err(RmError::RestoreError("unsupported schema".into()));
        }
        let capacity = header
            .get("capacity")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| RmError::RestoreError("missing capacity".into()))? as usize;
        let count_saturation = header
            .get("count_saturation")
            .and_then(|v| v.as_u64())
            .unwrap_or(DEFAULT_COUNT_SATURATION as u64) as u32;
        let step_clock = header
            .get("step_clock")
            .and_then(|v| v.as_u64())
            .unwrap_or(0);
        let mut table = Self::with_saturation(capacity, count_saturation);
        table.step_clock = step_clock;
        for line in lines {
            let entry: ReflexEntry =
                serde_json::from_str(line).map_err(|e| RmError::RestoreError(e.to_string()))?;
            table.slot_count += entry.successors.len();
            table.entries.insert(entry.present.fingerprint(), entry);
        }
        if table.slot_count > table.capacity {
            return Err(RmError::RestoreError(format!(
                "dump holds {} slots, capacity is {}",
                table.slot_count, table.capacity
            )));
        }
        table.stats.size = table.slot_count;
        Ok(table)
    }
}

impl ReflexBackend for ReflexTable {
    fn lookup_predict(&mut self, present: &Sdr) -> Option<Sdr> {
        self.step_clock += 1;
        let clock = self.step_clock;
        let key = present.fingerprint();
        match self.entries.get_mut(&key) {
            Some(entry) => {
                entry.last_access = clock;
                self.stats.hits += 1;
                let winner = pick_successor(&entry.successors).expect("entries hold >= 1 slot");
                Some(entry.successors[winner].next.clone())
            }
            None => {
                self.stats.misses += 1;
                None
            }
        }
    }

    fn observe(&mut self, present: &Sdr, next: &Sdr) {
        self.observe_with_effect(present, next);
    }

    fn decrement(&mut self, present: &Sdr, wrong_next: &Sdr) {
        self.decrement_with_effect(present, wrong_next);
    }

    fn retrain(&mut self, present: &Sdr, correct_next: &Sdr) {
        self.observe(present, correct_next);
    }

    fn stats(&self) -> RmStats {
        self.stats
    }

    fn eviction_log(&self) -> &[Fingerprint] {
        &self.eviction_log
    }
}
