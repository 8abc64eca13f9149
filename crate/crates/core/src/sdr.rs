//! Sparse distributed representations: fixed-width binary vectors stored as
//! sorted sets of active bit indices.
//!
//! An [`Sdr`] is the currency of the whole pipeline. Values are immutable
//! after construction and always held in canonical form (indices unique,
//! ascending), so equality is exact bit-pattern equality and a cheap
//! [`Fingerprint`] can serve as an associative-memory key.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SdrError {
    #[error("sdr width mismatch: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },
    #[error("active index {index} out of range for width {width}")]
    IndexOutOfRange { index: usize, width: usize },
    #[error("malformed sdr text form: {0}")]
    ParseError(String),
}

/// Fixed-width binary vector with few active bits.
///
/// Canonical form: `active` is sorted ascending with no duplicates and every
/// index is `< width`. Construction enforces this, so two `Sdr`s are equal
/// iff they denote the same bit pattern.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sdr {
    width: usize,
    active: Vec<usize>,
}

impl Sdr {
    /// Builds an `Sdr` from any iterator of active indices, canonicalizing
    /// the order and rejecting out-of-range indices.
    pub fn new(width: usize, active: impl IntoIterator<Item = usize>) -> Result<Self, SdrError> {
        let mut active: Vec<usize> = active.into_iter().collect();
        active.sort_unstable();
        active.dedup();
        if let Some(&index) = active.iter().find(|&&i| i >= width) {
            return Err(SdrError::IndexOutOfRange { index, width });
        }
        Ok(Self { width, active })
    }

    /// All bits off.
    pub fn empty(width: usize) -> Self {
        Self { width, active: Vec::new() }
    }

    /// Construction fast path for callers that already hold sorted, unique,
    /// in-range indices (kWTA selections, decoded CAM words).
    pub(crate) fn from_sorted_unchecked(width: usize, active: Vec<usize>) -> Self {
        debug_assert!(active.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(active.last().is_none_or(|&i| i < width));
        Self { width, active }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Active bit indices in ascending order.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// Number of active bits (the `nz` count).
    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.active.binary_search(&index).is_ok()
    }

    /// Size of the intersection of the two active sets.
    pub fn overlap_count(&self, other: &Sdr) -> Result<usize, SdrError> {
        self.check_width(other)?;
        let mut count = 0;
        let (mut i, mut j) = (0, 0);
        while i < self.active.len() && j < other.active.len() {
            match self.active[i].cmp(&other.active[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    count += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(count)
    }

    /// Fraction of bit positions on which the two vectors agree, zeros
    /// included: `(1/n) * sum_i [a_i == b_i]`.
    pub fn hamming_similarity(&self, other: &Sdr) -> Result<f64, SdrError> {
        let overlap = self.overlap_count(other)?;
        let sym_diff = self.active.len() + other.active.len() - 2 * overlap;
        Ok(1.0 - sym_diff as f64 / self.width as f64)
    }

    /// Deterministic, collision-free key over canonical `(width, active)`
    /// pairs. The key owns a shared copy of the active set, so distinct
    /// patterns can never collide.
    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint {
            width: self.width,
            active: Arc::from(self.active.as_slice()),
        }
    }

    fn check_width(&self, other: &Sdr) -> Result<(), SdrError> {
        if self.width != other.width {
            return Err(SdrError::WidthMismatch { left: self.width, right: other.width });
        }
        Ok(())
    }
}

/// Text form `width:idx1,idx2,...` used in fixtures, logs, and dumps.
impl fmt::Display for Sdr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.width)?;
        for (k, idx) in self.active.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{idx}")?;
        }
        Ok(())
    }
}

impl FromStr for Sdr {
    type Err = SdrError;

    fn from_str(s: &str) -> Result<Self, SdrError> {
        let (width_part, bits_part) = s
            .split_once(':')
            .ok_or_else(|| SdrError::ParseError(format!("missing ':' in {s:?}")))?;
        let width: usize = width_part
            .trim()
            .parse()
            .map_err(|_| SdrError::ParseError(format!("bad width in {s:?}")))?;
        let mut active = Vec::new();
        for piece in bits_part.split(',') {
            let piece = piece.trim();
            if piece.is_empty() {
                continue;
            }
            let idx: usize = piece
                .parse()
                .map_err(|_| SdrError::ParseError(format!("bad index {piece:?}")))?;
            active.push(idx);
        }
        Sdr::new(width, active)
    }
}

impl Serialize for Sdr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Sdr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(D::Error::custom)
    }
}

/// Opaque lookup key for an `Sdr`. Ordered lexicographically by
/// `(width, active)`, which gives the deterministic "lowest fingerprint"
/// tie-break used by the reflex memory.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint {
    width: usize,
    active: Arc<[usize]>,
}

impl Fingerprint {
    pub fn width(&self) -> usize {
        self.width
    }

    /// Reconstructs the fingerprinted pattern.
    pub fn to_sdr(&self) -> Sdr {
        Sdr::from_sorted_unchecked(self.width, self.active.to_vec())
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_sdr(), f)
    }
}
