//! Scalar encoder: maps a continuous value to an SDR with a contiguous run
//! of active bits, so that numerically close inputs share active bits and
//! Hamming similarity degrades smoothly with distance.

use crate::sdr::Sdr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodeError {
    #[error("input {value} is not finite")]
    NonFiniteInput { value: f64 },
    #[error("input {value} outside [{min}, {max}] and clipping is disabled")]
    OutOfRange { value: f64, min: f64, max: f64 },
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
}

/// Configuration for [`encode`]. `width` is the output SDR width, and
/// `active_width` consecutive bits are set starting at the input's bucket.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScalarEncoderConfig {
    pub width: usize,
    pub active_width: usize,
    pub min_value: f64,
    pub max_value: f64,
    /// Clamp out-of-range inputs instead of rejecting them. Defaults on for
    /// streaming robustness.
    pub clip_out_of_range: bool,
}

impl Default for ScalarEncoderConfig {
    fn default() -> Self {
        Self {
            width: 1024,
            active_width: 40,
            min_value: 0.0,
            max_value: 1.0,
            clip_out_of_range: true,
        }
    }
}

impl ScalarEncoderConfig {
    pub fn validate(&self) -> Result<(), EncodeError> {
        if self.active_width == 0 || self.active_width >= self.width {
            return Err(EncodeError::InvalidConfig(format!(
                "active_width {} must be in (0, width {})",
                self.active_width, self.width
            )));
        }
        if !(self.min_value < self.max_value) {
            return Err(EncodeError::InvalidConfig(format!(
                "min_value {} must be < max_value {}",
                self.min_value, self.max_value
            )));
        }
        Ok(())
    }

    /// Index of the first active bit for input `x`, after clamping.
    /// Non-decreasing in `x`.
    pub fn bucket(&self, x: f64) -> usize {
        let clamped = x.clamp(self.min_value, self.max_value);
        let span = self.max_value - self.min_value;
        let positions = (self.width - self.active_width) as f64;
        let raw = ((clamped - self.min_value) / span * positions + 0.5).floor();
        (raw as usize).min(self.width - self.active_width)
    }
}

/// Encodes `x` as `active_width` consecutive bits starting at its bucket.
pub fn encode(cfg: &ScalarEncoderConfig, x: f64) -> Result<Sdr, EncodeError> {
    cfg.validate()?;
    if !x.is_finite() {
        return Err(EncodeError::NonFiniteInput { value: x });
    }
    if !cfg.clip_out_of_range && (x < cfg.min_value || x > cfg.max_value) {
        return Err(EncodeError::OutOfRange {
            value: x,
            min: cfg.min_value,
            max: cfg.max_value,
        });
    }
    let start = cfg.bucket(x);
    Ok(Sdr::from_sorted_unchecked(
        cfg.width,
        (start..start + cfg.active_width).collect(),
    ))
}
