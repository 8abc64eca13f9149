//! Flat key-value configuration: dotted keys, one `key = value` per line,
//! `#` comments. Keys map onto the per-module config structs.

use crate::cu::Choice;
use crate::pipeline::PipelineConfig;
use crate::sp::OverlapScoring;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Malformed { line: usize, text: String },
    #[error("unknown config keys: {}", keys.join(", "))]
    UnknownKeys { keys: Vec<String> },
    #[error("key {key}: cannot parse {value:?} as {expected}")]
    BadValue { key: String, value: String, expected: &'static str },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigMap {
    map: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Malformed { line: i + 1, text: raw.to_string() })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { map })
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.map.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Applies every key onto `cfg`. Unknown keys are collected and
    /// reported together.
    pub fn apply(&self, cfg: &mut PipelineConfig) -> Result<(), ConfigError> {
        let mut unknown = Vec::new();
        for (key, value) in &self.map {
            let handled = self.apply_one(cfg, key, value)?;
            if !handled {
                unknown.push(key.clone());
            }
        }
        if !unknown.is_empty() {
            return Err(ConfigError::UnknownKeys { keys: unknown });
        }
        Ok(())
    }

    fn apply_one(
        &self,
        cfg: &mut PipelineConfig,
        key: &str,
        value: &str,
    ) -> Result<bool, ConfigError> {
        fn parse<T: std::str::FromStr>(
            key: &str,
            value: &str,
            expected: &'static str,
        ) -> Result<T, ConfigError> {
            value.parse().map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: value.to_string(),
                expected,
            })
        }
        match key {
            "encoder.width" => cfg.encoder.width = parse(key, value, "integer")?,
            "encoder.active_width" => cfg.encoder.active_width = parse(key, value, "integer")?,
            "encoder.min" => cfg.encoder.min_value = parse(key, value, "number")?,
            "encoder.max" => cfg.encoder.max_value = parse(key, value, "number")?,
            "encoder.clip" => cfg.encoder.clip_out_of_range = parse(key, value, "bool")?,
            "sp.columns" => cfg.sp.columns = parse(key, value, "integer")?,
            "sp.k" => cfg.sp.k = parse(key, value, "integer")?,
            "sp.alpha" => cfg.sp.alpha = parse(key, value, "number")?,
            "sp.connect_threshold" => cfg.sp.connect_threshold = parse(key, value, "number")?,
            "sp.pool_fraction" => cfg.sp.pool_fraction = parse(key, value, "number")?,
            "sp.seed" => cfg.sp.seed = parse(key, value, "integer")?,
            "sp.scoring" => {
                cfg.sp.scoring = match value {
                    "connected" => OverlapScoring::ConnectedCount,
                    "weighted" => OverlapScoring::WeightedSum,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.to_string(),
                            value: value.to_string(),
                            expected: "connected|weighted",
                        })
                    }
                }
            }
            "sm.cells_per_column" => cfg.sm.cells_per_column = parse(key, value, "integer")?,
            "sm.theta" => cfg.sm.theta = parse(key, value, "number")?,
            "sm.synapse_connect_threshold" => {
                cfg.sm.synapse_connect_threshold = parse(key, value, "number")?
            }
            "sm.activation_threshold" => {
                cfg.sm.activation_threshold = parse(key, value, "integer")?
            }
            "sm.perm_inc" => cfg.sm.perm_inc = parse(key, value, "number")?,
            "sm.perm_dec" => cfg.sm.perm_dec = parse(key, value, "number")?,
            "sm.initial_perm" => cfg.sm.initial_perm = parse(key, value, "number")?,
            "sm.max_segments" => cfg.sm.max_segments = parse(key, value, "integer")?,
            "sm.max_synapses" => cfg.sm.max_synapses = parse(key, value, "integer")?,
            "rm.capacity" => cfg.rm_capacity = parse(key, value, "integer")?,
            "cu.window" => cfg.cu.window = parse(key, value, "integer")?,
            "cu.boost_factor" => cfg.cu.boost_factor = parse(key, value, "number")?,
            "cu.skip_sm_when_rm_confident" => {
                cfg.cu.skip_sm_when_rm_confident = parse(key, value, "bool")?
            }
            "cu.pin" => {
                cfg.cu.pin = match value.to_ascii_lowercase().as_str() {
                    "rm" => Some(Choice::Rm),
                    "sm" => Some(Choice::Sm),
                    "none" => None,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.to_string(),
                            value: value.to_string(),
                            expected: "rm|sm|none",
                        })
                    }
                }
            }
            "cam.n" => cfg.cam.subarrays_per_array = parse(key, value, "integer")?,
            "cam.m" => cfg.cam.arrays_per_stage = parse(key, value, "integer")?,
            "cam.p" => cfg.cam.rows_per_subarray = parse(key, value, "integer")?,
            "cam.q" => cfg.cam.bits_per_row = parse(key, value, "integer")?,
            "pipeline.learning" => cfg.learning = parse(key, value, "bool")?,
            "pipeline.repeat" => cfg.repeat_count = parse(key, value, "integer")?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lines_and_comments() {
        let text = "\n# tuning\nsp.k = 12\nencoder.width=512 # inline\n\ncu.window = 8\n";
        let map = ConfigMap::parse(text).unwrap();
        assert_eq!(map.get("sp.k"), Some("12"));
        assert_eq!(map.get("encoder.width"), Some("512"));
        let mut cfg = PipelineConfig::default();
        map.apply(&mut cfg).unwrap();
        assert_eq!(cfg.sp.k, 12);
        assert_eq!(cfg.encoder.width, 512);
        assert_eq!(cfg.cu.window, 8);
    }

    #[test]
    fn rejects_malformed_lines() {
        let err = ConfigMap::parse("sp.k 12").unwrap_err();
        assert!(matches!(err, ConfigError::Malformed { line: 1, .. }));
    }

    #[test]
    fn unknown_keys_are_listed() {
        let map = ConfigMap::parse("sp.k=3\nbogus.key=1\nother.bad=2").unwrap();
        let mut cfg = PipelineConfig::default();
        let err = map.apply(&mut cfg).unwrap_err();
        match err {
            ConfigError::UnknownKeys { keys } => {
                assert_eq!(keys, vec!["bogus.key".to_string(), "other.bad".to_string()]);
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn bad_values_name_the_key() {
        let map = ConfigMap::parse("sp.k = lots").unwrap();
        let mut cfg = PipelineConfig::default();
        let err = map.apply(&mut cfg).unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { ref key, .. } if key == "sp.k"));
    }

    #[test]
    fn covers_every_documented_key() {
        let text = "\
encoder.width = 256\nencoder.active_width = 16\nencoder.min = -5\nencoder.max = 5\n\
encoder.clip = false\nsp.columns = 256\nsp.k = 8\nsp.alpha = 0.1\n\
sp.connect_threshold = 0.25\nsp.pool_fraction = 0.4\nsp.seed = 17\nsp.scoring = weighted\n\
sm.cells_per_column = 4\nsm.theta = 0.4\nsm.synapse_connect_threshold = 0.45\n\
sm.activation_threshold = 3\nsm.perm_inc = 0.2\nsm.perm_dec = 0.1\nsm.initial_perm = 0.3\n\
sm.max_segments = 16\nsm.max_synapses = 24\nrm.capacity = 512\ncu.window = 6\n\
cu.boost_factor = 2.0\ncu.skip_sm_when_rm_confident = false\ncu.pin = sm\n\
cam.n = 32\ncam.m = 8\ncam.p = 64\ncam.q = 8\npipeline.learning = false\npipeline.repeat = 5\n";
        let map = ConfigMap::parse(text).unwrap();
        let mut cfg = PipelineConfig::default();
        map.apply(&mut cfg).unwrap();
        assert_eq!(cfg.encoder.width, 256);
        assert!(!cfg.encoder.clip_out_of_range);
        assert_eq!(cfg.sp.scoring, OverlapScoring::WeightedSum);
        assert_eq!(cfg.sm.max_synapses, 24);
        assert_eq!(cfg.rm_capacity, 512);
        assert_eq!(cfg.cu.pin, Some(Choice::Sm));
        assert_eq!(cfg.cam.subarrays_per_array, 32);
        assert!(!cfg.learning);
        assert_eq!(cfg.repeat_count, 5);
    }
}
