//! Token- and sentence-level training weights derived from teacher signals.
//!
//! * token weight: the teacher's probability of the annotated tag.
//! * sentence weight: `max(ln(div + eps) / ln(eps), eps)`, where `div` is the
//!   mean normalized entropy over the sample's positions. Confident samples
//!   (`div` near 0) get weight 1, the most uncertain ones get `eps`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::hash;
use crate::signal::{PositionStat, TeacherSignal};
use crate::{jsonl, Error, Result};

/// `e^-9`.
pub fn default_epsilon() -> f64 {
    (-9.0f64).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    pub epsilon: f64,
    pub use_token: bool,
    pub use_sent: bool,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig {
            epsilon: default_epsilon(),
            use_token: true,
            use_sent: true,
        }
    }
}

impl WeightConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleWeights {
    #[serde(rename = "id")]
    pub sample_id: usize,
    pub w_sent: f64,
    pub w_token: Vec<f64>,
}

impl SampleWeights {
    pub fn uniform(sample_id: usize, positions: usize) -> Self {
        SampleWeights {
            sample_id,
            w_sent: 1.0,
            w_token: vec![1.0; positions],
        }
    }
}

pub fn token_weight(stat: &PositionStat) -> f64 {
    stat.p_gold
}

/// Mean normalized entropy over all positions of a sample.
pub fn diversity(signal: &TeacherSignal) -> Result<f64> {
    if signal.positions.is_empty() {
        return Err(Error::InvalidConfig(format!("sample {} has no positions", signal.sample_id)));
    }
    let sum: f64 = signal.positions.iter().map(|p| p.entropy_norm).sum();
    Ok(sum / signal.positions.len() as f64)
}

pub fn sentence_weight(div: f64, epsilon: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&div));
    ((div + epsilon).ln() / epsilon.ln()).max(epsilon)
}

pub fn compute_weights(signals: &[TeacherSignal], cfg: &WeightConfig) -> Result<Vec<SampleWeights>> {
    cfg.validate()?;
    signals
        .iter()
        .map(|s| {
            let w_sent = if cfg.use_sent {
                sentence_weight(diversity(s)?, cfg.epsilon)
            } else {
                1.0
            };
            let w_token = if cfg.use_token {
                s.positions.iter().map(token_weight).collect()
            } else {
                vec![1.0; s.positions.len()]
            };
            Ok(SampleWeights {
                sample_id: s.sample_id,
                w_sent,
                w_token,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightsHeader {
    pub epsilon: f64,
    pub use_token: bool,
    pub use_sent: bool,
    #[serde(with = "hash::hex_u64")]
    pub signal_file_hash: u64,
    #[serde(with = "hash::hex_u64")]
    pub vocab_hash: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightsFile {
    pub header: WeightsHeader,
    pub weights: Vec<SampleWeights>,
}

impl WeightsFile {
    pub fn to_jsonl(&self) -> Result<String> {
        jsonl::to_string(&self.header, &self.weights)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        jsonl::write(path.as_ref(), &self.header, &self.weights)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (header, weights) = jsonl::read(path.as_ref())?;
        Ok(WeightsFile { header, weights })
    }
}
