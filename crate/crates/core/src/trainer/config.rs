use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DignnConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// Per-epoch negative down-sampling, then batches of `batch_size`.
    Minibatch,
    /// One batch holding every training node, no down-sampling.
    Fullbatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Full,
    /// Cross-entropy only: reconstruction and exclusion terms are dropped.
    NoMi,
}

impl FromStr for TrainMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minibatch" => Ok(Self::Minibatch),
            "fullbatch" => Ok(Self::Fullbatch),
            _ => Err(Error::Config(format!("unknown mode {s:?} (minibatch|fullbatch)"))),
        }
    }
}

impl FromStr for Ablation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" | "none" => Ok(Self::Full),
            "no_mi" => Ok(Self::NoMi),
            _ => Err(Error::Config(format!("unknown ablation {s:?} (full|no_mi)"))),
        }
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Minibatch => "minibatch",
            Self::Fullbatch => "fullbatch",
        })
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Full => "full",
            Self::NoMi => "no_mi",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Root seed for initialization, sampling and noise.
    pub seed: u64,
    pub model: DignnConfig,
    pub mode: TrainMode,
    pub ablation: Ablation,
    /// Minibatch mode only: balance classes each epoch. Off means a plain
    /// shuffle of all training ids.
    pub downsample: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 1024,
            lr: 0.001,
            weight_decay: 0.0005,
            seed: 0,
            model: DignnConfig::default(),
            mode: TrainMode::Minibatch,
            ablation: Ablation::Full,
            downsample: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        self.model.validate()
    }

    /// Name of the model variant this configuration trains.
    pub fn variant(&self) -> &'static str {
        match (self.ablation, self.mode) {
            (Ablation::NoMi, _) => "DIGNN\\M",
            (Ablation::Full, TrainMode::Fullbatch) => "DIGNN\\S",
            (Ablation::Full, TrainMode::Minibatch) => "DIGNN",
        }
    }
}
