//! Run configuration.
//!
//! One TOML file drives every subcommand: corpus globs and split fractions,
//! STFT geometry, dataset synthesis parameters, network dims, training
//! hyperparameters, estimator and enhancement settings. CLI flags mirror the
//! keys one-to-one and override file values; the fully resolved settings are
//! written next to each run's outputs so a run can be reproduced from that
//! file alone.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::SynthConfig;
use crate::enhance::EnhanceConfig;
use crate::error::{Error, Result};
use crate::estimator::MinStatConfig;
use crate::net::{AdamConfig, NetworkDims, TrainOptions};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSettings {
    /// Speech WAV globs, relative to the config file.
    pub speech: Vec<String>,
    /// Noise WAV globs, relative to the config file.
    pub noise: Vec<String>,
    /// Train/validation/test fractions.
    pub split: [f64; 3],
}

impl Default for CorpusSettings {
    fn default() -> Self {
        Self {
            speech: Vec::new(),
            noise: Vec::new(),
            split: [0.7, 0.1, 0.2],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StftSettings {
    pub fft_size: usize,
    pub hop: usize,
}

impl Default for StftSettings {
    fn default() -> Self {
        Self {
            fft_size: 512,
            hop: 256,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSettings {
    /// Ground-truth recursive-averaging factor α.
    pub alpha: f64,
    /// Sequence length T.
    pub seq_len: usize,
    /// Window-end stride.
    pub stride: usize,
    pub train_snrs_db: Vec<f64>,
    pub eval_snrs_db: Vec<f64>,
    pub train_seconds_per_condition: f64,
    pub validation_seconds_per_condition: f64,
    pub test_seconds_per_condition: f64,
}

impl Default for DatasetSettings {
    fn default() -> Self {
        Self {
            alpha: 0.8,
            seq_len: 128,
            stride: 64,
            train_snrs_db: vec![-3.0, 3.0, 9.0, 15.0],
            eval_snrs_db: vec![0.0, 5.0, 10.0, 15.0],
            train_seconds_per_condition: 500.0,
            validation_seconds_per_condition: 45.0,
            test_seconds_per_condition: 90.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSettings {
    pub hidden1: usize,
    pub hidden2: usize,
}

impl Default for NetSettings {
    fn default() -> Self {
        Self {
            hidden1: 128,
            hidden2: 64,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    /// Global-norm gradient clip; 0 disables it.
    pub clip_norm: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 512,
            patience: 2,
            max_epochs: 100,
            clip_norm: 0.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSettings {
    /// Sliding-window moving step; 1 gives zero-latency estimation.
    pub hop_steps: usize,
    pub min_stat_beta: f64,
    pub min_stat_window: usize,
    pub min_stat_compensation: f64,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self {
            hop_steps: 32,
            min_stat_beta: 0.9,
            min_stat_window: 96,
            min_stat_compensation: 1.5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnhanceSettings {
    pub dd_alpha: f64,
    pub g_min_db: f64,
}

impl Default for EnhanceSettings {
    fn default() -> Self {
        Self {
            dd_alpha: 0.98,
            g_min_db: -25.0,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Master seed; omitted means "draw one from OS entropy and record it".
    pub seed: Option<u64>,
    /// Worker threads; 1 is the bit-exact reference mode.
    pub threads: Option<usize>,
    pub corpus: CorpusSettings,
    pub stft: StftSettings,
    pub dataset: DatasetSettings,
    pub net: NetSettings,
    pub train: TrainSettings,
    pub estimator: EstimatorSettings,
    pub enhance: EnhanceSettings,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| Error::Config(format!("cannot parse {}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("cannot serialize settings: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            fft_size: self.stft.fft_size,
            hop: self.stft.hop,
            alpha: self.dataset.alpha,
            seq_len: self.dataset.seq_len,
            stride: self.dataset.stride,
        }
    }

    pub fn network_dims(&self) -> NetworkDims {
        NetworkDims::new(3, self.net.hidden1, self.net.hidden2)
    }

    pub fn train_options(&self, seed: u64) -> TrainOptions {
        TrainOptions {
            adam: AdamConfig {
                learning_rate: self.train.learning_rate,
                ..AdamConfig::default()
            },
            batch_size: self.train.batch_size,
            patience: self.train.patience,
            max_epochs: self.train.max_epochs,
            seed,
            clip_norm: (self.train.clip_norm > 0.0).then_some(self.train.clip_norm),
            threads: self.threads.unwrap_or(1),
            initial_params: None,
        }
    }

    pub fn min_stat_config(&self) -> MinStatConfig {
        MinStatConfig {
            beta: self.estimator.min_stat_beta,
            window: self.estimator.min_stat_window,
            compensation: self.estimator.min_stat_compensation,
        }
    }

    pub fn enhance_config(&self) -> EnhanceConfig {
        EnhanceConfig {
            dd_alpha: self.enhance.dd_alpha,
            g_min: 10f64.powf(self.enhance.g_min_db / 20.0),
        }
    }
}
