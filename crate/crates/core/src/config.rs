//! Flat run configuration shared by every stage.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkpoint::{sha256, ConfigHash};
use crate::classifier::{ClassifierDims, ClassifierTrainConfig, UndersampleConfig};
use crate::corpus::PreprocessConfig;
use crate::summarizer::{DecodeConfig, DecodeMode, SummarizerDims, TrainConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Value(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeStrategy {
    Greedy,
    Beam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    // summarizer
    pub hidden_dim: usize,
    pub emb_dim: usize,
    /// Vocabulary cap, specials excluded.
    pub vocab_size: usize,
    pub lr: f64,
    pub clip_norm: f64,
    pub coverage_lambda: f64,
    pub coverage_from_step: Option<usize>,
    pub batch_size: usize,
    pub epochs: usize,
    pub finetune_lr: f64,
    pub finetune_epochs: usize,
    pub decode: DecodeStrategy,
    pub beam_size: usize,
    pub max_decode_len: usize,
    // corpus
    pub max_src_len: usize,
    pub min_summary_len: usize,
    // classifier
    pub cls_emb_dim: usize,
    pub cls_hidden_dim: usize,
    pub cls_lr: f64,
    pub cls_min_count: usize,
    pub cls_epochs: usize,
    pub cls_batch_size: usize,
    pub target_precision: f64,
    pub tau: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            hidden_dim: 256,
            emb_dim: 128,
            vocab_size: 50_000,
            lr: 0.15,
            clip_norm: 2.0,
            coverage_lambda: 1.0,
            coverage_from_step: None,
            batch_size: 16,
            epochs: 10,
            finetune_lr: 0.05,
            finetune_epochs: 2,
            decode: DecodeStrategy::Beam,
            beam_size: 4,
            max_decode_len: 120,
            max_src_len: 400,
            min_summary_len: 70,
            cls_emb_dim: 256,
            cls_hidden_dim: 256,
            cls_lr: 0.01,
            cls_min_count: 2,
            cls_epochs: 20,
            cls_batch_size: 2,
            target_precision: 0.8,
            tau: 0.8,
        }
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("hidden_dim", self.hidden_dim),
            ("emb_dim", self.emb_dim),
            ("batch_size", self.batch_size),
            ("beam_size", self.beam_size),
            ("max_decode_len", self.max_decode_len),
            ("max_src_len", self.max_src_len),
            ("cls_emb_dim", self.cls_emb_dim),
            ("cls_hidden_dim", self.cls_hidden_dim),
            ("cls_batch_size", self.cls_batch_size),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(ConfigError::Value(format!("{k} must be positive")));
        }
        if !(self.lr > 0.0 && self.finetune_lr > 0.0 && self.cls_lr > 0.0 && self.clip_norm > 0.0) {
            return Err(ConfigError::Value("learning rates and clip_norm must be positive".into()));
        }
        if self.coverage_lambda < 0.0 {
            return Err(ConfigError::Value("coverage_lambda must be non-negative".into()));
        }
        Ok(())
    }

    /// Canonical JSON (fields in declaration order).
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON.
    pub fn hash(&self) -> ConfigHash {
        sha256(self.to_json().as_bytes())
    }

    pub fn summarizer_dims(&self, vocab_size: usize) -> SummarizerDims {
        SummarizerDims { vocab_size, emb_dim: self.emb_dim, hidden_dim: self.hidden_dim }
    }

    pub fn classifier_dims(&self, vocab_size: usize) -> ClassifierDims {
        ClassifierDims { vocab_size, emb_dim: self.cls_emb_dim, hidden_dim: self.cls_hidden_dim }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            clip_norm: self.clip_norm,
            coverage_lambda: self.coverage_lambda,
            coverage_from_step: self.coverage_from_step,
            batch_size: self.batch_size,
        }
    }

    pub fn finetune_config(&self) -> TrainConfig {
        TrainConfig { lr: self.finetune_lr, ..self.train_config() }
    }

    /// Decoding settings; coverage is on when training ever enabled it.
    pub fn decode_config(&self) -> DecodeConfig {
        DecodeConfig {
            mode: match self.decode {
                DecodeStrategy::Greedy => DecodeMode::Greedy,
                DecodeStrategy::Beam => DecodeMode::Beam(self.beam_size),
            },
            max_decode_len: self.max_decode_len,
            use_coverage: self.coverage_from_step.is_some(),
            pgen_override: None,
        }
    }

    pub fn classifier_train_config(&self) -> ClassifierTrainConfig {
        ClassifierTrainConfig {
            epochs: self.cls_epochs,
            lr: self.cls_lr,
            batch_size: self.cls_batch_size,
            seed: self.seed,
            select_best: false,
        }
    }

    pub fn undersample_config(&self) -> UndersampleConfig {
        UndersampleConfig {
            target_precision: self.target_precision,
            train: self.classifier_train_config(),
            ..Default::default()
        }
    }

    pub fn preprocess_config(&self) -> PreprocessConfig {
        PreprocessConfig { max_src_len: self.max_src_len, min_summary_len: self.min_summary_len }
    }
}
