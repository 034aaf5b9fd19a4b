use serde::{Deserialize, Serialize};

use super::LmError;

/// Hyper-parameters of the recurrent language model and its training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub dropout: f64,
    pub batch_size: usize,
    pub bptt_len: usize,
    pub base_lr: f64,
    /// The learning rate is divided by this when validation loss stalls.
    pub lr_decay_factor: f64,
    pub epochs: usize,
    pub checkpoint_every_batches: usize,
    pub min_count: usize,
    pub seed: u64,
    /// Global gradient-norm clipping threshold.
    pub clip_norm: f64,
    /// Weights start uniform in `[-init_range, init_range]`.
    pub init_range: f64,
    /// Share of sentences held out for validation when no split is given.
    pub val_fraction: f64,
    /// Also emit a snapshot of the untrained model at step 0.
    pub checkpoint_initial: bool,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig::desk()
    }
}

impl LmConfig {
    /// The full-scale regime (650-dim, 40 epochs).
    pub fn paper() -> Self {
        LmConfig {
            embed_dim: 650,
            hidden_dim: 650,
            layers: 2,
            dropout: 0.1,
            batch_size: 64,
            bptt_len: 35,
            base_lr: 20.0,
            lr_decay_factor: 4.0,
            epochs: 40,
            checkpoint_every_batches: 100,
            min_count: 1,
            seed: 1111,
            clip_norm: 0.25,
            init_range: 0.1,
            val_fraction: 0.05,
            checkpoint_initial: false,
        }
    }

    /// A laptop-sized profile.
    pub fn desk() -> Self {
        LmConfig {
            embed_dim: 32,
            hidden_dim: 64,
            batch_size: 16,
            bptt_len: 20,
            base_lr: 1.0,
            epochs: 20,
            checkpoint_every_batches: 50,
            ..LmConfig::paper()
        }
    }

    pub fn profile(name: &str) -> Result<Self, LmError> {
        match name {
            "paper" => Ok(LmConfig::paper()),
            "desk" => Ok(LmConfig::desk()),
            other => Err(LmError::Config(format!("unknown profile {other:?}"))),
        }
    }

    pub fn validate(&self) -> Result<(), LmError> {
        let dims = [
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("layers", self.layers),
            ("batch_size", self.batch_size),
            ("bptt_len", self.bptt_len),
            ("epochs", self.epochs),
            ("checkpoint_every_batches", self.checkpoint_every_batches),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(LmError::Config(format!("{name} must be at least 1")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(LmError::Config("dropout must lie in [0, 1)".into()));
        }
        if !(self.base_lr > 0.0) {
            return Err(LmError::Config("base_lr must be positive".into()));
        }
        if !(self.lr_decay_factor > 1.0) {
            return Err(LmError::Config("lr_decay_factor must exceed 1".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(LmError::Config("val_fraction must lie in [0, 1)".into()));
        }
        if !(self.clip_norm > 0.0) || !(self.init_range > 0.0) {
            return Err(LmError::Config("clip_norm and init_range must be positive".into()));
        }
        Ok(())
    }
}
