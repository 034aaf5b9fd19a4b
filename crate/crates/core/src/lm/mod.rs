//! Word-level LSTM language model trained from scratch, plus an add-alpha
//! bigram model behind the same [`LanguageModel`] interface.

mod batching;
mod bigram;
mod checkpoint;
mod config;
mod gradcheck;
mod lstm;
mod train;
mod vocab;

use thiserror::Error;

pub use batching::{Batch, BatchLayout};
pub use bigram::{train_bigram, BigramModel};
pub use checkpoint::{CheckpointMeta, CheckpointedModel};
pub use config::LmConfig;
pub use gradcheck::{
    analytic_gradient, batch_loss_f64, gradient_check, gradient_check_params, random_tiny_check, GradCheckReport, TinyCase,
    TINY_EPSILON, TINY_INIT_RANGE,
};
pub use lstm::{backward, cross_entropy, forward, log_softmax_rows, LayerParams, LstmParams, LstmState, Real};
pub use train::{
    batch_loss, clip_global_norm, evaluate_loss, perplexity, train, train_prepared, CollectCheckpoints,
    PreparedData, TrainHook, TrainLogRow, TrainRun,
};
pub use vocab::{build_vocab, flatten, Vocab, EOS, EOS_ID, UNK, UNK_ID};

#[derive(Debug, Error)]
pub enum LmError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("corpus is empty or too short to form a batch")]
    EmptyCorpus,
    #[error("loss became non-finite at step {step}")]
    NonFiniteLoss { step: u64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{0}")]
    Hook(String),
}

/// Anything that can score a phrase continuation.
pub trait LanguageModel {
    /// `Σ log P(phrase[k] | prefix, phrase[..k])`, evaluation mode.
    fn phrase_logprob(&self, prefix: &[String], phrase: &[String]) -> f64;

    fn phrase_logprobs(&self, queries: &[(&[String], &[String])]) -> Vec<f64> {
        queries
            .iter()
            .map(|(p, q)| self.phrase_logprob(p, q))
            .collect()
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for &M {
    fn phrase_logprob(&self, prefix: &[String], phrase: &[String]) -> f64 {
        (**self).phrase_logprob(prefix, phrase)
    }

    fn phrase_logprobs(&self, queries: &[(&[String], &[String])]) -> Vec<f64> {
        (**self).phrase_logprobs(queries)
    }
}
