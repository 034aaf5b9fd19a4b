//! Truncated-BPTT training with clipped SGD, validation-driven learning
//! rate decay and periodic checkpoints.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batching::{Batch, BatchLayout};
use super::checkpoint::CheckpointedModel;
use super::lstm::{backward, cross_entropy, forward, LstmParams, LstmState, Real};
use super::vocab::{build_vocab, flatten, Vocab};
use super::{LmConfig, LmError};
use crate::corpus::Corpus;

/// One row of the training log, written at every checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub step: u64,
    pub tokens_seen: u64,
    /// Mean training loss over the batches since the previous checkpoint.
    pub train_loss: f64,
    /// Most recent end-of-epoch validation loss.
    pub val_loss: Option<f64>,
    pub lr: f64,
}

impl TrainLogRow {
    pub const CSV_HEADER: &'static str = "step,tokens_seen,train_loss,val_loss,lr";

    pub fn csv_line(&self) -> String {
        let val = self.val_loss.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{}",
            self.step, self.tokens_seen, self.train_loss, val, self.lr
        )
    }
}

/// Receives every checkpoint as it is produced.
pub trait TrainHook<F> {
    fn on_checkpoint(&mut self, model: &CheckpointedModel<F>, row: &TrainLogRow) -> Result<(), LmError>;
}

/// Keeps every checkpoint in memory.
#[derive(Default)]
pub struct CollectCheckpoints<F> {
    pub checkpoints: Vec<CheckpointedModel<F>>,
}

impl<F: Real> TrainHook<F> for CollectCheckpoints<F> {
    fn on_checkpoint(&mut self, model: &CheckpointedModel<F>, _row: &TrainLogRow) -> Result<(), LmError> {
        self.checkpoints.push(model.clone());
        Ok(())
    }
}

impl<F, T: FnMut(&CheckpointedModel<F>, &TrainLogRow) -> Result<(), LmError>> TrainHook<F> for T {
    fn on_checkpoint(&mut self, model: &CheckpointedModel<F>, row: &TrainLogRow) -> Result<(), LmError> {
        self(model, row)
    }
}

#[derive(Clone, Debug)]
pub struct TrainRun<F> {
    pub final_model: CheckpointedModel<F>,
    pub log: Vec<TrainLogRow>,
    pub total_batches: u64,
    pub checkpoints_emitted: usize,
    pub layout: BatchLayout,
}

/// Training data after the vocabulary and validation split are fixed.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub vocab: Arc<Vocab>,
    pub train_stream: Vec<usize>,
    pub val_stream: Vec<usize>,
    /// Number of leading corpus sentences used for training.
    pub train_sentences: usize,
}

impl PreparedData {
    /// Builds the vocabulary on the whole corpus and holds out the last
    /// `val_fraction` of sentences.
    pub fn new(corpus: &Corpus, config: &LmConfig) -> Result<Self, LmError> {
        Self::with_vocab(corpus, config, Arc::new(build_vocab(corpus, config.min_count)))
    }

    pub fn with_vocab(corpus: &Corpus, config: &LmConfig, vocab: Arc<Vocab>) -> Result<Self, LmError> {
        if corpus.is_empty() {
            return Err(LmError::EmptyCorpus);
        }
        let n_val = (corpus.len() as f64 * config.val_fraction).floor() as usize;
        let n_train = corpus.len() - n_val;
        let train = Corpus::from_sentences(corpus.sentences[..n_train].to_vec(), corpus.parsed);
        let val = Corpus::from_sentences(corpus.sentences[n_train..].to_vec(), corpus.parsed);
        Ok(PreparedData {
            train_stream: flatten(&train, &vocab),
            val_stream: flatten(&val, &vocab),
            vocab,
            train_sentences: n_train,
        })
    }

    pub fn layout(&self, config: &LmConfig) -> BatchLayout {
        BatchLayout::new(self.train_stream.len(), config.batch_size, config.bptt_len)
    }
}

/// Trains from scratch. See [`train_prepared`].
pub fn train<F: Real>(
    corpus: &Corpus,
    config: &LmConfig,
    hook: &mut dyn TrainHook<F>,
) -> Result<TrainRun<F>, LmError> {
    let data = PreparedData::new(corpus, config)?;
    train_prepared(&data, config, hook)
}

/// Runs `config.epochs` epochs of truncated BPTT over the prepared stream.
/// A checkpoint is emitted every `checkpoint_every_batches` global steps
/// and after the last batch (plus one at step 0 if requested). The
/// trajectory depends only on the data and `config.seed`.
pub fn train_prepared<F: Real>(
    data: &PreparedData,
    config: &LmConfig,
    hook: &mut dyn TrainHook<F>,
) -> Result<TrainRun<F>, LmError> {
    config.validate()?;
    let layout = data.layout(config);
    let per_epoch = layout.batches_per_epoch();
    if per_epoch == 0 {
        return Err(LmError::EmptyCorpus);
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut params = LstmParams::<F>::init(
        data.vocab.len(),
        config.embed_dim,
        config.hidden_dim,
        config.layers,
        config.init_range,
        &mut init_rng,
    );

    let total_batches = (per_epoch * config.epochs) as u64;
    let every = config.checkpoint_every_batches as u64;
    let mut lr = config.base_lr;
    let mut best_val = f64::INFINITY;
    let mut last_val = None;
    let mut step = 0u64;
    let mut tokens_seen = 0u64;
    let mut loss_sum = 0.0;
    let mut loss_batches = 0usize;
    let mut log = Vec::new();
    let mut emitted = 0usize;

    let mut emit = |params: &LstmParams<F>, step, tokens_seen, train_loss, val_loss, lr, log: &mut Vec<TrainLogRow>| {
        let row = TrainLogRow {
            step,
            tokens_seen,
            train_loss,
            val_loss,
            lr,
        };
        let model = CheckpointedModel {
            step,
            tokens_seen,
            train_loss,
            config: config.clone(),
            vocab: data.vocab.clone(),
            params: params.clone(),
        };
        hook.on_checkpoint(&model, &row)?;
        log.push(row);
        emitted += 1;
        Ok::<CheckpointedModel<F>, LmError>(model)
    };

    if config.checkpoint_initial {
        emit(&params, 0, 0, f64::NAN, None, lr, &mut log)?;
    }
    let mut final_model = None;
    for epoch in 0..config.epochs {
        let mut state = LstmState::<F>::zeros(config.layers, config.batch_size, config.hidden_dim);
        for k in 0..per_epoch {
            let batch = layout.batch(&data.train_stream, k);
            let targets: Vec<usize> = batch.targets.iter().copied().collect();
            let pass = forward(
                &params,
                &batch.inputs,
                &state,
                Some((config.dropout, &mut dropout_rng)),
            );
            let (loss, dlogits) = cross_entropy(&pass.logits, &targets);
            step += 1;
            if !loss.is_finite() {
                return Err(LmError::NonFiniteLoss { step });
            }
            let mut grads = backward(&params, &pass, &dlogits);
            clip_global_norm(&mut grads, config.clip_norm);
            params.add_scaled(F::from_f64(-lr).expect("lr representable"), &grads);
            state = pass.final_state;
            tokens_seen += (batch.seq_len() * batch.batch_size()) as u64;
            loss_sum += loss;
            loss_batches += 1;

            let last = epoch + 1 == config.epochs && k + 1 == per_epoch;
            if step % every == 0 || last {
                let mean = loss_sum / loss_batches as f64;
                loss_sum = 0.0;
                loss_batches = 0;
                let model = emit(&params, step, tokens_seen, mean, last_val, lr, &mut log)?;
                if last {
                    final_model = Some(model);
                }
            }
        }
        if !data.val_stream.is_empty() {
            let val = evaluate_loss(&params, &data.val_stream, config)?;
            if let Some(v) = val {
                if v >= best_val {
                    lr /= config.lr_decay_factor;
                } else {
                    best_val = v;
                }
                last_val = Some(v);
            }
        }
    }
    Ok(TrainRun {
        final_model: final_model.expect("at least one batch ran"),
        log,
        total_batches,
        checkpoints_emitted: emitted,
        layout,
    })
}

/// Scales the gradient so its global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<F: Real>(grads: &mut LstmParams<F>, max_norm: f64) -> f64 {
    let norm = grads.squared_norm().sqrt();
    if norm > max_norm {
        grads.scale(F::from_f64(max_norm / norm).expect("representable"));
    }
    norm
}

/// Mean per-token cross-entropy of `stream` in evaluation mode, or `None`
/// when the stream is too short to form a batch.
pub fn evaluate_loss<F: Real>(
    params: &LstmParams<F>,
    stream: &[usize],
    config: &LmConfig,
) -> Result<Option<f64>, LmError> {
    let batch_size = config.batch_size.min(stream.len() / 2).max(1);
    let layout = BatchLayout::new(stream.len(), batch_size, config.bptt_len);
    let mut state = LstmState::<F>::zeros(config.layers, batch_size, params.hidden_dim());
    let (mut total, mut count) = (0.0, 0usize);
    for k in 0..layout.batches_per_epoch() {
        let batch = layout.batch(stream, k);
        let (loss, n) = batch_loss(params, &batch, &mut state);
        total += loss * n as f64;
        count += n;
    }
    if count == 0 {
        return Ok(None);
    }
    Ok(Some(total / count as f64))
}

/// Evaluation-mode loss of one batch, advancing `state`.
pub fn batch_loss<F: Real>(params: &LstmParams<F>, batch: &Batch, state: &mut LstmState<F>) -> (f64, usize) {
    let pass = forward::<F, ChaCha8Rng>(params, &batch.inputs, state, None);
    let targets: Vec<usize> = batch.targets.iter().copied().collect();
    let (loss, _) = cross_entropy(&pass.logits, &targets);
    *state = pass.final_state;
    (loss, targets.len())
}

/// Perplexity of a model on the given stream, evaluation mode.
pub fn perplexity<F: Real>(params: &LstmParams<F>, stream: &[usize], config: &LmConfig) -> Result<f64, LmError> {
    evaluate_loss(params, stream, config)?
        .map(f64::exp)
        .ok_or(LmError::EmptyCorpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize_plain;

    fn toy_corpus() -> Corpus {
        let lines: Vec<String> = (0..40)
            .map(|i| format!("w{} w{} w{} w{}", i % 7, (i + 1) % 7, (i * 3) % 5, i % 2))
            .collect();
        tokenize_plain(&lines.join("\n"))
    }

    fn tiny() -> LmConfig {
        LmConfig {
            embed_dim: 6,
            hidden_dim: 8,
            batch_size: 4,
            bptt_len: 5,
            epochs: 3,
            checkpoint_every_batches: 4,
            ..LmConfig::desk()
        }
    }

    #[test]
    fn checkpoint_schedule() {
        let corpus = toy_corpus();
        let config = tiny();
        let mut hook = CollectCheckpoints::<f32>::default();
        let run = train(&corpus, &config, &mut hook).unwrap();
        let every = config.checkpoint_every_batches as u64;
        assert_ne!(run.total_batches % every, 0, "fixture should not divide evenly");
        assert_eq!(
            hook.checkpoints.len() as u64,
            run.total_batches / every + 1
        );
        let steps: Vec<u64> = hook.checkpoints.iter().map(|c| c.step).collect();
        assert!(steps.windows(2).all(|w| w[0] < w[1]));
        assert!(steps.iter().all(|&s| s % every == 0 || s == run.total_batches));
        assert_eq!(run.final_model.step, run.total_batches);
        assert_eq!(run.log.len(), hook.checkpoints.len());
        assert!(hook.checkpoints.iter().all(|c| c.params.is_finite()));
    }

    #[test]
    fn schedule_with_even_division_and_initial_snapshot() {
        let corpus = toy_corpus();
        let data = PreparedData::new(&corpus, &tiny()).unwrap();
        let per_epoch = data.layout(&tiny()).batches_per_epoch();
        let config = LmConfig {
            checkpoint_every_batches: per_epoch,
            checkpoint_initial: true,
            ..tiny()
        };
        let mut hook = CollectCheckpoints::<f32>::default();
        let run = train_prepared(&data, &config, &mut hook).unwrap();
        let steps: Vec<u64> = hook.checkpoints.iter().map(|c| c.step).collect();
        let p = per_epoch as u64;
        assert_eq!(steps, vec![0, p, 2 * p, 3 * p]);
        assert_eq!(run.checkpoints_emitted, 4);
    }

    #[test]
    fn deterministic_given_seed() {
        let corpus = toy_corpus();
        let config = tiny();
        let a = train::<f32>(&corpus, &config, &mut CollectCheckpoints::default()).unwrap();
        let b = train::<f32>(&corpus, &config, &mut CollectCheckpoints::default()).unwrap();
        assert_eq!(a.final_model.to_bytes(), b.final_model.to_bytes());
        let c = train::<f32>(
            &corpus,
            &LmConfig { seed: 2, ..config },
            &mut CollectCheckpoints::default(),
        )
        .unwrap();
        assert_ne!(a.final_model.to_bytes(), c.final_model.to_bytes());
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let err = train::<f32>(&Corpus::default(), &tiny(), &mut CollectCheckpoints::default());
        assert!(matches!(err, Err(LmError::EmptyCorpus)));
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let config = LmConfig {
            base_lr: 1e30,
            clip_norm: 1e30,
            init_range: 50.0,
            ..tiny()
        };
        let err = train::<f32>(&toy_corpus(), &config, &mut CollectCheckpoints::default());
        assert!(matches!(err, Err(LmError::NonFiniteLoss { .. })), "{err:?}");
    }

    #[test]
    fn clipping_bounds_the_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut g = LstmParams::<f64>::init(5, 2, 3, 1, 1.0, &mut rng);
        let before = clip_global_norm(&mut g, 0.25);
        assert!(before > 0.25);
        assert!((g.squared_norm().sqrt() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn full_batch_descent() {
        let corpus = toy_corpus();
        let config = LmConfig {
            dropout: 0.0,
            val_fraction: 0.0,
            ..tiny()
        };
        let data = PreparedData::new(&corpus, &config).unwrap();
        let layout = data.layout(&config);
        let batch = layout.batch(&data.train_stream, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut params = LstmParams::<f64>::init(data.vocab.len(), 6, 8, 2, 0.1, &mut rng);
        let zero = LstmState::zeros(2, config.batch_size, 8);
        let targets: Vec<usize> = batch.targets.iter().copied().collect();
        let mut losses = Vec::new();
        for _ in 0..11 {
            let pass = forward::<f64, ChaCha8Rng>(&params, &batch.inputs, &zero, None);
            let (loss, dlogits) = cross_entropy(&pass.logits, &targets);
            losses.push(loss);
            let grads = backward(&params, &pass, &dlogits);
            params.add_scaled(-0.05, &grads);
        }
        assert!(losses.windows(2).all(|w| w[1] <= w[0]), "{losses:?}");
    }
}
