//! Finite-difference verification of the backward pass.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::batching::Batch;
use super::lstm::{backward, cross_entropy, forward, LstmParams, LstmState};
use super::LmConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Max over parameters of |analytic − numeric| / max(|analytic|, |numeric|, 1e-12).
    pub max_rel_error: f64,
    /// Tensor and flat index where the max occurred.
    pub worst: (String, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Loss of `batch` from a zero state. Dropout masks come from a generator
/// reseeded on every call, so repeated evaluations see identical masks.
pub fn batch_loss_f64(params: &LstmParams<f64>, batch: &Batch, dropout: f64, mask_seed: u64) -> f64 {
    let state = LstmState::zeros(params.num_layers(), batch.batch_size(), params.hidden_dim());
    let mut rng = ChaCha8Rng::seed_from_u64(mask_seed);
    let pass = forward(params, &batch.inputs, &state, Some((dropout, &mut rng)));
    let targets: Vec<usize> = batch.targets.iter().copied().collect();
    cross_entropy(&pass.logits, &targets).0
}

/// Analytic gradient of [`batch_loss_f64`].
pub fn analytic_gradient(params: &LstmParams<f64>, batch: &Batch, dropout: f64, mask_seed: u64) -> LstmParams<f64> {
    let state = LstmState::zeros(params.num_layers(), batch.batch_size(), params.hidden_dim());
    let mut rng = ChaCha8Rng::seed_from_u64(mask_seed);
    let pass = forward(params, &batch.inputs, &state, Some((dropout, &mut rng)));
    let targets: Vec<usize> = batch.targets.iter().copied().collect();
    let (_, dlogits) = cross_entropy(&pass.logits, &targets);
    backward(params, &pass, &dlogits)
}

/// Compares the analytic gradient with the fourth-order central difference
/// `(8(f(x+ε) − f(x−ε)) − (f(x+2ε) − f(x−2ε))) / 12ε` for every parameter.
pub fn gradient_check_params(
    params: &LstmParams<f64>,
    batch: &Batch,
    dropout: f64,
    mask_seed: u64,
    epsilon: f64,
) -> GradCheckReport {
    let grads = analytic_gradient(params, batch, dropout, mask_seed);
    let grad_tensors: Vec<Vec<f64>> = grads
        .tensors()
        .into_iter()
        .map(|(_, t)| t.iter().copied().collect())
        .collect();
    let mut probe = params.clone();
    let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (String::new(), 0),
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for (ti, name) in names.iter().enumerate() {
        for idx in 0..grad_tensors[ti].len() {
            let original = nth_value(&mut probe, ti, idx, None);
            let mut at = |offset: f64| {
                nth_value(&mut probe, ti, idx, Some(original + offset));
                batch_loss_f64(&probe, batch, dropout, mask_seed)
            };
            let (p1, m1, p2, m2) = (at(epsilon), at(-epsilon), at(2.0 * epsilon), at(-2.0 * epsilon));
            nth_value(&mut probe, ti, idx, Some(original));
            let numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * epsilon);
            let analytic = grad_tensors[ti][idx];
            let denom = analytic.abs().max(numeric.abs()).max(1e-12);
            let rel = (analytic - numeric).abs() / denom;
            report.checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (name.clone(), idx);
                report.analytic = analytic;
                report.numeric = numeric;
            }
        }
    }
    report
}

fn nth_value(params: &mut LstmParams<f64>, tensor: usize, idx: usize, set: Option<f64>) -> f64 {
    let mut tensors = params.tensors_mut();
    let view = &mut tensors[tensor].1;
    let slot = view.iter_mut().nth(idx).expect("index within tensor");
    let old = *slot;
    if let Some(v) = set {
        *slot = v;
    }
    old
}

/// Builds a random model from `config` (double precision) and checks it on
/// `batch`. Dropout, when configured, uses fixed masks.
pub fn gradient_check(config: &LmConfig, vocab_size: usize, batch: &Batch, epsilon: f64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = LstmParams::<f64>::init(
        vocab_size,
        config.embed_dim,
        config.hidden_dim,
        config.layers,
        config.init_range,
        &mut rng,
    );
    gradient_check_params(&params, batch, config.dropout, config.seed.wrapping_add(1), epsilon)
}

/// Shape of one randomly drawn check; every dimension is at most 8.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TinyCase {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub layers: usize,
    pub seq_len: usize,
    pub batch: usize,
    pub dropout: f64,
}

impl TinyCase {
    pub fn draw(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TinyCase {
            vocab: rng.gen_range(2..=8),
            embed: rng.gen_range(1..=8),
            hidden: rng.gen_range(1..=8),
            layers: rng.gen_range(1..=2),
            seq_len: rng.gen_range(1..=6),
            batch: rng.gen_range(1..=3),
            dropout: if rng.gen_bool(0.5) { 0.0 } else { 0.3 },
        }
    }
}

/// Weight range and finite-difference step for random tiny checks.
pub const TINY_INIT_RANGE: f64 = 1.0;
pub const TINY_EPSILON: f64 = 3e-3;

/// Draws a [`TinyCase`] from `seed` and checks it on a random batch.
pub fn random_tiny_check(seed: u64) -> (TinyCase, GradCheckReport) {
    let case = TinyCase::draw(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let batch = Batch {
        inputs: Array2::from_shape_fn((case.seq_len, case.batch), |_| rng.gen_range(0..case.vocab)),
        targets: Array2::from_shape_fn((case.seq_len, case.batch), |_| rng.gen_range(0..case.vocab)),
    };
    let config = LmConfig {
        embed_dim: case.embed,
        hidden_dim: case.hidden,
        layers: case.layers,
        dropout: case.dropout,
        init_range: TINY_INIT_RANGE,
        seed,
        ..LmConfig::desk()
    };
    (case, gradient_check(&config, case.vocab, &batch, TINY_EPSILON))
}
