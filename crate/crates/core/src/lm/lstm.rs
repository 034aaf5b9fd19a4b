//! Multi-layer LSTM with a hand-written backward pass.
//!
//! Activations are laid out time-major: row `t * batch + b` holds time step
//! `t` of sequence `b`. Gate blocks within a `4H` row are ordered input,
//! forget, cell candidate, output.

use ndarray::{s, Array1, Array2, ArrayViewD, ArrayViewMutD, Axis, NdFloat};
use num_traits::FromPrimitive;
use rand::Rng;

/// Floating-point width used for parameters and activations.
pub trait Real: NdFloat + FromPrimitive {
    /// Bytes per value in checkpoint files.
    const WIDTH: u8;
    fn push_le(self, out: &mut Vec<u8>);
    fn from_le(bytes: &[u8]) -> Self;
}

impl Real for f32 {
    const WIDTH: u8 = 4;
    fn push_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn from_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }
}

impl Real for f64 {
    const WIDTH: u8 = 8;
    fn push_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn from_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }
}

fn real<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("representable")
}

fn sigmoid<F: Real>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<F> {
    /// `4H × input`
    pub w_ih: Array2<F>,
    /// `4H × H`
    pub w_hh: Array2<F>,
    /// `4H`
    pub bias: Array1<F>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams<F> {
    /// `V × E`
    pub embedding: Array2<F>,
    pub layers: Vec<LayerParams<F>>,
    /// `V × H`
    pub decoder_w: Array2<F>,
    /// `V`
    pub decoder_b: Array1<F>,
}

impl<F: Real> LstmParams<F> {
    /// Weights uniform in `[-range, range]`, biases zero except the forget
    /// gate, which starts at +1.
    pub fn init<R: Rng>(
        vocab: usize,
        embed: usize,
        hidden: usize,
        layers: usize,
        range: f64,
        rng: &mut R,
    ) -> Self {
        let mut uniform = |rows: usize, cols: usize| {
            Array2::from_shape_fn((rows, cols), |_| real::<F>(rng.gen_range(-range..=range)))
        };
        let embedding = uniform(vocab, embed);
        let layers = (0..layers)
            .map(|l| {
                let input = if l == 0 { embed } else { hidden };
                let w_ih = uniform(4 * hidden, input);
                let w_hh = uniform(4 * hidden, hidden);
                let mut bias = Array1::zeros(4 * hidden);
                bias.slice_mut(s![hidden..2 * hidden]).fill(F::one());
                LayerParams { w_ih, w_hh, bias }
            })
            .collect();
        let decoder_w = uniform(vocab, hidden);
        LstmParams {
            embedding,
            layers,
            decoder_w,
            decoder_b: Array1::zeros(vocab),
        }
    }

    pub fn zeros_like(&self) -> Self {
        LstmParams {
            embedding: Array2::zeros(self.embedding.raw_dim()),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    w_ih: Array2::zeros(l.w_ih.raw_dim()),
                    w_hh: Array2::zeros(l.w_hh.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect(),
            decoder_w: Array2::zeros(self.decoder_w.raw_dim()),
            decoder_b: Array1::zeros(self.decoder_b.raw_dim()),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.nrows()
    }

    pub fn embed_dim(&self) -> usize {
        self.embedding.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.decoder_w.ncols()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Named views in a fixed order (the checkpoint order).
    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, F>)> {
        let mut out = vec![("embedding".to_string(), self.embedding.view().into_dyn())];
        for (l, layer) in self.layers.iter().enumerate() {
            out.push((format!("layer{l}.w_ih"), layer.w_ih.view().into_dyn()));
            out.push((format!("layer{l}.w_hh"), layer.w_hh.view().into_dyn()));
            out.push((format!("layer{l}.bias"), layer.bias.view().into_dyn()));
        }
        out.push(("decoder.w".to_string(), self.decoder_w.view().into_dyn()));
        out.push(("decoder.b".to_string(), self.decoder_b.view().into_dyn()));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, F>)> {
        let mut out = vec![("embedding".to_string(), self.embedding.view_mut().into_dyn())];
        for (l, layer) in self.layers.iter_mut().enumerate() {
            out.push((format!("layer{l}.w_ih"), layer.w_ih.view_mut().into_dyn()));
            out.push((format!("layer{l}.w_hh"), layer.w_hh.view_mut().into_dyn()));
            out.push((format!("layer{l}.bias"), layer.bias.view_mut().into_dyn()));
        }
        out.push(("decoder.w".to_string(), self.decoder_w.view_mut().into_dyn()));
        out.push(("decoder.b".to_string(), self.decoder_b.view_mut().into_dyn()));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    /// Sum of squares of every value, accumulated in f64.
    pub fn squared_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect::<Vec<_>>())
            .map(|v| v * v)
            .sum()
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: F, other: &LstmParams<F>) {
        for ((_, mut dst), (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            dst.scaled_add(alpha, &src);
        }
    }

    pub fn scale(&mut self, factor: F) {
        for (_, mut t) in self.tensors_mut() {
            t.mapv_inplace(|v| v * factor);
        }
    }

    pub fn cast<G: Real>(&self) -> LstmParams<G> {
        let c2 = |a: &Array2<F>| a.mapv(|v| real::<G>(v.to_f64().unwrap_or(f64::NAN)));
        let c1 = |a: &Array1<F>| a.mapv(|v| real::<G>(v.to_f64().unwrap_or(f64::NAN)));
        LstmParams {
            embedding: c2(&self.embedding),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    w_ih: c2(&l.w_ih),
                    w_hh: c2(&l.w_hh),
                    bias: c1(&l.bias),
                })
                .collect(),
            decoder_w: c2(&self.decoder_w),
            decoder_b: c1(&self.decoder_b),
        }
    }
}

/// Hidden and cell state per layer, each `batch × H`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState<F> {
    pub h: Vec<Array2<F>>,
    pub c: Vec<Array2<F>>,
}

impl<F: Real> LstmState<F> {
    pub fn zeros(layers: usize, batch: usize, hidden: usize) -> Self {
        LstmState {
            h: vec![Array2::zeros((batch, hidden)); layers],
            c: vec![Array2::zeros((batch, hidden)); layers],
        }
    }
}

struct LayerCache<F> {
    /// Layer input after dropout, `TB × in`.
    input: Array2<F>,
    /// Inverted-dropout mask that produced `input`.
    mask: Option<Array2<F>>,
    /// Activated gates, `TB × 4H`.
    gates: Array2<F>,
    cells: Array2<F>,
    tanh_cells: Array2<F>,
    /// `h_{t-1}` for every row.
    h_prev: Array2<F>,
    c0: Array2<F>,
    hidden: Array2<F>,
}

/// Everything the backward pass needs from one forward pass.
pub struct ForwardPass<F> {
    seq_len: usize,
    batch: usize,
    tokens: Vec<usize>,
    layers: Vec<LayerCache<F>>,
    /// `TB × V` unnormalised scores.
    pub logits: Array2<F>,
    pub final_state: LstmState<F>,
}

impl<F> ForwardPass<F> {
    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

fn dropout_mask<F: Real, R: Rng>(shape: (usize, usize), p: f64, rng: &mut R) -> Array2<F> {
    let keep = real::<F>(1.0 / (1.0 - p));
    Array2::from_shape_fn(shape, |_| {
        if rng.gen::<f64>() < p {
            F::zero()
        } else {
            keep
        }
    })
}

/// Runs the network over `inputs` (`T × B` token ids) from `state`.
/// With `dropout = Some((p, rng))`, masks are drawn for the embedding output
/// and for the input of every layer above the first.
pub fn forward<F: Real, R: Rng>(
    params: &LstmParams<F>,
    inputs: &Array2<usize>,
    state: &LstmState<F>,
    mut dropout: Option<(f64, &mut R)>,
) -> ForwardPass<F> {
    let (seq_len, batch) = inputs.dim();
    let hidden = params.hidden_dim();
    let rows = seq_len * batch;
    let tokens: Vec<usize> = inputs.iter().copied().collect();

    let mut x = params.embedding.select(Axis(0), &tokens);
    let mut caches = Vec::with_capacity(params.num_layers());
    let mut final_state = LstmState {
        h: Vec::new(),
        c: Vec::new(),
    };
    for (l, layer) in params.layers.iter().enumerate() {
        let mask = match dropout.as_mut() {
            Some((p, rng)) if *p > 0.0 => {
                let m = dropout_mask::<F, R>(x.dim(), *p, rng);
                x *= &m;
                Some(m)
            }
            _ => None,
        };
        let mut gates = x.dot(&layer.w_ih.t());
        if !gates.is_standard_layout() {
            gates = gates.as_standard_layout().into_owned();
        }
        gates += &layer.bias;
        let mut cells = Array2::zeros((rows, hidden));
        let mut tanh_cells = Array2::zeros((rows, hidden));
        let mut h_prev = Array2::zeros((rows, hidden));
        let mut out = Array2::zeros((rows, hidden));
        let mut h_t = state.h[l].clone();
        let mut c_t = state.c[l].clone();
        for t in 0..seq_len {
            let block = t * batch..(t + 1) * batch;
            h_prev.slice_mut(s![block.clone(), ..]).assign(&h_t);
            let rec = h_t.dot(&layer.w_hh.t());
            let mut g_blk = gates.slice_mut(s![block.clone(), ..]);
            g_blk += &rec;
            for b in 0..batch {
                let r = t * batch + b;
                let mut g_row = g_blk.row_mut(b);
                let g = g_row.as_slice_mut().expect("contiguous gate row");
                for j in 0..hidden {
                    let ig = sigmoid(g[j]);
                    let fg = sigmoid(g[hidden + j]);
                    let cg = g[2 * hidden + j].tanh();
                    let og = sigmoid(g[3 * hidden + j]);
                    g[j] = ig;
                    g[hidden + j] = fg;
                    g[2 * hidden + j] = cg;
                    g[3 * hidden + j] = og;
                    let c = fg * c_t[[b, j]] + ig * cg;
                    let tc = c.tanh();
                    let h = og * tc;
                    c_t[[b, j]] = c;
                    h_t[[b, j]] = h;
                    cells[[r, j]] = c;
                    tanh_cells[[r, j]] = tc;
                    out[[r, j]] = h;
                }
            }
        }
        final_state.h.push(h_t);
        final_state.c.push(c_t);
        let next = out.clone();
        caches.push(LayerCache {
            input: x,
            mask,
            gates,
            cells,
            tanh_cells,
            h_prev,
            c0: state.c[l].clone(),
            hidden: out,
        });
        x = next;
    }
    let mut logits = x.dot(&params.decoder_w.t());
    logits += &params.decoder_b;
    ForwardPass {
        seq_len,
        batch,
        tokens,
        layers: caches,
        logits,
        final_state,
    }
}

/// Row-wise log-softmax, in f64.
pub fn log_softmax_rows<F: Real>(logits: &Array2<F>) -> Array2<f64> {
    let mut out = logits.mapv(|v| v.to_f64().unwrap_or(f64::NAN));
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

/// Mean cross-entropy over all rows and its gradient with respect to the
/// logits.
pub fn cross_entropy<F: Real>(logits: &Array2<F>, targets: &[usize]) -> (f64, Array2<F>) {
    let n = logits.nrows();
    let scale = F::one() / real::<F>(n as f64);
    let mut grad = logits.clone();
    let mut loss = 0.0;
    for (r, mut row) in grad.rows_mut().into_iter().enumerate() {
        let max = row.fold(F::neg_infinity(), |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
        let target = targets[r];
        loss -= (row[target].to_f64().unwrap_or(f64::NAN)).ln();
        row[target] -= F::one();
        row.mapv_inplace(|v| v * scale);
    }
    (loss / n as f64, grad)
}

/// Gradients of the loss with respect to every parameter, given the
/// gradient `dlogits` from [`cross_entropy`]. The incoming state is treated
/// as a constant (truncated backpropagation).
pub fn backward<F: Real>(
    params: &LstmParams<F>,
    pass: &ForwardPass<F>,
    dlogits: &Array2<F>,
) -> LstmParams<F> {
    let mut grads = params.zeros_like();
    let hidden = params.hidden_dim();
    let (seq_len, batch) = (pass.seq_len, pass.batch);
    let top = pass.layers.last().expect("at least one layer");

    grads.decoder_w = dlogits.t().dot(&top.hidden);
    grads.decoder_b = dlogits.sum_axis(Axis(0));
    let mut d_out = dlogits.dot(&params.decoder_w);

    for l in (0..params.num_layers()).rev() {
        let cache = &pass.layers[l];
        let layer = &params.layers[l];
        let mut d_gates = Array2::<F>::zeros((seq_len * batch, 4 * hidden));
        let mut dh_next = Array2::<F>::zeros((batch, hidden));
        let mut dc_next = Array2::<F>::zeros((batch, hidden));
        let one = F::one();
        for t in (0..seq_len).rev() {
            for b in 0..batch {
                let r = t * batch + b;
                let g = cache.gates.row(r);
                let g = g.as_slice().expect("contiguous gate row");
                let mut dg_row = d_gates.row_mut(r);
                let dg = dg_row.as_slice_mut().expect("contiguous gate row");
                for j in 0..hidden {
                    let (ig, fg, cg, og) = (g[j], g[hidden + j], g[2 * hidden + j], g[3 * hidden + j]);
                    let tc = cache.tanh_cells[[r, j]];
                    let c_prev = if t == 0 {
                        cache.c0[[b, j]]
                    } else {
                        cache.cells[[r - batch, j]]
                    };
                    let dh = d_out[[r, j]] + dh_next[[b, j]];
                    let d_o = dh * tc;
                    let dc = dh * og * (one - tc * tc) + dc_next[[b, j]];
                    dc_next[[b, j]] = dc * fg;
                    dg[j] = dc * cg * ig * (one - ig);
                    dg[hidden + j] = dc * c_prev * fg * (one - fg);
                    dg[2 * hidden + j] = dc * ig * (one - cg * cg);
                    dg[3 * hidden + j] = d_o * og * (one - og);
                }
            }
            let block = t * batch..(t + 1) * batch;
            dh_next = d_gates.slice(s![block, ..]).dot(&layer.w_hh);
        }
        let lg = &mut grads.layers[l];
        lg.w_hh = d_gates.t().dot(&cache.h_prev);
        lg.w_ih = d_gates.t().dot(&cache.input);
        lg.bias = d_gates.sum_axis(Axis(0));
        let mut d_input = d_gates.dot(&layer.w_ih);
        if let Some(mask) = &cache.mask {
            d_input *= mask;
        }
        if l == 0 {
            for (r, &tok) in pass.tokens.iter().enumerate() {
                let mut dst = grads.embedding.row_mut(tok);
                dst += &d_input.row(r);
            }
        } else {
            d_out = d_input;
        }
    }
    grads
}
