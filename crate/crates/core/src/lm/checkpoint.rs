//! Parameter snapshots, probability queries and the checkpoint container.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! magic    b"PLCK"
//! version  u32 = 2
//! width    u8  (4 = f32, 8 = f64)
//! step     u64
//! tokens   u64
//! loss     f64 (training loss at the snapshot)
//! config   u32 length + UTF-8 JSON
//! note     u32 length + UTF-8 (free-form annotation, may be empty)
//! vocab    u32 count, then u32 length + UTF-8 bytes per token
//! tensors  u32 count, then per tensor: u32 name length, name,
//!          u32 rank, u64 per dimension, values
//! ```

use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::lstm::{forward, log_softmax_rows, LayerParams, LstmParams, LstmState, Real};
use super::vocab::{Vocab, EOS_ID};
use super::{LanguageModel, LmConfig, LmError};

const MAGIC: &[u8; 4] = b"PLCK";
const VERSION: u32 = 2;

/// Immutable snapshot of a model during training.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointedModel<F> {
    pub step: u64,
    pub tokens_seen: u64,
    pub train_loss: f64,
    pub config: LmConfig,
    pub vocab: Arc<Vocab>,
    pub params: LstmParams<F>,
}

/// JSON sidecar written next to each checkpoint file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub step: u64,
    pub tokens_seen: u64,
    pub train_loss: f64,
}

impl<F: Real> CheckpointedModel<F> {
    pub fn meta(&self) -> CheckpointMeta {
        CheckpointMeta {
            step: self.step,
            tokens_seen: self.tokens_seen,
            train_loss: self.train_loss,
        }
    }

    /// Log-probabilities of every vocabulary item after `<eos> + prefix`.
    pub fn next_token_logprobs<S: AsRef<str>>(&self, prefix: &[S]) -> Vec<f64> {
        let mut ids = vec![EOS_ID];
        ids.extend(self.vocab.encode(prefix));
        let inputs = Array2::from_shape_vec((ids.len(), 1), ids).expect("column shape");
        let pass = forward::<F, rand_chacha::ChaCha8Rng>(
            &self.params,
            &inputs,
            &self.zero_state(1),
            None,
        );
        let lp = log_softmax_rows(&pass.logits);
        lp.row(lp.nrows() - 1).to_vec()
    }

    fn zero_state(&self, batch: usize) -> LstmState<F> {
        LstmState::zeros(self.params.num_layers(), batch, self.params.hidden_dim())
    }

    /// Summed phrase log-probabilities for sequences that all have the same
    /// prefix and phrase lengths, run as one batch.
    fn batch_logprobs(&self, seqs: &[(Vec<usize>, Vec<usize>)]) -> Vec<f64> {
        let (plen, qlen) = (seqs[0].0.len(), seqs[0].1.len());
        let steps = 1 + plen + qlen - 1;
        let batch = seqs.len();
        let inputs = Array2::from_shape_fn((steps, batch), |(t, b)| {
            let (p, q) = &seqs[b];
            match t {
                0 => EOS_ID,
                t if t <= plen => p[t - 1],
                t => q[t - 1 - plen],
            }
        });
        let pass = forward::<F, rand_chacha::ChaCha8Rng>(
            &self.params,
            &inputs,
            &self.zero_state(batch),
            None,
        );
        let lp = log_softmax_rows(&pass.logits);
        seqs.iter()
            .enumerate()
            .map(|(b, (_, q))| {
                q.iter()
                    .enumerate()
                    .map(|(k, &tok)| lp[[(plen + k) * batch + b, tok]])
                    .sum()
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_bytes_annotated("")
    }

    pub fn to_bytes_annotated(&self, note: &str) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(F::WIDTH);
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&self.tokens_seen.to_le_bytes());
        out.extend_from_slice(&self.train_loss.to_le_bytes());
        let config = serde_json::to_string(&self.config).expect("config serializes");
        push_str(&mut out, &config);
        push_str(&mut out, note);
        out.extend_from_slice(&(self.vocab.len() as u32).to_le_bytes());
        for tok in self.vocab.tokens() {
            push_str(&mut out, tok);
        }
        let tensors = self.params.tensors();
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (name, t) in tensors {
            push_str(&mut out, &name);
            out.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in t.iter() {
                v.push_le(&mut out);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LmError> {
        Self::from_bytes_annotated(bytes).map(|(model, _)| model)
    }

    /// Decodes a checkpoint together with its annotation.
    pub fn from_bytes_annotated(bytes: &[u8]) -> Result<(Self, String), LmError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(LmError::Checkpoint("bad magic bytes".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(LmError::Checkpoint(format!("unsupported version {version}")));
        }
        let width = r.take(1)?[0];
        if width != F::WIDTH {
            return Err(LmError::Checkpoint(format!(
                "checkpoint stores {width}-byte floats, expected {}",
                F::WIDTH
            )));
        }
        let step = r.u64()?;
        let tokens_seen = r.u64()?;
        let train_loss = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
        let config: LmConfig = serde_json::from_str(&r.string()?)
            .map_err(|e| LmError::Checkpoint(format!("config: {e}")))?;
        let note = r.string()?;
        let n_vocab = r.u32()? as usize;
        let tokens = (0..n_vocab).map(|_| r.string()).collect::<Result<Vec<_>, _>>()?;
        let n_tensors = r.u32()? as usize;
        let mut tensors = BTreeMap::new();
        for _ in 0..n_tensors {
            let name = r.string()?;
            let rank = r.u32()? as usize;
            let shape = (0..rank)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            let count: usize = shape.iter().product();
            let w = F::WIDTH as usize;
            let raw = r.take(count * w)?;
            let values: Vec<F> = raw.chunks_exact(w).map(F::from_le).collect();
            tensors.insert(name, (shape, values));
        }
        if r.pos != bytes.len() {
            return Err(LmError::Checkpoint("trailing bytes".into()));
        }
        let params = params_from_tensors(&mut tensors, config.layers)?;
        if params.vocab_size() != n_vocab {
            return Err(LmError::Checkpoint("vocabulary and embedding sizes differ".into()));
        }
        let model = CheckpointedModel {
            step,
            tokens_seen,
            train_loss,
            config,
            vocab: Arc::new(Vocab::from(tokens)),
            params,
        };
        Ok((model, note))
    }
}

impl<F: Real> LanguageModel for CheckpointedModel<F> {
    fn phrase_logprob(&self, prefix: &[String], phrase: &[String]) -> f64 {
        self.phrase_logprobs(&[(prefix, phrase)])[0]
    }

    /// Groups queries by shape and evaluates each group as one batch.
    fn phrase_logprobs(&self, queries: &[(&[String], &[String])]) -> Vec<f64> {
        let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        let encoded: Vec<(Vec<usize>, Vec<usize>)> = queries
            .iter()
            .map(|(p, q)| (self.vocab.encode(p), self.vocab.encode(q)))
            .collect();
        for (i, (p, q)) in encoded.iter().enumerate() {
            assert!(!q.is_empty(), "phrase must contain at least one token");
            groups.entry((p.len(), q.len())).or_default().push(i);
        }
        let mut out = vec![0.0; queries.len()];
        for idx in groups.values() {
            let seqs: Vec<_> = idx.iter().map(|&i| encoded[i].clone()).collect();
            for (&i, lp) in idx.iter().zip(self.batch_logprobs(&seqs)) {
                out[i] = lp;
            }
        }
        out
    }
}

fn push_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LmError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| LmError::Checkpoint("truncated file".into()))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, LmError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, LmError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String, LmError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| LmError::Checkpoint("invalid UTF-8".into()))
    }
}

type RawTensor<F> = (Vec<usize>, Vec<F>);

fn params_from_tensors<F: Real>(
    tensors: &mut BTreeMap<String, RawTensor<F>>,
    layers: usize,
) -> Result<LstmParams<F>, LmError> {
    let mut matrix = |name: &str| -> Result<Array2<F>, LmError> {
        let (shape, values) = tensors
            .remove(name)
            .ok_or_else(|| LmError::Checkpoint(format!("missing tensor {name}")))?;
        match shape.as_slice() {
            [r, c] => Array2::from_shape_vec((*r, *c), values)
                .map_err(|e| LmError::Checkpoint(format!("{name}: {e}"))),
            _ => Err(LmError::Checkpoint(format!("{name}: expected rank 2"))),
        }
    };
    let embedding = matrix("embedding")?;
    let mut layer_mats = Vec::new();
    for l in 0..layers {
        layer_mats.push((matrix(&format!("layer{l}.w_ih"))?, matrix(&format!("layer{l}.w_hh"))?));
    }
    let decoder_w = matrix("decoder.w")?;
    let mut vector = |name: &str| -> Result<Array1<F>, LmError> {
        let (shape, values) = tensors
            .remove(name)
            .ok_or_else(|| LmError::Checkpoint(format!("missing tensor {name}")))?;
        if shape.len() != 1 {
            return Err(LmError::Checkpoint(format!("{name}: expected rank 1")));
        }
        Ok(Array1::from(values))
    };
    let mut layers_out = Vec::new();
    for (l, (w_ih, w_hh)) in layer_mats.into_iter().enumerate() {
        let bias = vector(&format!("layer{l}.bias"))?;
        layers_out.push(LayerParams { w_ih, w_hh, bias });
    }
    let decoder_b = vector("decoder.b")?;
    if let Some(name) = tensors.keys().next() {
        return Err(LmError::Checkpoint(format!("unexpected tensor {name}")));
    }
    Ok(LstmParams {
        embedding,
        layers: layers_out,
        decoder_w,
        decoder_b,
    })
}
