//! Add-alpha smoothed bigram model, a cheap stand-in for the LSTM behind
//! the same query interface.

use std::collections::HashMap;

use super::vocab::{build_vocab, Vocab, EOS_ID};
use super::LanguageModel;
use crate::corpus::Corpus;

#[derive(Clone, Debug)]
pub struct BigramModel {
    pub vocab: Vocab,
    pub alpha: f64,
    pair_counts: HashMap<(usize, usize), u64>,
    history_counts: Vec<u64>,
}

/// Counts bigrams over sentences framed by `<eos>` on both sides.
pub fn train_bigram(corpus: &Corpus, alpha: f64) -> BigramModel {
    assert!(alpha > 0.0, "smoothing alpha must be positive");
    let vocab = build_vocab(corpus, 1);
    let mut pair_counts = HashMap::new();
    let mut history_counts = vec![0u64; vocab.len()];
    for s in &corpus.sentences {
        let mut prev = EOS_ID;
        for id in s.tokens.iter().map(|t| vocab.id(&t.lower)).chain([EOS_ID]) {
            *pair_counts.entry((prev, id)).or_insert(0) += 1;
            history_counts[prev] += 1;
            prev = id;
        }
    }
    BigramModel {
        vocab,
        alpha,
        pair_counts,
        history_counts,
    }
}

impl BigramModel {
    pub fn count(&self, prev: usize, next: usize) -> u64 {
        self.pair_counts.get(&(prev, next)).copied().unwrap_or(0)
    }

    pub fn history_count(&self, prev: usize) -> u64 {
        self.history_counts[prev]
    }

    /// `(count(prev, next) + α) / (count(prev) + α·|V|)`
    pub fn prob(&self, prev: usize, next: usize) -> f64 {
        let v = self.vocab.len() as f64;
        (self.count(prev, next) as f64 + self.alpha) / (self.history_counts[prev] as f64 + self.alpha * v)
    }
}

impl LanguageModel for BigramModel {
    fn phrase_logprob(&self, prefix: &[String], phrase: &[String]) -> f64 {
        let mut prev = self.vocab.encode(prefix).last().copied().unwrap_or(EOS_ID);
        let mut total = 0.0;
        for id in self.vocab.encode(phrase) {
            total += self.prob(prev, id).ln();
            prev = id;
        }
        total
    }
}
