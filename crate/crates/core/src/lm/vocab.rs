use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;

pub const EOS: &str = "<eos>";
pub const UNK: &str = "<unk>";
pub const EOS_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// Dense token ids. `<eos>` is 0, `<unk>` is 1, then corpus types by
/// descending count with ties in order of first occurrence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(&t.as_ref().to_lowercase())).collect()
    }
}

/// Builds the vocabulary over case-folded forms; types seen fewer than
/// `min_count` times map to `<unk>`.
pub fn build_vocab(corpus: &Corpus, min_count: usize) -> Vocab {
    let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
    let mut order = 0;
    for tok in corpus.sentences.iter().flat_map(|s| &s.tokens) {
        let entry = counts.entry(tok.lower.as_str()).or_insert_with(|| {
            order += 1;
            (0, order)
        });
        entry.0 += 1;
    }
    let mut kept: Vec<(&str, usize, usize)> = counts
        .into_iter()
        .filter(|&(t, (c, _))| c >= min_count && t != EOS && t != UNK)
        .map(|(t, (c, first))| (t, c, first))
        .collect();
    kept.sort_by_key(|&(_, c, first)| (std::cmp::Reverse(c), first));
    let mut tokens = vec![EOS.to_string(), UNK.to_string()];
    tokens.extend(kept.into_iter().map(|(t, _, _)| t.to_string()));
    Vocab::from(tokens)
}

/// Flattens a corpus into ids with `<eos>` after every sentence.
pub fn flatten(corpus: &Corpus, vocab: &Vocab) -> Vec<usize> {
    let mut ids = Vec::with_capacity(corpus.token_count + corpus.len());
    for s in &corpus.sentences {
        ids.extend(s.tokens.iter().map(|t| vocab.id(&t.lower)));
        ids.push(EOS_ID);
    }
    ids
}
