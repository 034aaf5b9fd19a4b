//! Licensor-to-NPI linking over dependency trees, corpus scans and
//! per-context frequency tables.
//!
//! An NPI is linked to the licensor that precedes it linearly and is closest
//! to it in the undirected dependency tree. Multiword spans are anchored at
//! their head-most token.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Sentence};
use crate::lexicon::{find_matches, ContextType, EntryKind, Lexicon, Match};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScopeError {
    #[error("token index {index} out of range for a sentence of {len} tokens")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("corpus has no dependency parses; provide CoNLL-U input to scan for licensing")]
    Unparsed,
    #[error("gold occurrence list is empty, selection precision is undefined")]
    EmptyGold,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LicensedOccurrence {
    pub sentence_id: usize,
    pub npi: Match,
    pub licensor: Match,
    pub context: ContextType,
    pub tree_distance: usize,
}

/// Undirected path length between tokens `i` and `j` (0-based), or `None`
/// when they lie in different trees of the forest.
pub fn tree_distance(sentence: &Sentence, i: usize, j: usize) -> Result<Option<usize>, ScopeError> {
    let len = sentence.len();
    for index in [i, j] {
        if index >= len {
            return Err(ScopeError::IndexOutOfRange { index, len });
        }
    }
    Ok(distances_from(sentence, i)[j])
}

/// BFS distances from `source` to every token.
pub fn distances_from(sentence: &Sentence, source: usize) -> Vec<Option<usize>> {
    let adjacency = adjacency(sentence);
    let mut dist = vec![None; sentence.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let d = dist[u].unwrap_or(0);
        for &v in &adjacency[u] {
            if dist[v].is_none() {
                dist[v] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

fn adjacency(sentence: &Sentence) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); sentence.len()];
    for i in 0..sentence.len() {
        if let Some(h) = sentence.head_of(i) {
            adj[i].push(h);
            adj[h].push(i);
        }
    }
    adj
}

/// The token of `start..end` whose head lies outside the span; leftmost if
/// several qualify, `start` if none does.
pub fn span_anchor(sentence: &Sentence, start: usize, end: usize) -> usize {
    (start..end)
        .find(|&i| match sentence.head_of(i) {
            None => true,
            Some(h) => h < start || h >= end,
        })
        .unwrap_or(start)
}

/// Assigns each NPI match at most one licensor: the linearly preceding,
/// tree-reachable licensor at minimal tree distance. Ties go to the smallest
/// linear distance, then to the leftmost licensor.
pub fn link_licensors(sentence: &Sentence, matches: &[Match]) -> Vec<LicensedOccurrence> {
    let licensors: Vec<(&Match, usize)> = matches
        .iter()
        .filter(|m| !m.kind.is_npi())
        .map(|m| (m, span_anchor(sentence, m.start, m.end)))
        .collect();
    if licensors.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for npi in matches.iter().filter(|m| m.kind.is_npi()) {
        let anchor = span_anchor(sentence, npi.start, npi.end);
        let dist = distances_from(sentence, anchor);
        let best = licensors
            .iter()
            .filter(|(lic, _)| lic.start < npi.start)
            .filter_map(|&(lic, lic_anchor)| match dist[lic_anchor] {
                Some(d) if d >= 1 => Some((d, npi.start - lic.start, lic.start, lic)),
                _ => None,
            })
            .min_by_key(|&(d, linear, start, _)| (d, linear, start));
        if let Some((d, _, _, lic)) = best {
            let EntryKind::Licensor(context) = lic.kind else {
                unreachable!("licensor list holds only licensor matches")
            };
            out.push(LicensedOccurrence {
                sentence_id: sentence.id,
                npi: *npi,
                licensor: *lic,
                context,
                tree_distance: d,
            });
        }
    }
    out
}

/// Per-context occurrence counts and rates per 100k sentences.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub counts: [u64; 9],
    pub sentence_count: u64,
}

impl FrequencyTable {
    pub fn from_occurrences(occurrences: &[LicensedOccurrence], sentence_count: usize) -> Self {
        let mut counts = [0u64; 9];
        for occ in occurrences {
            counts[occ.context.index()] += 1;
        }
        FrequencyTable {
            counts,
            sentence_count: sentence_count as u64,
        }
    }

    pub fn count(&self, context: ContextType) -> u64 {
        self.counts[context.index()]
    }

    /// `round(count · 100000 / sentence_count)`, halves rounded up; 0 for an
    /// empty corpus.
    pub fn per_100k(&self, context: ContextType) -> u64 {
        if self.sentence_count == 0 {
            return 0;
        }
        let num = self.count(context) * 100_000;
        (2 * num + self.sentence_count) / (2 * self.sentence_count)
    }

    /// `context,count,per_100k` rows in context order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("context,count,per_100k\n");
        for ctx in ContextType::ALL {
            let _ = writeln!(out, "{},{},{}", ctx, self.count(ctx), self.per_100k(ctx));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanResult {
    pub occurrences: Vec<LicensedOccurrence>,
    pub frequencies: FrequencyTable,
}

pub fn scan_corpus(corpus: &Corpus, lexicon: &Lexicon) -> Result<ScanResult, ScopeError> {
    if !corpus.parsed {
        return Err(ScopeError::Unparsed);
    }
    let occurrences: Vec<LicensedOccurrence> = corpus
        .sentences
        .iter()
        .flat_map(|s| link_licensors(s, &find_matches(s, lexicon)))
        .collect();
    let frequencies = FrequencyTable::from_occurrences(&occurrences, corpus.len());
    Ok(ScanResult {
        occurrences,
        frequencies,
    })
}

/// Fraction of gold NPIs (on multi-licensor sentences) for which the linker
/// picks the gold licensor span.
pub fn licensor_selection_report(
    corpus: &Corpus,
    lexicon: &Lexicon,
    gold: &[LicensedOccurrence],
) -> Result<f64, ScopeError> {
    if gold.is_empty() {
        return Err(ScopeError::EmptyGold);
    }
    let mut correct = 0usize;
    for g in gold {
        let sentence = corpus
            .sentences
            .get(g.sentence_id)
            .ok_or(ScopeError::IndexOutOfRange {
                index: g.sentence_id,
                len: corpus.len(),
            })?;
        let predicted = link_licensors(sentence, &find_matches(sentence, lexicon));
        let hit = predicted.iter().any(|p| {
            (p.npi.start, p.npi.end) == (g.npi.start, g.npi.end)
                && (p.licensor.start, p.licensor.end) == (g.licensor.start, g.licensor.end)
        });
        if hit {
            correct += 1;
        }
    }
    Ok(correct as f64 / gold.len() as f64)
}

/// Span of an occurrence record on disk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanRecord {
    pub start: usize,
    pub end: usize,
    pub phrase: String,
}

/// JSON-lines form of a [`LicensedOccurrence`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccurrenceRecord {
    pub sentence_id: usize,
    pub npi: SpanRecord,
    pub licensor: SpanRecord,
    pub context: ContextType,
    pub tree_distance: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub gold: bool,
}

impl OccurrenceRecord {
    pub fn new(occ: &LicensedOccurrence, corpus: &Corpus, gold: bool) -> Self {
        let span = |m: &Match| {
            let tokens = &corpus.sentences[occ.sentence_id].tokens[m.start..m.end];
            SpanRecord {
                start: m.start,
                end: m.end,
                phrase: tokens
                    .iter()
                    .map(|t| t.form.as_str())
                    .collect::<Vec<_>>()
                    .join(" "),
            }
        };
        OccurrenceRecord {
            sentence_id: occ.sentence_id,
            npi: span(&occ.npi),
            licensor: span(&occ.licensor),
            context: occ.context,
            tree_distance: occ.tree_distance,
            gold,
        }
    }
}

pub fn write_occurrences_jsonl(records: &[OccurrenceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("occurrence records serialize"));
        out.push('\n');
    }
    out
}

pub fn read_occurrences_jsonl(text: &str) -> Result<Vec<OccurrenceRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
