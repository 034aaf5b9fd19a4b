//! NPI and licensor lexicons, and longest-match lookup of their phrases in
//! sentences.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Sentence;

/// The bundled list of 160 negative polarity items.
pub const BUNDLED_NPIS: &str = include_str!("../data/npis.tsv");
/// The bundled licensor-to-context mapping.
pub const BUNDLED_LICENSORS: &str = include_str!("../data/licensors.tsv");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LexiconError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("line {line}: phrase {phrase:?} already listed as {existing}, now as {new}")]
    Conflict {
        line: usize,
        phrase: String,
        existing: String,
        new: String,
    },
    #[error("unknown context label {0:?}")]
    UnknownContext(String),
}

/// The nine licensing contexts, in ascending corpus frequency.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextType {
    SimpleQuestions,
    Adverbs,
    Questions,
    Superlative,
    Only,
    Conditional,
    Quantifier,
    DeterminerNegation,
    SententialNegation,
}

impl ContextType {
    pub const ALL: [ContextType; 9] = [
        ContextType::SimpleQuestions,
        ContextType::Adverbs,
        ContextType::Questions,
        ContextType::Superlative,
        ContextType::Only,
        ContextType::Conditional,
        ContextType::Quantifier,
        ContextType::DeterminerNegation,
        ContextType::SententialNegation,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ContextType::SimpleQuestions => "simple_questions",
            ContextType::Adverbs => "adverbs",
            ContextType::Questions => "questions",
            ContextType::Superlative => "superlative",
            ContextType::Only => "only",
            ContextType::Conditional => "conditional",
            ContextType::Quantifier => "quantifier",
            ContextType::DeterminerNegation => "determiner_negation",
            ContextType::SententialNegation => "sentential_negation",
        }
    }

    /// Position in [`ContextType::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ContextType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ContextType {
    type Err = LexiconError;

    /// Accepts the snake_case labels, ignoring case, spaces and hyphens.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, '_' | '-' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        ContextType::ALL
            .into_iter()
            .find(|c| c.label().replace('_', "") == norm)
            .ok_or_else(|| LexiconError::UnknownContext(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntryKind {
    Npi,
    Licensor(ContextType),
}

impl EntryKind {
    pub fn is_npi(self) -> bool {
        matches!(self, EntryKind::Npi)
    }

    pub fn context(self) -> Option<ContextType> {
        match self {
            EntryKind::Npi => None,
            EntryKind::Licensor(c) => Some(c),
        }
    }
}

impl fmt::Display for EntryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntryKind::Npi => f.write_str("npi"),
            EntryKind::Licensor(c) => write!(f, "licensor:{c}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    /// Lowercased tokens, never empty.
    pub phrase: Vec<String>,
    pub kind: EntryKind,
    /// Only matches at the first token of a sentence.
    #[serde(default)]
    pub anchored: bool,
}

impl LexiconEntry {
    pub fn text(&self) -> String {
        self.phrase.join(" ")
    }
}

/// A lexicon phrase found in a sentence, spanning tokens `start..end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Match {
    pub sentence_id: usize,
    pub start: usize,
    pub end: usize,
    /// Index into [`Lexicon::entries`].
    pub entry: usize,
    pub kind: EntryKind,
}

impl Match {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    by_phrase: HashMap<Vec<String>, usize>,
    /// First token → entry indices, longest phrase first.
    by_first: HashMap<String, Vec<usize>>,
}

impl Lexicon {
    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn entry(&self, idx: usize) -> &LexiconEntry {
        &self.entries[idx]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The bundled NPI list and licensor mapping, merged.
    pub fn bundled() -> Self {
        let mut lex = load_lexicon(BUNDLED_NPIS).expect("bundled NPI list is well-formed");
        lex.extend(&load_lexicon(BUNDLED_LICENSORS).expect("bundled licensor list is well-formed"))
            .expect("bundled lists do not conflict");
        lex
    }

    pub fn lookup(&self, phrase: &[String]) -> Option<&LexiconEntry> {
        self.by_phrase.get(phrase).map(|&i| &self.entries[i])
    }

    /// Adds an entry; exact duplicates are ignored, a phrase with a different
    /// kind or anchoring is a conflict.
    pub fn insert(&mut self, entry: LexiconEntry) -> Result<(), LexiconError> {
        self.insert_at(entry, 0)
    }

    fn insert_at(&mut self, entry: LexiconEntry, line: usize) -> Result<(), LexiconError> {
        if let Some(&idx) = self.by_phrase.get(&entry.phrase) {
            let existing = &self.entries[idx];
            if existing.kind == entry.kind && existing.anchored == entry.anchored {
                return Ok(());
            }
            return Err(LexiconError::Conflict {
                line,
                phrase: entry.text(),
                existing: existing.kind.to_string(),
                new: entry.kind.to_string(),
            });
        }
        let idx = self.entries.len();
        self.by_phrase.insert(entry.phrase.clone(), idx);
        let bucket = self.by_first.entry(entry.phrase[0].clone()).or_default();
        bucket.push(idx);
        let entries = &self.entries;
        let new_len = entry.phrase.len();
        bucket.sort_by_key(|&i| {
            let len = if i == idx { new_len } else { entries[i].phrase.len() };
            (std::cmp::Reverse(len), i)
        });
        self.entries.push(entry);
        Ok(())
    }

    pub fn extend(&mut self, other: &Lexicon) -> Result<(), LexiconError> {
        for e in &other.entries {
            self.insert(e.clone())?;
        }
        Ok(())
    }

    /// Licensor phrases grouped by context.
    pub fn licensors_of(&self, context: ContextType) -> impl Iterator<Item = &LexiconEntry> {
        self.entries
            .iter()
            .filter(move |e| e.kind == EntryKind::Licensor(context))
    }

    /// Longest entry of the given category (NPI or licensor) matching at `start`.
    fn longest_at(&self, tokens: &[&str], start: usize, npi: bool) -> Option<usize> {
        let bucket = self.by_first.get(tokens[start])?;
        bucket.iter().copied().find(|&idx| {
            let e = &self.entries[idx];
            e.kind.is_npi() == npi
                && (!e.anchored || start == 0)
                && start + e.phrase.len() <= tokens.len()
                && e.phrase
                    .iter()
                    .zip(&tokens[start..])
                    .all(|(p, t)| p == t)
        })
    }
}

/// Parses `phrase<TAB>kind[<TAB>context]` lines. Blank lines and lines
/// starting with `#` are ignored.
pub fn load_lexicon(source: &str) -> Result<Lexicon, LexiconError> {
    let mut lex = Lexicon::default();
    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        let format_err = |message: String| LexiconError::Format {
            line: line_no,
            message,
        };
        let (phrase_col, kind_col) = match cols.as_slice() {
            [p, k] | [p, k, _] => (*p, *k),
            _ => return Err(format_err(format!("expected 2 or 3 columns, found {}", cols.len()))),
        };
        let (anchored, phrase_col) = match phrase_col.strip_prefix('^') {
            Some(rest) => (true, rest),
            None => (false, phrase_col),
        };
        let phrase: Vec<String> = phrase_col
            .split_whitespace()
            .map(str::to_lowercase)
            .collect();
        if phrase.is_empty() {
            return Err(format_err("empty phrase".into()));
        }
        let kind = match (kind_col.to_lowercase().as_str(), cols.get(2)) {
            ("npi", None) => EntryKind::Npi,
            ("npi", Some(_)) => return Err(format_err("npi entries take no context".into())),
            ("licensor", Some(ctx)) => {
                let ctx = ctx.parse::<ContextType>().map_err(|_| {
                    format_err(format!("unknown context label {ctx:?}"))
                })?;
                EntryKind::Licensor(ctx)
            }
            ("licensor", None) => return Err(format_err("licensor without context label".into())),
            (other, _) => return Err(format_err(format!("unknown kind {other:?}"))),
        };
        lex.insert_at(
            LexiconEntry {
                phrase,
                kind,
                anchored,
            },
            line_no,
        )?;
    }
    Ok(lex)
}

/// All maximal lexicon matches in a sentence, ordered by start position
/// (licensors before NPIs at the same start).
///
/// Within each category the longest phrase starting at a position wins, and
/// a match starting inside an already chosen match of the same category is
/// dropped. NPI and licensor matches may overlap each other.
pub fn find_matches(sentence: &Sentence, lexicon: &Lexicon) -> Vec<Match> {
    let tokens: Vec<&str> = sentence.lowers().collect();
    let mut out = Vec::new();
    for npi in [false, true] {
        let mut covered_until = 0;
        for start in 0..tokens.len() {
            if start < covered_until {
                continue;
            }
            if let Some(idx) = lexicon.longest_at(&tokens, start, npi) {
                let end = start + lexicon.entries[idx].phrase.len();
                covered_until = end;
                out.push(Match {
                    sentence_id: sentence.id,
                    start,
                    end,
                    entry: idx,
                    kind: lexicon.entries[idx].kind,
                });
            }
        }
    }
    out.sort_by_key(|m| (m.start, m.kind.is_npi(), m.end));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Token};
    use proptest::prelude::*;

    fn sentence(words: &[&str]) -> Sentence {
        Sentence {
            id: 0,
            tokens: words.iter().map(|w| Token::new(*w, 0, "_")).collect(),
        }
    }

    #[test]
    fn load_npi_entry() {
        let lex = load_lexicon("at all\tnpi\n").unwrap();
        let e = &lex.entries()[0];
        assert_eq!(e.phrase, vec!["at", "all"]);
        assert_eq!(e.kind, EntryKind::Npi);
    }

    #[test]
    fn load_licensor_entry() {
        let lex = load_lexicon("not\tlicensor\tsentential_negation\n").unwrap();
        assert_eq!(
            lex.entries()[0].kind,
            EntryKind::Licensor(ContextType::SententialNegation)
        );
    }

    #[test]
    fn empty_lexicon_matches_nothing() {
        let lex = load_lexicon("").unwrap();
        assert!(lex.is_empty());
        assert!(find_matches(&sentence(&["any", "thing"]), &lex).is_empty());
    }

    #[test]
    fn load_errors() {
        assert!(matches!(
            load_lexicon("not\tlicensor\n"),
            Err(LexiconError::Format { line: 1, .. })
        ));
        assert!(matches!(
            load_lexicon("# c\nnot\tlicensor\tsarcasm\n"),
            Err(LexiconError::Format { line: 2, .. })
        ));
        assert!(matches!(
            load_lexicon("any\tnpi\nany\tlicensor\tonly\n"),
            Err(LexiconError::Conflict { line: 2, .. })
        ));
        // exact duplicates collapse, case-insensitively
        assert_eq!(load_lexicon("Any\tnpi\nany\tnpi\n").unwrap().len(), 1);
    }

    #[test]
    fn bundled_lists() {
        let lex = Lexicon::bundled();
        let npis = lex.entries().iter().filter(|e| e.kind.is_npi()).count();
        assert_eq!(npis, 160);
        assert_eq!(lex.len() - npis, 30);
        for ctx in ContextType::ALL {
            assert!(lex.licensors_of(ctx).count() >= 1, "{ctx}");
        }
    }

    #[test]
    fn context_labels_round_trip() {
        for ctx in ContextType::ALL {
            assert_eq!(ctx.label().parse::<ContextType>().unwrap(), ctx);
            assert_eq!(ContextType::ALL[ctx.index()], ctx);
        }
        assert_eq!(
            "Sentential negation".parse::<ContextType>().unwrap(),
            ContextType::SententialNegation
        );
    }

    #[test]
    fn simple_question_ever() {
        let lex = load_lexicon("ever\tnpi\n").unwrap();
        let m = find_matches(&sentence(&["did", "he", "ever", "do"]), &lex);
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].start, m[0].end), (2, 3));
    }

    #[test]
    fn longest_match_wins() {
        let lex = load_lexicon("a damn\tnpi\nworth a damn\tnpi\n").unwrap();
        let m = find_matches(&sentence(&["worth", "a", "damn"]), &lex);
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].start, m[0].end), (0, 3));
        assert_eq!(lex.entry(m[0].entry).text(), "worth a damn");
    }

    #[test]
    fn kinds_overlap_freely() {
        let lex = load_lexicon("n't\tlicensor\tsentential_negation\nany\tnpi\n").unwrap();
        let m = find_matches(&sentence(&["n't", "buy", "any"]), &lex);
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].kind, EntryKind::Licensor(ContextType::SententialNegation));
        assert_eq!(m[1].kind, EntryKind::Npi);

        let lex = load_lexicon("all\tlicensor\tquantifier\nall that much\tnpi\n").unwrap();
        let m = find_matches(&sentence(&["All", "that", "much"]), &lex);
        assert_eq!(m.len(), 2);
    }

    #[test]
    fn anchored_entries() {
        let lex = Lexicon::bundled();
        let q = find_matches(&sentence(&["did", "he", "ever", "do"]), &lex);
        assert_eq!(q[0].kind, EntryKind::Licensor(ContextType::SimpleQuestions));
        let decl = find_matches(&sentence(&["bill", "did", "n't", "buy", "any", "books"]), &lex);
        assert!(decl
            .iter()
            .all(|m| m.kind != EntryKind::Licensor(ContextType::SimpleQuestions)));
    }

    #[test]
    fn no_matches_in_plain_sentence() {
        let lex = Lexicon::bundled();
        let c = Corpus::from_sentences(vec![sentence(&["the", "cat", "sat"])], false);
        assert!(find_matches(&c.sentences[0], &lex).is_empty());
    }

    /// Window enumeration followed by per-category longest-match suppression.
    fn brute_force(tokens: &[String], entries: &[LexiconEntry]) -> Vec<(usize, usize, bool)> {
        let mut out = Vec::new();
        for npi in [false, true] {
            let mut best: Vec<Option<usize>> = vec![None; tokens.len()];
            for start in 0..tokens.len() {
                for end in start + 1..=tokens.len() {
                    let window = &tokens[start..end];
                    let hit = entries.iter().any(|e| {
                        e.kind.is_npi() == npi && e.phrase.as_slice() == window && (!e.anchored || start == 0)
                    });
                    if hit {
                        best[start] = Some(end);
                    }
                }
            }
            let mut until = 0;
            for (start, end) in best.iter().enumerate() {
                if let Some(end) = end {
                    if start >= until {
                        out.push((start, *end, npi));
                        until = *end;
                    }
                }
            }
        }
        out.sort_by_key(|&(s, e, npi)| (s, npi, e));
        out
    }

    fn word() -> impl Strategy<Value = String> {
        prop::sample::select(vec!["a", "b", "c", "d"]).prop_map(String::from)
    }

    proptest! {
        #[test]
        fn matches_equal_brute_force(
            tokens in prop::collection::vec(word(), 1..12),
            phrases in prop::collection::vec((prop::collection::vec(word(), 1..4), any::<bool>(), any::<bool>()), 0..8),
        ) {
            let mut lex = Lexicon::default();
            for (phrase, npi, anchored) in phrases {
                let kind = if npi { EntryKind::Npi } else { EntryKind::Licensor(ContextType::Only) };
                let _ = lex.insert(LexiconEntry { phrase, kind, anchored });
            }
            let words: Vec<&str> = tokens.iter().map(String::as_str).collect();
            let s = sentence(&words);
            let got = find_matches(&s, &lex);
            for m in &got {
                let phrase = &lex.entry(m.entry).phrase;
                prop_assert_eq!(&tokens[m.start..m.end], phrase.as_slice());
            }
            let got: Vec<_> = got.iter().map(|m| (m.start, m.end, m.kind.is_npi())).collect();
            prop_assert_eq!(got, brute_force(&tokens, lex.entries()));
            let again: Vec<_> = find_matches(&s, &lex).iter().map(|m| (m.start, m.end, m.kind.is_npi())).collect();
            prop_assert_eq!(again, brute_force(&tokens, lex.entries()));
        }
    }
}
