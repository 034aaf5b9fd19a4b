//! Dependency-annotated corpora: the token/sentence data model, CoNLL-U
//! ingestion and canonical serialization, and plain-text tokenization.
//!
//! Only the columns the rest of the toolkit consumes are kept (form, head,
//! relation). Writing a corpus emits canonical CoNLL-U with `_` in every
//! other column, so a parse → write → parse cycle is the identity after the
//! first parse.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("line {line}: expected 10 tab-separated columns, found {found}")]
    ColumnCount { line: usize, found: usize },
    #[error("line {line}: {message}")]
    Field { line: usize, message: String },
    #[error("sentence {sentence}: token {token} has head {head} outside 0..={len}")]
    HeadOutOfRange {
        sentence: usize,
        token: usize,
        head: usize,
        len: usize,
    },
    #[error("sentence {sentence}: token {token} is its own head")]
    SelfLoop { sentence: usize, token: usize },
    #[error("sentence {sentence}: head links contain a cycle through token {token}")]
    Cycle { sentence: usize, token: usize },
    #[error("sentence {sentence}: no tokens")]
    EmptySentence { sentence: usize },
}

/// One syntactic word.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub form: String,
    pub lower: String,
    /// 1-based index of the governing token, 0 for a root.
    pub head: usize,
    pub deprel: String,
}

impl Token {
    pub fn new(form: impl Into<String>, head: usize, deprel: impl Into<String>) -> Self {
        let form = form.into();
        let lower = form.to_lowercase();
        Token {
            form,
            lower,
            head,
            deprel: deprel.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: usize,
    pub tokens: Vec<Token>,
}

impl Sentence {
    /// Builds a sentence after checking the head links form a forest.
    pub fn new(id: usize, tokens: Vec<Token>) -> Result<Self, CorpusError> {
        validate_heads(id, &tokens)?;
        Ok(Sentence { id, tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn lowers(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.lower.as_str())
    }

    /// 0-based index of the head of token `i`, or `None` for roots.
    pub fn head_of(&self, i: usize) -> Option<usize> {
        match self.tokens[i].head {
            0 => None,
            h => Some(h - 1),
        }
    }

    pub fn root_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.head == 0).count()
    }
}

fn validate_heads(sentence: usize, tokens: &[Token]) -> Result<(), CorpusError> {
    let len = tokens.len();
    if len == 0 {
        return Err(CorpusError::EmptySentence { sentence });
    }
    for (i, tok) in tokens.iter().enumerate() {
        if tok.head > len {
            return Err(CorpusError::HeadOutOfRange {
                sentence,
                token: i + 1,
                head: tok.head,
                len,
            });
        }
        if tok.head == i + 1 {
            return Err(CorpusError::SelfLoop {
                sentence,
                token: i + 1,
            });
        }
    }
    // 0 = unvisited, 1 = on the current path, 2 = known to reach a root
    let mut state = vec![0u8; len];
    for start in 0..len {
        let mut path = Vec::new();
        let mut cur = start;
        loop {
            match state[cur] {
                2 => break,
                1 => {
                    return Err(CorpusError::Cycle {
                        sentence,
                        token: cur + 1,
                    })
                }
                _ => {}
            }
            state[cur] = 1;
            path.push(cur);
            match tokens[cur].head {
                0 => break,
                h => cur = h - 1,
            }
        }
        for p in path {
            state[p] = 2;
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub token_count: usize,
    /// False when the corpus came from plain text and heads are placeholders.
    pub parsed: bool,
}

impl Default for Corpus {
    fn default() -> Self {
        Corpus {
            sentences: Vec::new(),
            token_count: 0,
            parsed: true,
        }
    }
}

impl Corpus {
    /// Assembles a corpus, renumbering sentence ids to their positions.
    pub fn from_sentences(sentences: Vec<Sentence>, parsed: bool) -> Self {
        let mut sentences = sentences;
        for (i, s) in sentences.iter_mut().enumerate() {
            s.id = i;
        }
        let token_count = sentences.iter().map(Sentence::len).sum();
        Corpus {
            sentences,
            token_count,
            parsed,
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// Parses CoNLL-U text. Multiword-token ranges and empty nodes are skipped.
pub fn parse_conllu(text: &str) -> Result<Corpus, CorpusError> {
    let mut sentences = Vec::new();
    let mut current: Vec<Token> = Vec::new();

    let flush = |current: &mut Vec<Token>, sentences: &mut Vec<Sentence>| {
        if current.is_empty() {
            return Ok(());
        }
        let id = sentences.len();
        let tokens = std::mem::take(current);
        let sentence = Sentence::new(id, tokens)?;
        if sentence.root_count() > 1 {
            log::warn!(
                "sentence {id}: {} roots, treating it as a forest",
                sentence.root_count()
            );
        }
        sentences.push(sentence);
        Ok::<(), CorpusError>(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            flush(&mut current, &mut sentences)?;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(CorpusError::ColumnCount {
                line: line_no,
                found: cols.len(),
            });
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let id: usize = id.parse().map_err(|_| CorpusError::Field {
            line: line_no,
            message: format!("token id {id:?} is not an integer"),
        })?;
        if id != current.len() + 1 {
            return Err(CorpusError::Field {
                line: line_no,
                message: format!("expected token id {}, found {id}", current.len() + 1),
            });
        }
        let head: usize = cols[6].parse().map_err(|_| CorpusError::Field {
            line: line_no,
            message: format!("head {:?} is not a non-negative integer", cols[6]),
        })?;
        current.push(Token::new(cols[1], head, cols[7]));
    }
    flush(&mut current, &mut sentences)?;
    Ok(Corpus::from_sentences(sentences, true))
}

/// Canonical CoNLL-U: LF endings, tabs, `_` for every column outside the
/// data model, one blank line after each sentence.
pub fn write_conllu(corpus: &Corpus) -> String {
    let mut out = String::new();
    for sentence in &corpus.sentences {
        for (i, tok) in sentence.tokens.iter().enumerate() {
            let deprel = if tok.deprel.is_empty() { "_" } else { &tok.deprel };
            let _ = writeln!(
                out,
                "{}\t{}\t_\t_\t_\t_\t{}\t{}\t_\t_",
                i + 1,
                tok.form,
                tok.head,
                deprel
            );
        }
        out.push('\n');
    }
    out
}

/// One sentence per line, whitespace tokenization, blank lines skipped.
/// The result is flagged as unparsed.
pub fn tokenize_plain(text: &str) -> Corpus {
    let sentences = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(id, line)| Sentence {
            id,
            tokens: line
                .split_whitespace()
                .map(|w| Token::new(w, 0, "_"))
                .collect(),
        })
        .collect();
    Corpus::from_sentences(sentences, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = "1\tNo\t_\t_\t_\t_\t2\tdet\t_\t_\n2\tone\t_\t_\t_\t_\t0\troot\t_\t_\n";

    #[test]
    fn two_token_sentence() {
        let c = parse_conllu(TWO).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.token_count, 2);
        let s = &c.sentences[0];
        assert_eq!(s.tokens[1].head, 0);
        assert_eq!(s.tokens[0].lower, "no");
        assert_eq!(s.head_of(0), Some(1));
    }

    #[test]
    fn empty_input() {
        let c = parse_conllu("").unwrap();
        assert!(c.is_empty());
        assert_eq!(c.token_count, 0);
        assert_eq!(write_conllu(&c), "");
    }

    #[test]
    fn round_trip_small() {
        let c = parse_conllu(TWO).unwrap();
        assert_eq!(parse_conllu(&write_conllu(&c)).unwrap(), c);
    }

    #[test]
    fn skips_ranges_and_empty_nodes() {
        let text = "# text = don't\n1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n\
                    1\tdo\t_\t_\t_\t_\t0\troot\t_\t_\n\
                    2\tn't\t_\t_\t_\t_\t1\tadvmod\t_\t_\n\
                    2.1\tx\t_\t_\t_\t_\t_\t_\t_\t_\n";
        let c = parse_conllu(text).unwrap();
        assert_eq!(c.token_count, 2);
        assert_eq!(c.sentences[0].tokens[1].form, "n't");
    }

    #[test]
    fn wrong_column_count_reports_line() {
        let text = "1\tNo\t_\t_\t_\t_\t2\tdet\t_\t_\n2\tone\t0\troot\n";
        assert_eq!(
            parse_conllu(text),
            Err(CorpusError::ColumnCount { line: 2, found: 4 })
        );
    }

    #[test]
    fn structural_errors() {
        let out_of_range = "1\ta\t_\t_\t_\t_\t5\tx\t_\t_\n";
        assert!(matches!(
            parse_conllu(out_of_range),
            Err(CorpusError::HeadOutOfRange { sentence: 0, .. })
        ));
        let self_loop = "1\ta\t_\t_\t_\t_\t0\tx\t_\t_\n\n1\ta\t_\t_\t_\t_\t1\tx\t_\t_\n";
        assert_eq!(
            parse_conllu(self_loop),
            Err(CorpusError::SelfLoop {
                sentence: 1,
                token: 1
            })
        );
        let cycle = "1\ta\t_\t_\t_\t_\t2\tx\t_\t_\n2\tb\t_\t_\t_\t_\t1\tx\t_\t_\n";
        assert!(matches!(
            parse_conllu(cycle),
            Err(CorpusError::Cycle { sentence: 0, .. })
        ));
    }

    #[test]
    fn forest_is_accepted() {
        let text = "1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n2\tb\t_\t_\t_\t_\t0\troot\t_\t_\n";
        let c = parse_conllu(text).unwrap();
        assert_eq!(c.sentences[0].root_count(), 2);
    }

    #[test]
    fn plain_text() {
        let c = tokenize_plain("Bill did n't buy any books\n\nSecond line\nthird  one here\n");
        assert_eq!(c.len(), 3);
        assert_eq!(c.sentences[0].len(), 6);
        assert_eq!(c.sentences[2].tokens[0].form, "third");
        assert_eq!(c.sentences[1].id, 1);
        assert!(!c.parsed);
        assert!(c.sentences[0].tokens.iter().all(|t| t.head == 0 && t.deprel == "_"));
    }
}
