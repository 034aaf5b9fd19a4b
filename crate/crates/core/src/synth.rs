//! Synthetic corpora with gold trees and gold licensing annotations, built
//! from a schematic grammar at scheduled context frequencies.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::corpus::{Corpus, Sentence, Token};
use crate::lexicon::{ContextType, EntryKind, Lexicon, Match};
use crate::pairs::{Filler, PairTemplate, PatternItem, LICENSOR_SLOT, NPI_SLOT};
use crate::scope::{scan_corpus, LicensedOccurrence, OccurrenceRecord};

pub const BUNDLED_GRAMMAR: &str = include_str!("../data/grammar.toml");

/// Frequencies of the four-context experiment grammar, per 100k sentences.
pub const FOUR_CONTEXT_FREQUENCIES: [(ContextType, f64); 4] = [
    (ContextType::Adverbs, 50.0),
    (ContextType::Conditional, 200.0),
    (ContextType::DeterminerNegation, 800.0),
    (ContextType::SententialNegation, 3200.0),
];

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("grammar: {0}")]
    Parse(String),
    #[error("frame {frame:?}: {message}")]
    Frame { frame: String, message: String },
    #[error("infeasible schedule: {0}")]
    Infeasible(String),
    #[error("frame {frame:?}: nearest licensor is not unique or not the gold one")]
    AmbiguousGold { frame: String },
    #[error("sentence {sentence_id}: lexicon scan disagrees with the gold annotation ({detail})")]
    LexiconMismatch { sentence_id: usize, detail: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Slot {
    Filler(String),
    Licensor,
    Npi,
    Distractor(ContextType),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FrameItem {
    Word(String),
    Slot(Slot),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameToken {
    pub item: FrameItem,
    /// 1-based frame position of the head, 0 for the root.
    pub head: usize,
    pub deprel: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub source: String,
    pub tokens: Vec<FrameToken>,
    pub npis: Vec<Vec<String>>,
}

impl Frame {
    fn position(&self, slot: &Slot) -> Option<usize> {
        self.tokens
            .iter()
            .position(|t| t.item == FrameItem::Slot(slot.clone()))
    }

    fn error(&self, message: impl Into<String>) -> SynthError {
        SynthError::Frame {
            frame: self.source.clone(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContextSpec {
    pub frequency: f64,
    /// (licensor, matched non-licensor)
    pub alternates: Vec<(String, String)>,
    pub frames: Vec<Frame>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiFrame {
    pub context: ContextType,
    pub frame: Frame,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrammarSpec {
    pub fillers: BTreeMap<String, Vec<Vec<String>>>,
    pub neutral: Vec<Frame>,
    pub contexts: BTreeMap<ContextType, ContextSpec>,
    pub multi: Vec<MultiFrame>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoldAnnotation {
    pub sentence_id: usize,
    pub occurrences: Vec<LicensedOccurrence>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrame {
    pattern: String,
    #[serde(default)]
    npis: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawContext {
    frequency: f64,
    alternates: Vec<(String, String)>,
    frames: Vec<RawFrame>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMulti {
    context: String,
    pattern: String,
    npis: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrammar {
    fillers: BTreeMap<String, Vec<String>>,
    neutral: Vec<RawFrame>,
    contexts: BTreeMap<String, RawContext>,
    #[serde(default)]
    multi: Vec<RawMulti>,
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn parse_context(name: &str) -> Result<ContextType, SynthError> {
    name.parse()
        .map_err(|_| SynthError::Parse(format!("unknown context {name:?}")))
}

fn parse_frame(raw: &RawFrame) -> Result<Frame, SynthError> {
    let mut frame = Frame {
        source: raw.pattern.clone(),
        tokens: Vec::new(),
        npis: raw.npis.iter().map(|n| words(n)).collect(),
    };
    for tok in raw.pattern.split_whitespace() {
        let mut parts = tok.rsplitn(3, '|');
        let (deprel, head, form) = match (parts.next(), parts.next(), parts.next()) {
            (Some(d), Some(h), Some(f)) if !f.is_empty() => (d, h, f),
            _ => return Err(frame.error(format!("token {tok:?} is not form|head|deprel"))),
        };
        let head: usize = head
            .parse()
            .map_err(|_| frame.error(format!("bad head in {tok:?}")))?;
        let item = match form.strip_prefix('{').and_then(|f| f.strip_suffix('}')) {
            Some("lic") => FrameItem::Slot(Slot::Licensor),
            Some("npi") => FrameItem::Slot(Slot::Npi),
            Some(name) => match name.strip_prefix("lic:") {
                Some(ctx) => FrameItem::Slot(Slot::Distractor(parse_context(ctx)?)),
                None => FrameItem::Slot(Slot::Filler(name.to_string())),
            },
            None => FrameItem::Word(form.to_string()),
        };
        frame.tokens.push(FrameToken {
            item,
            head,
            deprel: deprel.to_string(),
        });
    }
    // the heads must form a tree
    let skeleton: Vec<Token> = frame
        .tokens
        .iter()
        .map(|t| Token::new("x", t.head, t.deprel.clone()))
        .collect();
    let sentence = Sentence::new(0, skeleton).map_err(|e| frame.error(e.to_string()))?;
    if sentence.root_count() != 1 {
        return Err(frame.error("frame must have exactly one root"));
    }
    Ok(frame)
}

/// Path length between frame positions via their lowest common ancestor.
fn frame_distance(frame: &Frame, a: usize, b: usize) -> usize {
    let ancestors = |mut i: usize| {
        let mut path = vec![i];
        while frame.tokens[i].head != 0 {
            i = frame.tokens[i].head - 1;
            path.push(i);
        }
        path
    };
    let (pa, pb) = (ancestors(a), ancestors(b));
    for (da, node) in pa.iter().enumerate() {
        if let Some(db) = pb.iter().position(|n| n == node) {
            return da + db;
        }
    }
    unreachable!("frames are single trees")
}

impl GrammarSpec {
    pub fn parse(source: &str) -> Result<Self, SynthError> {
        let raw: RawGrammar = toml::from_str(source).map_err(|e| SynthError::Parse(e.to_string()))?;
        let fillers: BTreeMap<String, Vec<Vec<String>>> = raw
            .fillers
            .iter()
            .map(|(k, v)| (k.clone(), v.iter().map(|w| words(w)).collect()))
            .collect();
        let neutral = raw.neutral.iter().map(parse_frame).collect::<Result<_, _>>()?;
        let mut contexts = BTreeMap::new();
        for (name, rc) in &raw.contexts {
            let frames = rc.frames.iter().map(parse_frame).collect::<Result<_, _>>()?;
            contexts.insert(
                parse_context(name)?,
                ContextSpec {
                    frequency: rc.frequency,
                    alternates: rc.alternates.clone(),
                    frames,
                },
            );
        }
        let mut multi = Vec::new();
        for rm in &raw.multi {
            multi.push(MultiFrame {
                context: parse_context(&rm.context)?,
                frame: parse_frame(&RawFrame {
                    pattern: rm.pattern.clone(),
                    npis: rm.npis.clone(),
                })?,
            });
        }
        let spec = GrammarSpec {
            fillers,
            neutral,
            contexts,
            multi,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// All nine contexts at their natural-text rates.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_GRAMMAR).expect("bundled grammar is valid")
    }

    /// The bundled grammar restricted to four contexts spread 64-fold in
    /// frequency.
    pub fn four_context() -> Self {
        Self::bundled().restricted(&FOUR_CONTEXT_FREQUENCIES)
    }

    /// Keeps only the listed contexts, at the given frequencies.
    pub fn restricted(&self, frequencies: &[(ContextType, f64)]) -> Self {
        let mut out = self.clone();
        out.contexts.retain(|c, _| frequencies.iter().any(|(k, _)| k == c));
        let kept = |c: &ContextType| out.contexts.contains_key(c);
        out.multi.retain(|m| {
            kept(&m.context)
                && m.frame.tokens.iter().all(|t| match &t.item {
                    FrameItem::Slot(Slot::Distractor(c)) => kept(c),
                    _ => true,
                })
        });
        for (c, f) in frequencies {
            if let Some(spec) = out.contexts.get_mut(c) {
                spec.frequency = *f;
            }
        }
        out
    }

    pub fn with_frequency(mut self, context: ContextType, frequency: f64) -> Self {
        if let Some(spec) = self.contexts.get_mut(&context) {
            spec.frequency = frequency;
        }
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.neutral.is_empty() {
            return Err(SynthError::Parse("at least one neutral frame is required".into()));
        }
        let total: f64 = self.contexts.values().map(|c| c.frequency).sum();
        if !(0.0..100_000.0).contains(&total) || self.contexts.values().any(|c| c.frequency < 0.0) {
            return Err(SynthError::Infeasible(format!(
                "frequencies must be non-negative and sum below 100000, got {total}"
            )));
        }
        let check_fillers = |frame: &Frame| -> Result<(), SynthError> {
            for t in &frame.tokens {
                if let FrameItem::Slot(Slot::Filler(name)) = &t.item {
                    match self.fillers.get(name) {
                        Some(list) if !list.is_empty() && list.iter().all(|w| !w.is_empty()) => {}
                        _ => return Err(frame.error(format!("no fillers for {{{name}}}"))),
                    }
                }
            }
            Ok(())
        };
        let count = |frame: &Frame, slot: &Slot| {
            frame
                .tokens
                .iter()
                .filter(|t| t.item == FrameItem::Slot(slot.clone()))
                .count()
        };
        for frame in &self.neutral {
            check_fillers(frame)?;
            if frame.tokens.iter().any(|t| !matches!(t.item, FrameItem::Word(_) | FrameItem::Slot(Slot::Filler(_)))) {
                return Err(frame.error("neutral frames take only filler slots"));
            }
        }
        for (context, spec) in &self.contexts {
            if spec.alternates.is_empty() || spec.frames.is_empty() {
                return Err(SynthError::Parse(format!("{context}: needs alternates and frames")));
            }
            for frame in &spec.frames {
                check_fillers(frame)?;
                if count(frame, &Slot::Licensor) != 1 || count(frame, &Slot::Npi) != 1 {
                    return Err(frame.error("needs exactly one {lic} and one {npi}"));
                }
                if frame.position(&Slot::Licensor) > frame.position(&Slot::Npi) {
                    return Err(frame.error("{lic} must precede {npi}"));
                }
                if frame.npis.is_empty() {
                    return Err(frame.error("no NPIs listed"));
                }
                if frame.tokens.iter().any(|t| matches!(t.item, FrameItem::Slot(Slot::Distractor(_)))) {
                    return Err(frame.error("distractor licensors belong in multi-licensor frames"));
                }
            }
        }
        for m in &self.multi {
            let frame = &m.frame;
            check_fillers(frame)?;
            let lic = frame.position(&Slot::Licensor);
            let npi = frame.position(&Slot::Npi);
            let (Some(lic), Some(npi)) = (lic, npi) else {
                return Err(frame.error("needs {lic} and {npi}"));
            };
            if lic > npi || frame.npis.is_empty() {
                return Err(frame.error("{lic} must precede {npi}, which needs NPIs"));
            }
            if !self.contexts.contains_key(&m.context) {
                return Err(frame.error(format!("context {} has no alternates", m.context)));
            }
            let gold = frame_distance(frame, lic, npi);
            let mut distractors = 0;
            for (i, t) in frame.tokens.iter().enumerate() {
                if let FrameItem::Slot(Slot::Distractor(c)) = &t.item {
                    distractors += 1;
                    if !self.contexts.contains_key(c) {
                        return Err(frame.error(format!("context {c} has no alternates")));
                    }
                    if i > npi {
                        return Err(frame.error("distractors must precede the NPI"));
                    }
                    if frame_distance(frame, i, npi) <= gold {
                        return Err(SynthError::AmbiguousGold {
                            frame: frame.source.clone(),
                        });
                    }
                }
            }
            if distractors == 0 {
                return Err(frame.error("multi-licensor frames need a distractor"));
            }
        }
        Ok(())
    }

    /// `⌊frequency·n/100000⌉` scheduled occurrences per context.
    pub fn scheduled_counts(&self, n_sentences: usize) -> BTreeMap<ContextType, usize> {
        self.contexts
            .iter()
            .map(|(c, s)| (*c, (s.frequency * n_sentences as f64 / 100_000.0).round() as usize))
            .collect()
    }

    /// One minimal-pair template per context frame.
    pub fn pair_templates(&self) -> Vec<PairTemplate> {
        let mut out = Vec::new();
        for (context, spec) in &self.contexts {
            for frame in &spec.frames {
                let mut pattern = Vec::new();
                let mut fillers = BTreeMap::new();
                for t in &frame.tokens {
                    match &t.item {
                        FrameItem::Word(w) => pattern.push(PatternItem::Literal(w.clone())),
                        FrameItem::Slot(Slot::Licensor) => {
                            pattern.push(PatternItem::Slot(LICENSOR_SLOT.into()));
                            fillers.insert(
                                LICENSOR_SLOT.to_string(),
                                spec.alternates
                                    .iter()
                                    .map(|(g, b)| Filler {
                                        good: words(g),
                                        bad: words(b),
                                    })
                                    .collect(),
                            );
                        }
                        FrameItem::Slot(Slot::Npi) => {
                            pattern.push(PatternItem::Slot(NPI_SLOT.into()));
                            fillers.insert(NPI_SLOT.to_string(), same_fillers(&frame.npis));
                        }
                        FrameItem::Slot(Slot::Filler(name)) => {
                            pattern.push(PatternItem::Slot(name.clone()));
                            fillers.insert(name.clone(), same_fillers(&self.fillers[name]));
                        }
                        FrameItem::Slot(Slot::Distractor(_)) => unreachable!("validated"),
                    }
                }
                out.push(PairTemplate {
                    context: *context,
                    pattern,
                    fillers,
                });
            }
        }
        out
    }
}

fn same_fillers(options: &[Vec<String>]) -> Vec<Filler> {
    options
        .iter()
        .map(|w| Filler {
            good: w.clone(),
            bad: w.clone(),
        })
        .collect()
}

/// A realised sentence with the token spans of its slots.
struct Realised {
    tokens: Vec<Token>,
    /// Span of every frame position in the realised tokens.
    spans: Vec<(usize, usize)>,
}

fn realise<R: Rng>(
    spec: &GrammarSpec,
    frame: &Frame,
    licensor: Option<&str>,
    rng: &mut R,
) -> Realised {
    let mut chosen: Vec<Vec<String>> = Vec::with_capacity(frame.tokens.len());
    for t in &frame.tokens {
        let w = match &t.item {
            FrameItem::Word(w) => vec![w.clone()],
            FrameItem::Slot(Slot::Filler(name)) => spec.fillers[name].choose(rng).expect("non-empty").clone(),
            FrameItem::Slot(Slot::Npi) => frame.npis.choose(rng).expect("non-empty").clone(),
            FrameItem::Slot(Slot::Licensor) => vec![licensor.expect("licensor given").to_string()],
            FrameItem::Slot(Slot::Distractor(c)) => {
                let alts = &spec.contexts[c].alternates;
                words(&alts.choose(rng).expect("non-empty").0)
            }
        };
        chosen.push(w);
    }
    let mut spans = Vec::with_capacity(chosen.len());
    let mut start = 0;
    for w in &chosen {
        spans.push((start, start + w.len()));
        start += w.len();
    }
    let mut tokens = Vec::with_capacity(start);
    for (i, (t, w)) in frame.tokens.iter().zip(&chosen).enumerate() {
        let head = if t.head == 0 { 0 } else { spans[t.head - 1].0 + 1 };
        tokens.push(Token::new(w[0].clone(), head, t.deprel.clone()));
        for extra in &w[1..] {
            tokens.push(Token::new(extra.clone(), spans[i].0 + 1, "fixed"));
        }
    }
    Realised { tokens, spans }
}

struct EntryIndex(HashMap<(Vec<String>, bool), usize>);

impl EntryIndex {
    fn new(lexicon: &Lexicon) -> Self {
        EntryIndex(
            lexicon
                .entries()
                .iter()
                .enumerate()
                .map(|(i, e)| ((e.phrase.clone(), e.kind.is_npi()), i))
                .collect(),
        )
    }

    fn get(&self, tokens: &[Token], npi: bool) -> usize {
        let phrase: Vec<String> = tokens.iter().map(|t| t.lower.clone()).collect();
        *self
            .0
            .get(&(phrase.clone(), npi))
            .unwrap_or_else(|| panic!("{phrase:?} is not in the lexicon"))
    }
}

fn gold_occurrence(
    sentence_id: usize,
    r: &Realised,
    frame: &Frame,
    context: ContextType,
    index: &EntryIndex,
) -> LicensedOccurrence {
    let lic = frame.position(&Slot::Licensor).expect("validated");
    let npi = frame.position(&Slot::Npi).expect("validated");
    let m = |pos: usize, kind: EntryKind| {
        let (start, end) = r.spans[pos];
        Match {
            sentence_id,
            start,
            end,
            entry: index.get(&r.tokens[start..end], kind.is_npi()),
            kind,
        }
    };
    LicensedOccurrence {
        sentence_id,
        npi: m(npi, EntryKind::Npi),
        licensor: m(lic, EntryKind::Licensor(context)),
        context,
        tree_distance: frame_distance(frame, lic, npi),
    }
}

fn check_against_scan(corpus: &Corpus, gold: &[GoldAnnotation]) -> Result<(), SynthError> {
    let lexicon = Lexicon::bundled();
    let scanned = scan_corpus(corpus, &lexicon).expect("synthetic corpora are parsed");
    let mut by_sentence: BTreeMap<usize, Vec<LicensedOccurrence>> = BTreeMap::new();
    for o in scanned.occurrences {
        by_sentence.entry(o.sentence_id).or_default().push(o);
    }
    let expected: BTreeMap<usize, Vec<LicensedOccurrence>> =
        gold.iter().map(|g| (g.sentence_id, g.occurrences.clone())).collect();
    for id in by_sentence.keys().chain(expected.keys()) {
        let (got, want) = (by_sentence.get(id), expected.get(id));
        if got != want {
            return Err(SynthError::LexiconMismatch {
                sentence_id: *id,
                detail: format!("scanned {got:?}, gold {want:?}"),
            });
        }
    }
    Ok(())
}

/// Generates `n_sentences` sentences in which each context occurs exactly
/// at its scheduled count, at seeded positions; every other sentence comes
/// from a neutral frame. The result is checked against a scan with the
/// bundled lexicon.
pub fn generate_corpus(
    spec: &GrammarSpec,
    n_sentences: usize,
    seed: u64,
) -> Result<(Corpus, Vec<GoldAnnotation>), SynthError> {
    spec.validate()?;
    if n_sentences == 0 {
        return Err(SynthError::Infeasible("need at least one sentence".into()));
    }
    let counts = spec.scheduled_counts(n_sentences);
    let scheduled: usize = counts.values().sum();
    if scheduled > n_sentences {
        return Err(SynthError::Infeasible(format!(
            "{scheduled} licensed sentences scheduled in a corpus of {n_sentences}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slots: Vec<Option<ContextType>> = vec![None; n_sentences];
    let mut order: Vec<usize> = (0..n_sentences).collect();
    order.shuffle(&mut rng);
    let mut next = order.into_iter();
    for (context, &count) in &counts {
        for pos in next.by_ref().take(count) {
            slots[pos] = Some(*context);
        }
    }

    let index = EntryIndex::new(&Lexicon::bundled());
    let mut sentences = Vec::with_capacity(n_sentences);
    let mut gold = Vec::new();
    for (id, slot) in slots.into_iter().enumerate() {
        let tokens = match slot {
            None => {
                let frame = spec.neutral.choose(&mut rng).expect("validated");
                realise(spec, frame, None, &mut rng).tokens
            }
            Some(context) => {
                let cs = &spec.contexts[&context];
                let frame = cs.frames.choose(&mut rng).expect("validated");
                let licensor = &cs.alternates.choose(&mut rng).expect("validated").0;
                let r = realise(spec, frame, Some(licensor), &mut rng);
                gold.push(GoldAnnotation {
                    sentence_id: id,
                    occurrences: vec![gold_occurrence(id, &r, frame, context, &index)],
                });
                r.tokens
            }
        };
        sentences.push(Sentence { id, tokens });
    }
    let corpus = Corpus::from_sentences(sentences, true);
    check_against_scan(&corpus, &gold)?;
    Ok((corpus, gold))
}

/// Sentences with two or more candidate licensors before the NPI, the
/// tree-nearest one being gold.
pub fn multi_licensor_suite(
    spec: &GrammarSpec,
    n_sentences: usize,
    seed: u64,
) -> Result<(Corpus, Vec<GoldAnnotation>), SynthError> {
    spec.validate()?;
    if spec.multi.is_empty() {
        return Err(SynthError::Infeasible("grammar has no multi-licensor frames".into()));
    }
    if spec.contexts.len() < 2 {
        return Err(SynthError::Infeasible("need at least two licensor types".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let index = EntryIndex::new(&Lexicon::bundled());
    let mut sentences = Vec::with_capacity(n_sentences);
    let mut gold = Vec::with_capacity(n_sentences);
    for id in 0..n_sentences {
        let m = spec.multi.choose(&mut rng).expect("non-empty");
        let licensor = &spec.contexts[&m.context].alternates.choose(&mut rng).expect("validated").0;
        let r = realise(spec, &m.frame, Some(licensor), &mut rng);
        gold.push(GoldAnnotation {
            sentence_id: id,
            occurrences: vec![gold_occurrence(id, &r, &m.frame, m.context, &index)],
        });
        sentences.push(Sentence { id, tokens: r.tokens });
    }
    let corpus = Corpus::from_sentences(sentences, true);
    check_against_scan(&corpus, &gold)?;
    Ok((corpus, gold))
}

pub fn gold_occurrences(gold: &[GoldAnnotation]) -> Vec<LicensedOccurrence> {
    gold.iter().flat_map(|g| g.occurrences.iter().copied()).collect()
}

/// Gold annotations in the occurrence JSON-lines format, flagged as gold.
pub fn gold_records(corpus: &Corpus, gold: &[GoldAnnotation]) -> Vec<OccurrenceRecord> {
    gold_occurrences(gold)
        .iter()
        .map(|o| OccurrenceRecord::new(o, corpus, true))
        .collect()
}
