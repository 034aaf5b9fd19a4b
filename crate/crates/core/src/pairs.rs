//! Minimal-pair generation from templates and Cloze-style scoring: a pair is
//! correct when the model gives the NPI a higher probability after the
//! licensing prefix than after the matched non-licensing one.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::dynamics::{CurvePoint, LearningCurve};
use crate::lexicon::ContextType;
use crate::lm::{BatchLayout, CheckpointMeta, LanguageModel};
use crate::scope::LicensedOccurrence;

pub const BUNDLED_TEMPLATES: &str = include_str!("../data/templates.txt");

pub const LICENSOR_SLOT: &str = "licensor";
pub const NPI_SLOT: &str = "npi";

/// Expansion spaces up to this size are enumerated and shuffled; larger
/// ones are sampled with rejection.
const ENUMERATION_LIMIT: usize = 1 << 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PairsError {
    #[error("template line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("checkpoints out of order: step {next} follows {prev}")]
    UnorderedCheckpoints { prev: u64, next: u64 },
    #[error("no pairs to evaluate")]
    NoPairs,
    #[error("pairs file line {line}: {message}")]
    PairsFile { line: usize, message: String },
    #[error("results csv: {0}")]
    Csv(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MinimalPair {
    pub id: String,
    pub context: ContextType,
    pub good_prefix: Vec<String>,
    pub bad_prefix: Vec<String>,
    pub npi: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PatternItem {
    Literal(String),
    Slot(String),
}

/// One candidate for a slot. Outside the licensor slot `good == bad`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Filler {
    pub good: Vec<String>,
    pub bad: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairTemplate {
    pub context: ContextType,
    pub pattern: Vec<PatternItem>,
    pub fillers: BTreeMap<String, Vec<Filler>>,
}

impl PairTemplate {
    /// Checks slot usage and filler lists. `line` is only used for errors.
    pub fn validate(&self, line: usize) -> Result<(), PairsError> {
        let err = |message: String| Err(PairsError::Format { line, message });
        let slots: Vec<&str> = self
            .pattern
            .iter()
            .filter_map(|p| match p {
                PatternItem::Slot(s) => Some(s.as_str()),
                PatternItem::Literal(_) => None,
            })
            .collect();
        for required in [LICENSOR_SLOT, NPI_SLOT] {
            let n = slots.iter().filter(|s| **s == required).count();
            if n != 1 {
                return err(format!("pattern must use {{{required}}} exactly once, found {n}"));
            }
        }
        let pos = |name: &str| slots.iter().position(|s| *s == name).expect("checked above");
        if pos(LICENSOR_SLOT) > pos(NPI_SLOT) {
            return err("{licensor} must precede {npi}".into());
        }
        for slot in &slots {
            match self.fillers.get(*slot) {
                None => return err(format!("no fillers for slot {{{slot}}}")),
                Some(f) if f.is_empty() => return err(format!("empty filler list for {{{slot}}}")),
                _ => {}
            }
        }
        if let Some(extra) = self.fillers.keys().find(|k| !slots.contains(&k.as_str())) {
            return err(format!("fillers given for unused slot {{{extra}}}"));
        }
        for (slot, fillers) in &self.fillers {
            for f in fillers {
                if f.good.is_empty() || f.good.len() != f.bad.len() {
                    return err(format!("filler for {{{slot}}} must be non-empty with equal-length alternates"));
                }
                if slot != LICENSOR_SLOT && f.good != f.bad {
                    return err(format!("only {{{LICENSOR_SLOT}}} may have alternates, not {{{slot}}}"));
                }
            }
        }
        Ok(())
    }

    /// Slots up to and including the NPI; later ones do not affect a pair.
    fn scored_slots(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for item in &self.pattern {
            if let PatternItem::Slot(s) = item {
                out.push(s.as_str());
                if s == NPI_SLOT {
                    break;
                }
            }
        }
        out
    }

    fn expansion_count(&self) -> usize {
        self.scored_slots()
            .iter()
            .map(|s| self.fillers[*s].len())
            .fold(1usize, |acc, n| acc.saturating_mul(n))
    }

    /// Expands the assignment with mixed-radix index `idx` over the scored slots.
    fn expand(&self, mut idx: usize) -> (Vec<String>, Vec<String>, Vec<String>) {
        let mut choice: BTreeMap<&str, &Filler> = BTreeMap::new();
        for slot in self.scored_slots().into_iter().rev() {
            let options = &self.fillers[slot];
            choice.insert(slot, &options[idx % options.len()]);
            idx /= options.len();
        }
        let (mut good, mut bad) = (Vec::new(), Vec::new());
        for item in &self.pattern {
            match item {
                PatternItem::Literal(w) => {
                    good.push(w.clone());
                    bad.push(w.clone());
                }
                PatternItem::Slot(s) if s == NPI_SLOT => return (good, bad, choice[s.as_str()].good.clone()),
                PatternItem::Slot(s) => {
                    good.extend(choice[s.as_str()].good.iter().cloned());
                    bad.extend(choice[s.as_str()].bad.iter().cloned());
                }
            }
        }
        unreachable!("validated templates contain the npi slot")
    }
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// Parses the template format: `[template <context>]` followed by a pattern
/// line, then `[fill <slot>]` blocks with one candidate per line and
/// `licensor | non-licensor` alternates in the licensor block.
pub fn parse_templates(source: &str) -> Result<Vec<PairTemplate>, PairsError> {
    struct Open {
        template: PairTemplate,
        line: usize,
        has_pattern: bool,
        slot: Option<String>,
    }
    fn close(open: Option<Open>, out: &mut Vec<PairTemplate>) -> Result<(), PairsError> {
        if let Some(o) = open {
            if !o.has_pattern {
                return Err(PairsError::Format {
                    line: o.line,
                    message: "template has no pattern".into(),
                });
            }
            o.template.validate(o.line)?;
            out.push(o.template);
        }
        Ok(())
    }

    let mut out = Vec::new();
    let mut open: Option<Open> = None;
    for (i, raw) in source.lines().enumerate() {
        let line = i + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let err = |message: String| PairsError::Format { line, message };
        if let Some(header) = text.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
            let mut parts = header.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some("template"), Some(ctx), None) => {
                    close(open.take(), &mut out)?;
                    let context = ctx
                        .parse::<ContextType>()
                        .map_err(|_| err(format!("unknown context {ctx:?}")))?;
                    open = Some(Open {
                        template: PairTemplate {
                            context,
                            pattern: Vec::new(),
                            fillers: BTreeMap::new(),
                        },
                        line,
                        has_pattern: false,
                        slot: None,
                    });
                }
                (Some("fill"), Some(slot), None) => {
                    let o = open.as_mut().ok_or_else(|| err("[fill] outside a template".into()))?;
                    if !o.has_pattern {
                        return Err(err("[fill] before the pattern line".into()));
                    }
                    if o.template.fillers.contains_key(slot) {
                        return Err(err(format!("duplicate block for {{{slot}}}")));
                    }
                    o.template.fillers.insert(slot.to_string(), Vec::new());
                    o.slot = Some(slot.to_string());
                }
                _ => return Err(err(format!("unrecognised header [{header}]"))),
            }
            continue;
        }
        let o = open.as_mut().ok_or_else(|| err("text outside a template".into()))?;
        if !o.has_pattern {
            for tok in text.split_whitespace() {
                let item = match tok.strip_prefix('{').and_then(|t| t.strip_suffix('}')) {
                    Some(name) if !name.is_empty() => PatternItem::Slot(name.to_string()),
                    Some(_) => return Err(err("empty slot name".into())),
                    None if tok.contains(['{', '}']) => {
                        return Err(err(format!("slot must be a whole token: {tok:?}")));
                    }
                    None => PatternItem::Literal(tok.to_string()),
                };
                o.template.pattern.push(item);
            }
            o.has_pattern = true;
            continue;
        }
        let slot = o.slot.clone().ok_or_else(|| err("filler outside a [fill] block".into()))?;
        let filler = match text.split_once('|') {
            Some((good, bad)) => Filler {
                good: words(good),
                bad: words(bad),
            },
            None => Filler {
                good: words(text),
                bad: words(text),
            },
        };
        o.template.fillers.get_mut(&slot).expect("block registered").push(filler);
    }
    close(open, &mut out)?;
    Ok(out)
}

pub fn bundled_templates() -> Vec<PairTemplate> {
    parse_templates(BUNDLED_TEMPLATES).expect("bundled templates parse")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratedPairs {
    pub pairs: Vec<MinimalPair>,
    /// Contexts whose expansion space held fewer distinct pairs than asked
    /// for, with the number produced.
    pub shortfalls: Vec<(ContextType, usize)>,
}

/// Samples `n_per_context` distinct pairs per context present in
/// `templates`, in context order. Deterministic in `seed`.
pub fn generate_pairs(templates: &[PairTemplate], n_per_context: usize, seed: u64) -> GeneratedPairs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    let mut shortfalls = Vec::new();
    for context in ContextType::ALL {
        let group: Vec<&PairTemplate> = templates.iter().filter(|t| t.context == context).collect();
        if group.is_empty() {
            continue;
        }
        let sizes: Vec<usize> = group.iter().map(|t| t.expansion_count()).collect();
        let total = sizes.iter().fold(0usize, |a, &b| a.saturating_add(b));
        let locate = |mut idx: usize| {
            for (t, &size) in group.iter().zip(&sizes) {
                if idx < size {
                    return t.expand(idx);
                }
                idx -= size;
            }
            unreachable!("index within total")
        };
        let mut seen = HashSet::new();
        let mut chosen = Vec::new();
        let mut accept = |expansion: (Vec<String>, Vec<String>, Vec<String>), chosen: &mut Vec<_>| {
            if seen.insert(expansion.clone()) {
                chosen.push(expansion);
            }
        };
        if total <= ENUMERATION_LIMIT {
            let mut order: Vec<usize> = (0..total).collect();
            order.shuffle(&mut rng);
            for idx in order {
                if chosen.len() == n_per_context {
                    break;
                }
                accept(locate(idx), &mut chosen);
            }
        } else {
            let mut attempts = 0usize;
            let budget = 20 * n_per_context + 1000;
            while chosen.len() < n_per_context && attempts < budget {
                accept(locate(rng.gen_range(0..total)), &mut chosen);
                attempts += 1;
            }
        }
        if chosen.len() < n_per_context {
            log::warn!(
                "{context}: only {} distinct pairs available, {n_per_context} requested",
                chosen.len()
            );
            shortfalls.push((context, chosen.len()));
        }
        for (k, (good_prefix, bad_prefix, npi)) in chosen.into_iter().enumerate() {
            pairs.push(MinimalPair {
                id: format!("{}-{k:04}", context.label()),
                context,
                good_prefix,
                bad_prefix,
                npi,
            });
        }
    }
    GeneratedPairs { pairs, shortfalls }
}

/// True iff the NPI is strictly more probable after the good prefix.
pub fn score_pair<M: LanguageModel + ?Sized>(model: &M, pair: &MinimalPair) -> bool {
    model.phrase_logprob(&pair.good_prefix, &pair.npi) > model.phrase_logprob(&pair.bad_prefix, &pair.npi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextAccuracy {
    pub context: ContextType,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

/// Per-context accuracy, in context order, over the contexts present.
pub fn evaluate<M: LanguageModel + ?Sized>(model: &M, pairs: &[MinimalPair]) -> Result<Vec<ContextAccuracy>, PairsError> {
    if pairs.is_empty() {
        return Err(PairsError::NoPairs);
    }
    let queries: Vec<(&[String], &[String])> = pairs
        .iter()
        .flat_map(|p| [(&p.good_prefix[..], &p.npi[..]), (&p.bad_prefix[..], &p.npi[..])])
        .collect();
    let scores = model.phrase_logprobs(&queries);
    let mut tally = [(0usize, 0usize); ContextType::ALL.len()];
    for (pair, s) in pairs.iter().zip(scores.chunks(2)) {
        let slot = &mut tally[pair.context.index()];
        slot.1 += 1;
        if s[0] > s[1] {
            slot.0 += 1;
        }
    }
    Ok(ContextType::ALL
        .iter()
        .zip(tally)
        .filter(|(_, (_, total))| *total > 0)
        .map(|(&context, (correct, total))| ContextAccuracy {
            context,
            correct,
            total,
            accuracy: correct as f64 / total as f64,
        })
        .collect())
}

/// One line of the results table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub checkpoint_step: u64,
    pub tokens_seen: u64,
    pub context_examples_seen: f64,
    pub context: ContextType,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

pub const RESULTS_CSV_HEADER: &str =
    "checkpoint_step,tokens_seen,context_examples_seen,context,correct,total,accuracy";

/// Evaluates one checkpoint. `examples_seen(context, step)` supplies the
/// curve abscissa.
pub fn evaluate_checkpoint<M: LanguageModel + ?Sized>(
    meta: &CheckpointMeta,
    model: &M,
    pairs: &[MinimalPair],
    examples_seen: &dyn Fn(ContextType, u64) -> f64,
) -> Result<Vec<EvalRow>, PairsError> {
    Ok(evaluate(model, pairs)?
        .into_iter()
        .map(|a| EvalRow {
            checkpoint_step: meta.step,
            tokens_seen: meta.tokens_seen,
            context_examples_seen: examples_seen(a.context, meta.step),
            context: a.context,
            correct: a.correct,
            total: a.total,
            accuracy: a.accuracy,
        })
        .collect())
}

/// Groups result rows into one learning curve per context.
pub fn rows_to_curves(rows: &[EvalRow], seed: u64) -> Vec<LearningCurve> {
    let mut by_context: BTreeMap<ContextType, Vec<CurvePoint>> = BTreeMap::new();
    for r in rows {
        by_context.entry(r.context).or_default().push(CurvePoint {
            step: r.checkpoint_step,
            tokens_seen: r.tokens_seen,
            examples_seen: r.context_examples_seen,
            accuracy: r.accuracy,
        });
    }
    by_context
        .into_iter()
        .map(|(context, mut points)| {
            points.sort_by_key(|p| p.step);
            LearningCurve { context, seed, points }
        })
        .collect()
}

/// Evaluates every checkpoint independently and assembles the curves.
pub fn evaluate_checkpoints<M: LanguageModel>(
    checkpoints: &[(CheckpointMeta, M)],
    pairs: &[MinimalPair],
    examples_seen: &dyn Fn(ContextType, u64) -> f64,
    seed: u64,
) -> Result<Vec<LearningCurve>, PairsError> {
    for w in checkpoints.windows(2) {
        if w[1].0.step <= w[0].0.step {
            return Err(PairsError::UnorderedCheckpoints {
                prev: w[0].0.step,
                next: w[1].0.step,
            });
        }
    }
    let mut rows = Vec::new();
    for (meta, model) in checkpoints {
        rows.extend(evaluate_checkpoint(meta, model, pairs, examples_seen)?);
    }
    Ok(rows_to_curves(&rows, seed))
}

pub fn write_results_csv(rows: &[EvalRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    let mut text = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
    if rows.is_empty() {
        text = format!("{RESULTS_CSV_HEADER}\n");
    }
    text
}

/// Lines starting with `#` are skipped.
pub fn read_results_csv(text: &str) -> Result<Vec<EvalRow>, PairsError> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| PairsError::Csv(e.to_string()))
}

pub fn write_pairs_jsonl(pairs: &[MinimalPair]) -> String {
    pairs
        .iter()
        .map(|p| serde_json::to_string(p).expect("pairs serialize") + "\n")
        .collect()
}

pub fn read_pairs_jsonl(text: &str) -> Result<Vec<MinimalPair>, PairsError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| PairsError::PairsFile {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Cumulative count of each context's occurrences consumed by training,
/// as a function of the global step. An occurrence counts once the batch
/// that first reads its NPI token has been trained on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExampleSchedule {
    batches_per_epoch: u64,
    /// Sorted within-epoch batch indices per context.
    batches: [Vec<u64>; ContextType::ALL.len()],
}

impl ExampleSchedule {
    /// `train_sentences` leading sentences form the training stream, each
    /// followed by one end-of-sentence token, laid out by `layout`.
    pub fn new(
        corpus: &Corpus,
        occurrences: &[LicensedOccurrence],
        train_sentences: usize,
        layout: &BatchLayout,
    ) -> Self {
        let mut offsets = Vec::with_capacity(train_sentences);
        let mut pos = 0usize;
        for s in corpus.sentences.iter().take(train_sentences) {
            offsets.push(pos);
            pos += s.len() + 1;
        }
        let mut batches: [Vec<u64>; 9] = Default::default();
        for occ in occurrences.iter().filter(|o| o.sentence_id < train_sentences) {
            if let Some(b) = layout.batch_of_position(offsets[occ.sentence_id] + occ.npi.start) {
                batches[occ.context.index()].push(b as u64);
            }
        }
        for b in &mut batches {
            b.sort_unstable();
        }
        ExampleSchedule {
            batches_per_epoch: layout.batches_per_epoch() as u64,
            batches,
        }
    }

    pub fn per_epoch(&self, context: ContextType) -> u64 {
        self.batches[context.index()].len() as u64
    }

    /// Occurrences of `context` seen after `step` training batches.
    pub fn seen(&self, context: ContextType, step: u64) -> u64 {
        if self.batches_per_epoch == 0 {
            return 0;
        }
        let list = &self.batches[context.index()];
        let (epochs, rem) = (step / self.batches_per_epoch, step % self.batches_per_epoch);
        epochs * list.len() as u64 + list.partition_point(|&b| b < rem) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    /// Scores phrases by table lookup on the last prefix word.
    struct Lookup(HashMap<(String, String), f64>);

    impl LanguageModel for Lookup {
        fn phrase_logprob(&self, prefix: &[String], phrase: &[String]) -> f64 {
            let key = (prefix.last().cloned().unwrap_or_default(), phrase.join(" "));
            self.0.get(&key).copied().unwrap_or(1e-6).ln()
        }
    }

    fn lookup(entries: &[(&str, &str, f64)]) -> Lookup {
        Lookup(
            entries
                .iter()
                .map(|(a, b, p)| ((a.to_string(), b.to_string()), *p))
                .collect(),
        )
    }

    fn pair(id: &str, context: ContextType, good: &str, bad: &str, npi: &str) -> MinimalPair {
        MinimalPair {
            id: id.into(),
            context,
            good_prefix: words(good),
            bad_prefix: words(bad),
            npi: words(npi),
        }
    }

    #[test]
    fn paper_example_pair() {
        let t = parse_templates(
            "[template adverbs]\nA lady {licensor} {npi} thought that the children saw the boy\n\
             [fill licensor]\nrarely | sometimes\n[fill npi]\never\n",
        )
        .unwrap();
        let g = generate_pairs(&t, 5, 0);
        assert_eq!(g.pairs.len(), 1);
        assert_eq!(g.shortfalls, vec![(ContextType::Adverbs, 1)]);
        let p = &g.pairs[0];
        assert_eq!(p.good_prefix, words("A lady rarely"));
        assert_eq!(p.bad_prefix, words("A lady sometimes"));
        assert_eq!(p.npi, words("ever"));
        let m = lookup(&[("rarely", "ever", 0.01), ("sometimes", "ever", 0.001)]);
        assert!(score_pair(&m, p));
    }

    #[test]
    fn exhausting_a_two_by_two_template() {
        let t = parse_templates(
            "[template only]\n{licensor} {subject} {npi} left\n[fill licensor]\nonly | even\n\
             [fill subject]\nthe lady\nthe boy\n[fill npi]\never\nat all\n",
        )
        .unwrap();
        // licensor has one pair, so subject × npi gives the 2×2 space
        let g = generate_pairs(&t, 10, 3);
        assert_eq!(g.pairs.len(), 4);
        assert_eq!(g.shortfalls, vec![(ContextType::Only, 4)]);
        assert_eq!(g, generate_pairs(&t, 10, 3));
        let distinct: HashSet<_> = g.pairs.iter().map(|p| (&p.good_prefix, &p.npi)).collect();
        assert_eq!(distinct.len(), 4);
    }

    #[test]
    fn continuation_slots_do_not_multiply_pairs() {
        let t = parse_templates(
            "[template only]\n{licensor} {npi} saw {object}\n[fill licensor]\nonly | even\n\
             [fill npi]\never\n[fill object]\nthe boy\nthe girl\n",
        )
        .unwrap();
        assert_eq!(generate_pairs(&t, 5, 0).pairs.len(), 1);
    }

    #[test]
    fn bundled_templates_cover_every_context() {
        let t = bundled_templates();
        for c in ContextType::ALL {
            assert!(t.iter().any(|t| t.context == c), "{c}");
        }
        let g = generate_pairs(&t, 8, 1);
        for p in &g.pairs {
            assert_eq!(p.good_prefix.len(), p.bad_prefix.len());
            let diff: Vec<usize> = (0..p.good_prefix.len())
                .filter(|&i| p.good_prefix[i] != p.bad_prefix[i])
                .collect();
            assert!(!diff.is_empty());
            assert_eq!(diff.len(), diff[diff.len() - 1] - diff[0] + 1, "contiguous difference");
            assert!(!p.npi.is_empty());
        }
    }

    #[test]
    fn template_errors() {
        let cases = [
            "[template only]\n{licensor} left\n[fill licensor]\nonly | even\n",
            "[template only]\n{npi} {licensor}\n[fill licensor]\nonly | even\n[fill npi]\never\n",
            "[template only]\n{licensor} {npi}\n[fill licensor]\n[fill npi]\never\n",
            "[template only]\n{licensor} {npi}\n[fill licensor]\nonly | not even\n[fill npi]\never\n",
            "[template nowhere]\n{licensor} {npi}\n",
            "[fill npi]\never\n",
            "[template only]\n{licensor} {npi}x\n",
            "[template only]\n{licensor} {npi}\n[fill licensor]\nonly | even\n[fill npi]\never | any\n",
        ];
        for src in cases {
            assert!(matches!(parse_templates(src), Err(PairsError::Format { .. })), "{src}");
        }
    }

    #[test]
    fn ties_and_reversals_are_incorrect() {
        let p = pair("a", ContextType::Adverbs, "a lady rarely", "a lady sometimes", "ever");
        let tie = lookup(&[("rarely", "ever", 0.01), ("sometimes", "ever", 0.01)]);
        assert!(!score_pair(&tie, &p));
        let reversed = lookup(&[("rarely", "ever", 0.001), ("sometimes", "ever", 0.01)]);
        assert!(!score_pair(&reversed, &p));
        let swapped = MinimalPair {
            good_prefix: p.bad_prefix.clone(),
            bad_prefix: p.good_prefix.clone(),
            ..p.clone()
        };
        assert!(!score_pair(&tie, &swapped));
        assert!(score_pair(&reversed, &swapped));
    }

    #[test]
    fn four_pair_fixture() {
        let pairs = vec![
            pair("1", ContextType::Only, "only", "even", "ever"),
            pair("2", ContextType::Only, "x only", "x even", "any"),
            pair("3", ContextType::Only, "y only", "y also", "ever"),
            pair("4", ContextType::Only, "z only", "z even", "at all"),
        ];
        let m = lookup(&[
            ("only", "ever", 0.2),
            ("even", "ever", 0.1),
            ("only", "any", 0.3),
            ("even", "any", 0.05),
            ("also", "ever", 0.4),
            ("only", "at all", 0.02),
            ("even", "at all", 0.01),
        ]);
        let acc = evaluate(&m, &pairs).unwrap();
        assert_eq!(acc.len(), 1);
        assert_eq!((acc[0].correct, acc[0].total), (3, 4));
        assert_eq!(acc[0].accuracy, 0.75);
        let mut rev = pairs.clone();
        rev.reverse();
        assert_eq!(evaluate(&m, &rev).unwrap(), acc);
        assert_eq!(evaluate(&m, &[]), Err(PairsError::NoPairs));
    }

    #[test]
    fn checkpoints_are_independent_and_ordered() {
        let pairs = vec![
            pair("1", ContextType::Only, "only", "even", "ever"),
            pair("2", ContextType::Adverbs, "rarely", "often", "ever"),
        ];
        let meta = |step| CheckpointMeta {
            step,
            tokens_seen: step * 10,
            train_loss: 0.0,
        };
        let good = lookup(&[("only", "ever", 0.2), ("rarely", "ever", 0.2)]);
        let bad = lookup(&[("even", "ever", 0.2), ("often", "ever", 0.2)]);
        let cps = vec![(meta(0), bad), (meta(5), good)];
        let examples = |c: ContextType, step: u64| (c.index() as u64 * 100 + step) as f64;
        let curves = evaluate_checkpoints(&cps, &pairs, &examples, 7).unwrap();
        assert_eq!(curves.len(), 2);
        assert_eq!(curves[0].context, ContextType::Adverbs);
        assert_eq!(curves[0].accuracies(), vec![0.0, 1.0]);
        assert_eq!(curves[0].points[1].examples_seen, 105.0);
        for (meta, m) in &cps {
            let single = evaluate_checkpoints(&[(*meta, m)], &pairs, &examples, 7).unwrap();
            for (c, s) in curves.iter().zip(&single) {
                assert_eq!(s.points.len(), 1);
                assert!(c.points.contains(&s.points[0]));
            }
        }
        let backwards = vec![(meta(5), &cps[1].1), (meta(0), &cps[0].1)];
        assert_eq!(
            evaluate_checkpoints(&backwards, &pairs, &examples, 7),
            Err(PairsError::UnorderedCheckpoints { prev: 5, next: 0 })
        );
    }

    #[test]
    fn results_and_pairs_round_trip() {
        let row = EvalRow {
            checkpoint_step: 3,
            tokens_seen: 90,
            context_examples_seen: 4.0,
            context: ContextType::Quantifier,
            correct: 2,
            total: 3,
            accuracy: 2.0 / 3.0,
        };
        let text = write_results_csv(&[row]);
        assert!(text.starts_with(RESULTS_CSV_HEADER));
        assert_eq!(read_results_csv(&text).unwrap(), vec![row]);
        assert_eq!(write_results_csv(&[]), format!("{RESULTS_CSV_HEADER}\n"));
        let pairs = generate_pairs(&bundled_templates(), 2, 0).pairs;
        assert_eq!(read_pairs_jsonl(&write_pairs_jsonl(&pairs)).unwrap(), pairs);
    }

    #[test]
    fn example_schedule_counts_by_batch() {
        use crate::corpus::tokenize_plain;
        use crate::lexicon::{EntryKind, Match};
        // 4 sentences of 3 tokens: stream of 16 positions, 2 columns of 8 rows
        let corpus = tokenize_plain("a b c\nd e f\ng h i\nj k l\n");
        let layout = BatchLayout::new(16, 2, 3);
        assert_eq!(layout.batches_per_epoch(), 3);
        let occ = |sentence_id, start| LicensedOccurrence {
            sentence_id,
            npi: Match {
                sentence_id,
                start,
                end: start + 1,
                entry: 0,
                kind: EntryKind::Npi,
            },
            licensor: Match {
                sentence_id,
                start: 0,
                end: 1,
                entry: 1,
                kind: EntryKind::Licensor(ContextType::Only),
            },
            context: ContextType::Only,
            tree_distance: 1,
        };
        // positions 1 (row 1 → batch 0), 6 (row 6 → batch 1), 14 (col 1, row 6 → batch 1)
        let occs = [occ(0, 1), occ(1, 2), occ(3, 2)];
        let sched = ExampleSchedule::new(&corpus, &occs, 4, &layout);
        assert_eq!(sched.per_epoch(ContextType::Only), 3);
        let seen: Vec<u64> = (0..7).map(|s| sched.seen(ContextType::Only, s)).collect();
        assert_eq!(seen, vec![0, 1, 3, 3, 4, 6, 6]);
        assert_eq!(sched.seen(ContextType::Adverbs, 6), 0);
        // held-out sentences do not count
        assert_eq!(ExampleSchedule::new(&corpus, &occs, 3, &layout).per_epoch(ContextType::Only), 2);
    }
}
