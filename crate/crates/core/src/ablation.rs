//! Single-context corpora: every sentence holding an NPI licensed by a
//! context other than the kept one is swapped for a neutral sentence of the
//! same length, leaving order and everything else in place.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::lexicon::ContextType;
use crate::scope::LicensedOccurrence;

/// Largest length difference tolerated when no same-length donor exists.
pub const LENGTH_SLACK: usize = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AblationError {
    #[error("sentence {sentence_id} (length {length}): no neutral sentence within ±{LENGTH_SLACK} tokens")]
    NoDonor { sentence_id: usize, length: usize },
    #[error("plan refers to sentence {sentence_id} but the corpus has {len} sentences")]
    OutOfRange { sentence_id: usize, len: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub sentence_id: usize,
    pub donor_sentence_id: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub sentences: usize,
    pub neutral_pool: usize,
    pub replaced: usize,
    pub exact_length: usize,
    pub fallback_length: usize,
    /// Kept-context occurrences lost because they shared a sentence with
    /// another context.
    pub kept_occurrences_lost: usize,
    pub token_delta: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationPlan {
    pub keep: ContextType,
    pub seed: u64,
    pub replacements: Vec<Replacement>,
    pub summary: PlanSummary,
}

impl AblationPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plans serialize")
    }
}

/// Plans the replacement of every sentence with an occurrence whose context
/// is not `keep`. Donors are drawn uniformly, with replacement, from the
/// same-length sentences that have no occurrence at all. When none has the
/// exact length the earliest neutral sentence at the nearest length within
/// [`LENGTH_SLACK`] is used, shorter first.
pub fn plan_ablation(
    corpus: &Corpus,
    occurrences: &[LicensedOccurrence],
    keep: ContextType,
    seed: u64,
) -> Result<AblationPlan, AblationError> {
    let mut with_occurrence = BTreeSet::new();
    let mut to_replace = BTreeSet::new();
    for occ in occurrences {
        with_occurrence.insert(occ.sentence_id);
        if occ.context != keep {
            to_replace.insert(occ.sentence_id);
        }
    }
    let kept_occurrences_lost = occurrences
        .iter()
        .filter(|o| o.context == keep && to_replace.contains(&o.sentence_id))
        .count();

    let mut pool: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for s in &corpus.sentences {
        if !with_occurrence.contains(&s.id) {
            pool.entry(s.len()).or_default().push(s.id);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = PlanSummary {
        sentences: corpus.len(),
        neutral_pool: pool.values().map(Vec::len).sum(),
        kept_occurrences_lost,
        ..PlanSummary::default()
    };
    let mut replacements = Vec::with_capacity(to_replace.len());
    for &sentence_id in &to_replace {
        let length = corpus
            .sentences
            .get(sentence_id)
            .ok_or(AblationError::OutOfRange {
                sentence_id,
                len: corpus.len(),
            })?
            .len();
        let donor = match pool.get(&length) {
            Some(ids) => {
                summary.exact_length += 1;
                ids[rng.gen_range(0..ids.len())]
            }
            None => {
                let fallback = (1..=LENGTH_SLACK)
                    .flat_map(|d| [length.checked_sub(d), Some(length + d)])
                    .flatten()
                    .find_map(|l| pool.get(&l).map(|ids| ids[0]))
                    .ok_or(AblationError::NoDonor {
                        sentence_id,
                        length,
                    })?;
                summary.fallback_length += 1;
                fallback
            }
        };
        summary.token_delta += corpus.sentences[donor].len() as i64 - length as i64;
        replacements.push(Replacement {
            sentence_id,
            donor_sentence_id: donor,
        });
    }
    summary.replaced = replacements.len();
    Ok(AblationPlan {
        keep,
        seed,
        replacements,
        summary,
    })
}

/// Copies donor sentences into the replaced positions.
pub fn apply_ablation(corpus: &Corpus, plan: &AblationPlan) -> Result<Corpus, AblationError> {
    let len = corpus.len();
    let mut sentences = corpus.sentences.clone();
    for r in &plan.replacements {
        for sentence_id in [r.sentence_id, r.donor_sentence_id] {
            if sentence_id >= len {
                return Err(AblationError::OutOfRange { sentence_id, len });
            }
        }
        sentences[r.sentence_id].tokens = corpus.sentences[r.donor_sentence_id].tokens.clone();
    }
    Ok(Corpus::from_sentences(sentences, corpus.parsed))
}
