//! Learning-curve analysis: Savitzky–Golay smoothing, final accuracy,
//! data efficiency, area between curves and the accompanying statistics.

mod metrics;
mod smoothing;
mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::ContextType;

pub use metrics::{
    abc, data_efficiency, data_efficiency_with, final_accuracy, final_accuracy_with, AbcResult,
    DataEfficiencyResult, FinalAccuracy, EFFICIENCY_FACTOR,
};
pub use smoothing::{savgol_smooth, savgol_weights, SmoothingConfig};
pub use stats::{
    frequency_vs_efficiency, pearson, t_test_one_sample, welch_t_test, CorrelationUnit, FrequencyEfficiency,
    ScatterPoint, Sidedness, StatResult,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("empty learning curve")]
    EmptyCurve,
    #[error("curve has {len} points, smoothing of degree {degree} needs at least {}", degree + 1)]
    TooShort { len: usize, degree: usize },
    #[error("invalid smoothing configuration: {0}")]
    Config(String),
    #[error("curves share no checkpoint steps")]
    DisjointGrids,
    #[error("malformed curve: {0}")]
    Malformed(String),
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("degenerate test: {0}")]
    DegenerateTest(String),
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("curve csv: {0}")]
    Csv(String),
}

/// One checkpoint of a learning curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u64,
    pub tokens_seen: u64,
    /// Occurrences of the curve's context consumed by training so far. Real
    /// valued so that seed-averaged curves stay exact.
    pub examples_seen: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub context: ContextType,
    pub seed: u64,
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn new(context: ContextType, seed: u64, points: Vec<CurvePoint>) -> Result<Self, DynamicsError> {
        let curve = LearningCurve { context, seed, points };
        curve.validate()?;
        Ok(curve)
    }

    /// Steps strictly increasing, examples non-decreasing, accuracies in [0, 1].
    pub fn validate(&self) -> Result<(), DynamicsError> {
        for w in self.points.windows(2) {
            if w[1].step <= w[0].step {
                return Err(DynamicsError::Malformed(format!(
                    "steps not increasing at {} -> {}",
                    w[0].step, w[1].step
                )));
            }
            if w[1].examples_seen < w[0].examples_seen {
                return Err(DynamicsError::Malformed(format!(
                    "examples_seen decreases after step {}",
                    w[0].step
                )));
            }
        }
        if let Some(p) = self.points.iter().find(|p| !(0.0..=1.0).contains(&p.accuracy)) {
            return Err(DynamicsError::Malformed(format!(
                "accuracy {} at step {} outside [0, 1]",
                p.accuracy, p.step
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.accuracy).collect()
    }

    pub fn steps(&self) -> Vec<u64> {
        self.points.iter().map(|p| p.step).collect()
    }

    /// Restriction to the given steps (which must all be present).
    fn restrict(&self, steps: &[u64]) -> LearningCurve {
        let by_step: BTreeMap<u64, &CurvePoint> = self.points.iter().map(|p| (p.step, p)).collect();
        LearningCurve {
            context: self.context,
            seed: self.seed,
            points: steps.iter().map(|s| *by_step[s]).collect(),
        }
    }
}

/// Steps present in every curve, ascending.
pub fn shared_steps(curves: &[&LearningCurve]) -> Vec<u64> {
    let Some((first, rest)) = curves.split_first() else {
        return Vec::new();
    };
    first
        .points
        .iter()
        .map(|p| p.step)
        .filter(|s| rest.iter().all(|c| c.points.binary_search_by_key(s, |p| p.step).is_ok()))
        .collect()
}

/// Pointwise mean over curves of one context on their shared step grid.
/// The result carries the seed of the first curve.
pub fn average_curves(curves: &[LearningCurve]) -> Result<LearningCurve, DynamicsError> {
    let first = curves.first().ok_or(DynamicsError::EmptyCurve)?;
    if let Some(c) = curves.iter().find(|c| c.context != first.context) {
        return Err(DynamicsError::Malformed(format!(
            "cannot average {} with {}",
            first.context, c.context
        )));
    }
    let refs: Vec<&LearningCurve> = curves.iter().collect();
    let steps = shared_steps(&refs);
    if steps.is_empty() {
        return Err(DynamicsError::DisjointGrids);
    }
    let restricted: Vec<LearningCurve> = curves.iter().map(|c| c.restrict(&steps)).collect();
    let n = curves.len() as f64;
    let points = (0..steps.len())
        .map(|i| {
            let col = restricted.iter().map(|c| c.points[i]);
            let (mut tokens, mut examples, mut acc) = (0u64, 0.0, 0.0);
            for p in col {
                tokens += p.tokens_seen;
                examples += p.examples_seen;
                acc += p.accuracy;
            }
            CurvePoint {
                step: steps[i],
                tokens_seen: tokens / curves.len() as u64,
                examples_seen: examples / n,
                accuracy: acc / n,
            }
        })
        .collect();
    Ok(LearningCurve {
        context: first.context,
        seed: first.seed,
        points,
    })
}

pub const CURVE_CSV_HEADER: [&str; 6] = [
    "context",
    "seed",
    "step",
    "tokens_seen",
    "context_examples_seen",
    "accuracy",
];

#[derive(Serialize, Deserialize)]
struct CurveRow {
    context: ContextType,
    seed: u64,
    step: u64,
    tokens_seen: u64,
    context_examples_seen: f64,
    accuracy: f64,
}

pub fn write_curves_csv(curves: &[LearningCurve]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CURVE_CSV_HEADER).expect("in-memory write");
    for c in curves {
        for p in &c.points {
            w.serialize(CurveRow {
                context: c.context,
                seed: c.seed,
                step: p.step,
                tokens_seen: p.tokens_seen,
                context_examples_seen: p.examples_seen,
                accuracy: p.accuracy,
            })
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Reads curves grouped by (context, seed), in order of first appearance.
/// Lines starting with `#` are skipped.
pub fn read_curves_csv(text: &str) -> Result<Vec<LearningCurve>, DynamicsError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut curves: Vec<LearningCurve> = Vec::new();
    for row in reader.deserialize::<CurveRow>() {
        let row = row.map_err(|e| DynamicsError::Csv(e.to_string()))?;
        let point = CurvePoint {
            step: row.step,
            tokens_seen: row.tokens_seen,
            examples_seen: row.context_examples_seen,
            accuracy: row.accuracy,
        };
        match curves
            .iter_mut()
            .find(|c| c.context == row.context && c.seed == row.seed)
        {
            Some(c) => c.points.push(point),
            None => curves.push(LearningCurve {
                context: row.context,
                seed: row.seed,
                points: vec![point],
            }),
        }
    }
    for c in &curves {
        c.validate()?;
    }
    Ok(curves)
}
