use serde::{Deserialize, Serialize};

use super::{shared_steps, DynamicsError, LearningCurve};
use crate::lexicon::ContextType;

/// Fraction of the final accuracy that counts as converged.
pub const EFFICIENCY_FACTOR: f64 = 0.95;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalAccuracy {
    /// Smoothed accuracy at the last checkpoint.
    #[default]
    Last,
    /// Mean of the last `n` smoothed accuracies.
    TailMean(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataEfficiencyResult {
    pub context: ContextType,
    pub threshold_accuracy: f64,
    pub final_accuracy: f64,
    pub examples_to_95: f64,
    pub step_to_95: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbcResult {
    pub context: ContextType,
    /// Signed area (accuracy × examples), positive when the first curve lies above.
    pub abc: f64,
    /// `abc` divided by the examples extent of the integration range.
    pub normalized_abc: f64,
    /// Examples count at the end of the integration range.
    pub endpoint: f64,
    pub endpoint_step: u64,
}

pub fn final_accuracy(curve: &LearningCurve) -> Result<f64, DynamicsError> {
    final_accuracy_with(curve, FinalAccuracy::Last)
}

pub fn final_accuracy_with(curve: &LearningCurve, mode: FinalAccuracy) -> Result<f64, DynamicsError> {
    let last = curve.points.last().ok_or(DynamicsError::EmptyCurve)?;
    Ok(match mode {
        FinalAccuracy::Last => last.accuracy,
        FinalAccuracy::TailMean(n) => {
            let n = n.clamp(1, curve.len());
            curve.points[curve.len() - n..].iter().map(|p| p.accuracy).sum::<f64>() / n as f64
        }
    })
}

/// First checkpoint whose accuracy reaches 95% of the final accuracy.
pub fn data_efficiency(curve: &LearningCurve) -> Result<DataEfficiencyResult, DynamicsError> {
    data_efficiency_with(curve, EFFICIENCY_FACTOR, FinalAccuracy::Last)
}

pub fn data_efficiency_with(
    curve: &LearningCurve,
    factor: f64,
    mode: FinalAccuracy,
) -> Result<DataEfficiencyResult, DynamicsError> {
    let final_accuracy = final_accuracy_with(curve, mode)?;
    let threshold_accuracy = factor * final_accuracy;
    let hit = curve
        .points
        .iter()
        .find(|p| p.accuracy >= threshold_accuracy)
        .or(curve.points.last())
        .expect("curve is non-empty");
    Ok(DataEfficiencyResult {
        context: curve.context,
        threshold_accuracy,
        final_accuracy,
        examples_to_95: hit.examples_seen,
        step_to_95: hit.step,
    })
}

/// Signed area between two smoothed curves of one context, from the first
/// shared checkpoint until both have converged. The abscissa is the mean of
/// the two curves' example counts, so `abc(a, b) = −abc(b, a)` exactly.
pub fn abc(all: &LearningCurve, single: &LearningCurve) -> Result<AbcResult, DynamicsError> {
    let steps = shared_steps(&[all, single]);
    if steps.is_empty() {
        return Err(DynamicsError::DisjointGrids);
    }
    let (a, b) = (all.restrict(&steps), single.restrict(&steps));
    let endpoint_step = data_efficiency(&a)?.step_to_95.max(data_efficiency(&b)?.step_to_95);
    let mut area = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    let mut first_x = 0.0;
    let mut endpoint = 0.0;
    for (p, q) in a.points.iter().zip(&b.points).take_while(|(p, _)| p.step <= endpoint_step) {
        let x = 0.5 * (p.examples_seen + q.examples_seen);
        let y = p.accuracy - q.accuracy;
        match prev {
            Some((px, py)) => area += 0.5 * (x - px) * (y + py),
            None => first_x = x,
        }
        prev = Some((x, y));
        endpoint = x;
    }
    let extent = endpoint - first_x;
    Ok(AbcResult {
        context: all.context,
        abc: area,
        normalized_abc: if extent > 0.0 { area / extent } else { 0.0 },
        endpoint,
        endpoint_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::fixtures::curve;
    use crate::dynamics::CurvePoint;
    use proptest::prelude::*;

    #[test]
    fn chance_level_curve_has_zero_efficiency() {
        let c = curve(ContextType::Only, &[0.5; 20]);
        let r = data_efficiency(&c).unwrap();
        assert_eq!(r.examples_to_95, 0.0);
        assert_eq!(r.step_to_95, 0);
        assert_eq!(r.final_accuracy, 0.5);
    }

    #[test]
    fn crossing_found_by_linear_scan() {
        let ys = [0.1, 0.3, 0.5, 0.7, 0.86, 0.9, 0.88, 0.9];
        let r = data_efficiency(&curve(ContextType::Only, &ys)).unwrap();
        assert!((r.threshold_accuracy - 0.855).abs() < 1e-12);
        assert_eq!(r.step_to_95, 40);
        assert_eq!(r.examples_to_95, 12.0);
    }

    #[test]
    fn late_maximum_gives_last_point() {
        let r = data_efficiency(&curve(ContextType::Only, &[0.1, 0.2, 0.3, 0.9])).unwrap();
        assert_eq!(r.step_to_95, 30);
    }

    #[test]
    fn final_accuracy_modes() {
        let c = curve(ContextType::Only, &[0.2, 0.6, 0.8, 0.9]);
        assert_eq!(final_accuracy(&c).unwrap(), 0.9);
        assert!((final_accuracy_with(&c, FinalAccuracy::TailMean(2)).unwrap() - 0.85).abs() < 1e-12);
        assert_eq!(
            final_accuracy(&curve(ContextType::Only, &[])),
            Err(DynamicsError::EmptyCurve)
        );
    }

    #[test]
    fn rectangle_and_identity() {
        let single = curve(ContextType::Only, &[0.2, 0.3, 0.4, 0.5, 0.5]);
        let mut all = single.clone();
        for p in &mut all.points {
            p.accuracy += 0.1;
        }
        let r = abc(&all, &single).unwrap();
        let extent = r.endpoint;
        assert!(extent > 0.0);
        assert!((r.abc - 0.1 * extent).abs() < 1e-12);
        assert!((r.normalized_abc - 0.1).abs() < 1e-12);
        assert_eq!(abc(&single, &single).unwrap().abc, 0.0);
    }

    #[test]
    fn disjoint_grids_rejected() {
        let a = curve(ContextType::Only, &[0.2, 0.3]);
        let mut b = a.clone();
        for p in &mut b.points {
            p.step += 5;
        }
        assert_eq!(abc(&a, &b), Err(DynamicsError::DisjointGrids));
    }

    fn arb_curve() -> impl Strategy<Value = LearningCurve> {
        prop::collection::vec((0.0f64..1.0, 0u8..4), 2..30).prop_map(|pts| {
            let mut examples = 0.0;
            LearningCurve {
                context: ContextType::Only,
                seed: 0,
                points: pts
                    .into_iter()
                    .enumerate()
                    .map(|(i, (acc, inc))| {
                        examples += inc as f64;
                        CurvePoint {
                            step: i as u64,
                            tokens_seen: 0,
                            examples_seen: examples,
                            accuracy: acc,
                        }
                    })
                    .collect(),
            }
        })
    }

    proptest! {
        #[test]
        fn antisymmetric(a in arb_curve(), b in arb_curve()) {
            let ab = abc(&a, &b).unwrap();
            let ba = abc(&b, &a).unwrap();
            prop_assert_eq!(ab.abc, -ba.abc);
            prop_assert_eq!(ab.endpoint_step, ba.endpoint_step);
            prop_assert_eq!(abc(&a, &a).unwrap().abc, 0.0);
        }

        #[test]
        fn relaxing_threshold_never_delays(c in arb_curve(), lo in 0.0f64..0.95) {
            let strict = data_efficiency_with(&c, 0.95, FinalAccuracy::Last).unwrap();
            let relaxed = data_efficiency_with(&c, lo, FinalAccuracy::Last).unwrap();
            prop_assert!(relaxed.examples_to_95 <= strict.examples_to_95);
        }
    }
}
