//! Learning-dynamics analysis of all-context and single-context curves:
//! data efficiency, its correlation with frequency, and area between
//! curves with a one-sample t-test.

use std::collections::BTreeMap;
use std::path::Path;

use polarity_core::dynamics::{
    abc, average_curves, data_efficiency_with, frequency_vs_efficiency, savgol_smooth, t_test_one_sample,
    write_curves_csv, AbcResult, DataEfficiencyResult, FinalAccuracy, FrequencyEfficiency, LearningCurve,
    Sidedness, SmoothingConfig, StatResult, EFFICIENCY_FACTOR,
};
use polarity_core::lexicon::ContextType;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::write_atomic;
use crate::provenance::Provenance;
use crate::svg::{bar_chart, Chart, Mark, Series, PALETTE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleContextReport {
    pub efficiency_per_seed: Vec<DataEfficiencyResult>,
    /// Efficiency of the smoothed seed-averaged curve.
    pub mean_curve: DataEfficiencyResult,
    /// All-context minus single-context, on seed-averaged smoothed curves.
    pub abc: AbcResult,
    pub abc_per_seed: Vec<AbcResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextReport {
    pub context: ContextType,
    pub frequency_per_100k: f64,
    pub efficiency_per_seed: Vec<DataEfficiencyResult>,
    pub mean_examples_to_95: f64,
    pub mean_curve: DataEfficiencyResult,
    pub single: Option<SingleContextReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub mean_abc: f64,
    pub mean_normalized_abc: f64,
    /// Normalised AbC across contexts against zero, alternative "greater".
    pub t_test: Option<StatResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub provenance: Provenance,
    pub smoothing: SmoothingConfig,
    pub final_accuracy: FinalAccuracy,
    pub efficiency_factor: f64,
    pub contexts: Vec<ContextReport>,
    pub frequency_efficiency: Option<FrequencyEfficiency>,
    pub transfer: Option<TransferReport>,
    /// Statistics that could not be computed.
    pub degenerate: Vec<String>,
}

/// A report with the smoothed seed-averaged curves it was computed from.
#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub report: Report,
    pub raw_all: Vec<LearningCurve>,
    pub raw_single: Vec<LearningCurve>,
    pub mean_all: Vec<LearningCurve>,
    pub mean_single: Vec<LearningCurve>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalysisSettings {
    pub smoothing: SmoothingConfig,
    pub final_accuracy: FinalAccuracy,
    pub correlation_unit: polarity_core::dynamics::CorrelationUnit,
}

fn by_context(curves: &[LearningCurve]) -> BTreeMap<ContextType, Vec<LearningCurve>> {
    let mut out: BTreeMap<ContextType, Vec<LearningCurve>> = BTreeMap::new();
    for c in curves {
        out.entry(c.context).or_default().push(c.clone());
    }
    for list in out.values_mut() {
        list.sort_by_key(|c| c.seed);
    }
    out
}

fn numerical(e: polarity_core::dynamics::DynamicsError) -> CliResult<String> {
    match CliError::from(e) {
        CliError::Numerical(m) => Ok(m),
        other => Err(other),
    }
}

/// Runs the analysis. `all` and `single` hold one curve per (context,
/// seed); curves of the two sets are paired by seed. Every context of
/// `all` needs a frequency.
pub fn analyze(
    all: &[LearningCurve],
    single: &[LearningCurve],
    frequencies: &BTreeMap<ContextType, f64>,
    settings: AnalysisSettings,
    provenance: Provenance,
) -> CliResult<Analysis> {
    let smooth = |c: &LearningCurve| savgol_smooth(c, settings.smoothing);
    let efficiency = |c: &LearningCurve| data_efficiency_with(c, EFFICIENCY_FACTOR, settings.final_accuracy);
    let all_by = by_context(all);
    let single_by = by_context(single);
    if all_by.is_empty() {
        return Err(CliError::input("no all-context curves"));
    }
    if let Some(c) = single_by.keys().find(|c| !all_by.contains_key(c)) {
        return Err(CliError::input(format!("single-context curves for {c} have no all-context counterpart")));
    }

    let mut contexts = Vec::new();
    let mut mean_all = Vec::new();
    let mut mean_single = Vec::new();
    let mut rows = Vec::new();
    for (context, curves) in &all_by {
        let frequency = *frequencies
            .get(context)
            .ok_or_else(|| CliError::input(format!("no frequency for context {context}")))?;
        let smoothed: Vec<LearningCurve> = curves.iter().map(smooth).collect::<Result<_, _>>()?;
        let per_seed: Vec<DataEfficiencyResult> = smoothed.iter().map(efficiency).collect::<Result<_, _>>()?;
        let mean_curve = smooth(&average_curves(curves)?)?;
        let mean_eff = efficiency(&mean_curve)?;
        let single = match single_by.get(context) {
            None => None,
            Some(singles) => {
                let s_smoothed: Vec<LearningCurve> = singles.iter().map(smooth).collect::<Result<_, _>>()?;
                let s_mean = smooth(&average_curves(singles)?)?;
                let mut abc_per_seed = Vec::new();
                for s in &s_smoothed {
                    if let Some(a) = smoothed.iter().find(|a| a.seed == s.seed) {
                        abc_per_seed.push(abc(a, s)?);
                    }
                }
                let report = SingleContextReport {
                    efficiency_per_seed: s_smoothed.iter().map(efficiency).collect::<Result<_, _>>()?,
                    mean_curve: efficiency(&s_mean)?,
                    abc: abc(&mean_curve, &s_mean)?,
                    abc_per_seed,
                };
                mean_single.push(s_mean);
                Some(report)
            }
        };
        rows.push((*context, frequency, per_seed.clone()));
        contexts.push(ContextReport {
            context: *context,
            frequency_per_100k: frequency,
            mean_examples_to_95: per_seed.iter().map(|r| r.examples_to_95).sum::<f64>() / per_seed.len() as f64,
            efficiency_per_seed: per_seed,
            mean_curve: mean_eff,
            single,
        });
        mean_all.push(mean_curve);
    }

    let mut degenerate = Vec::new();
    let frequency_efficiency = match frequency_vs_efficiency(&rows, settings.correlation_unit) {
        Ok(f) => Some(f),
        Err(e) => {
            degenerate.push(format!("frequency/efficiency correlation: {}", numerical(e)?));
            None
        }
    };
    let transfer = if single_by.is_empty() {
        None
    } else {
        let abcs: Vec<&AbcResult> = contexts.iter().filter_map(|c| c.single.as_ref().map(|s| &s.abc)).collect();
        let normalized: Vec<f64> = abcs.iter().map(|a| a.normalized_abc).collect();
        let n = abcs.len() as f64;
        let t_test = match t_test_one_sample(&normalized, 0.0, Sidedness::Greater) {
            Ok(t) => Some(t),
            Err(e) => {
                degenerate.push(format!("AbC t-test: {}", numerical(e)?));
                None
            }
        };
        Some(TransferReport {
            mean_abc: abcs.iter().map(|a| a.abc).sum::<f64>() / n,
            mean_normalized_abc: normalized.iter().sum::<f64>() / n,
            t_test,
        })
    };

    Ok(Analysis {
        report: Report {
            provenance,
            smoothing: settings.smoothing,
            final_accuracy: settings.final_accuracy,
            efficiency_factor: EFFICIENCY_FACTOR,
            contexts,
            frequency_efficiency,
            transfer,
            degenerate,
        },
        raw_all: all.to_vec(),
        raw_single: single.to_vec(),
        mean_all,
        mean_single,
    })
}

fn color(context: ContextType) -> &'static str {
    PALETTE[context.index()]
}

fn curve_points(c: &LearningCurve) -> Vec<(f64, f64)> {
    c.points.iter().map(|p| (p.examples_seen, p.accuracy)).collect()
}

impl Analysis {
    /// File name and SVG text of every figure.
    pub fn figures(&self) -> Vec<(String, String)> {
        let comment = self.report.provenance.svg_comment();
        let mut out = Vec::new();
        let curves = Chart {
            title: "Smoothed accuracy, all-context model (seed mean)".into(),
            x_label: "context examples seen".into(),
            y_label: "accuracy".into(),
            log_x: true,
            log_y: false,
            y_range: Some((0.0, 1.0)),
            series: self
                .mean_all
                .iter()
                .map(|c| Series {
                    label: c.context.to_string(),
                    points: curve_points(c),
                    mark: Mark::Line,
                    color: color(c.context),
                })
                .collect(),
        };
        out.push(("learning_curves.svg".into(), curves.render(&comment)));

        let scatter = Chart {
            title: "Data efficiency against context frequency".into(),
            x_label: "frequency per 100k sentences".into(),
            y_label: "examples to 95% of final accuracy".into(),
            log_x: true,
            log_y: true,
            y_range: None,
            series: self
                .report
                .contexts
                .iter()
                .map(|c| Series {
                    label: c.context.to_string(),
                    points: std::iter::once((c.frequency_per_100k, c.mean_examples_to_95))
                        .chain(c.efficiency_per_seed.iter().map(|e| (c.frequency_per_100k, e.examples_to_95)))
                        .collect(),
                    mark: Mark::Points,
                    color: color(c.context),
                })
                .collect(),
        };
        out.push(("efficiency_vs_frequency.svg".into(), scatter.render(&comment)));

        for s in &self.mean_single {
            let Some(a) = self.mean_all.iter().find(|a| a.context == s.context) else {
                continue;
            };
            let chart = Chart {
                title: format!("{}: all-context vs single-context", s.context),
                x_label: "context examples seen".into(),
                y_label: "smoothed accuracy".into(),
                log_x: false,
                log_y: false,
                y_range: Some((0.0, 1.0)),
                series: vec![
                    Series {
                        label: "all contexts".into(),
                        points: curve_points(a),
                        mark: Mark::Line,
                        color: PALETTE[0],
                    },
                    Series {
                        label: "single context".into(),
                        points: curve_points(s),
                        mark: Mark::Dashed,
                        color: PALETTE[3],
                    },
                ],
            };
            out.push((format!("all_vs_single_{}.svg", s.context), chart.render(&comment)));
        }

        let with_abc: Vec<&ContextReport> = self.report.contexts.iter().filter(|c| c.single.is_some()).collect();
        if !with_abc.is_empty() {
            let bars: Vec<(String, f64)> = with_abc
                .iter()
                .map(|c| (c.context.to_string(), c.single.as_ref().expect("filtered").abc.normalized_abc))
                .collect();
            out.push((
                "normalized_abc.svg".into(),
                bar_chart("Normalised AbC (all minus single)", "normalised AbC", &bars, &comment),
            ));
            let scatter = Chart {
                title: "Normalised AbC against context frequency".into(),
                x_label: "frequency per 100k sentences".into(),
                y_label: "normalised AbC".into(),
                log_x: true,
                log_y: false,
                y_range: None,
                series: with_abc
                    .iter()
                    .map(|c| {
                        let s = c.single.as_ref().expect("filtered");
                        Series {
                            label: c.context.to_string(),
                            points: std::iter::once((c.frequency_per_100k, s.abc.normalized_abc))
                                .chain(s.abc_per_seed.iter().map(|a| (c.frequency_per_100k, a.normalized_abc)))
                                .collect(),
                            mark: Mark::Points,
                            color: color(c.context),
                        }
                    })
                    .collect(),
            };
            out.push(("abc_vs_frequency.svg".into(), scatter.render(&comment)));
        }
        out
    }

    pub fn report_json(&self) -> String {
        serde_json::to_string_pretty(&self.report).expect("report serializes") + "\n"
    }

    /// Writes `report.json`, curve tables and figures under `dir`.
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let comment = self.report.provenance.csv_comment();
        write_atomic(&dir.join("report.json"), self.report_json().as_bytes())?;
        let tables = [
            ("curves_all.csv", &self.raw_all),
            ("curves_single.csv", &self.raw_single),
            ("curves_mean_all.csv", &self.mean_all),
            ("curves_mean_single.csv", &self.mean_single),
        ];
        for (name, curves) in tables {
            if !curves.is_empty() {
                write_atomic(&dir.join(name), (comment.clone() + &write_curves_csv(curves)).as_bytes())?;
            }
        }
        let figures = dir.join("figures");
        for (name, svg) in self.figures() {
            write_atomic(&figures.join(name), svg.as_bytes())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use polarity_core::dynamics::{CorrelationUnit, CurvePoint};

    fn curve(context: ContextType, seed: u64, per_step: f64, acc: impl Fn(usize) -> f64) -> LearningCurve {
        let points = (1..=40)
            .map(|i| CurvePoint {
                step: 10 * i as u64,
                tokens_seen: 100 * i as u64,
                examples_seen: per_step * i as f64,
                accuracy: acc(i),
            })
            .collect();
        LearningCurve::new(context, seed, points).unwrap()
    }

    fn settings() -> AnalysisSettings {
        AnalysisSettings {
            smoothing: SmoothingConfig { window: 5, degree: 1 },
            final_accuracy: FinalAccuracy::Last,
            correlation_unit: CorrelationUnit::ContextMean,
        }
    }

    const CONTEXTS: [(ContextType, f64); 3] = [
        (ContextType::Adverbs, 50.0),
        (ContextType::Only, 200.0),
        (ContextType::SententialNegation, 800.0),
    ];

    fn fixture(shift: f64) -> Vec<LearningCurve> {
        let mut out = Vec::new();
        for (c, f) in CONTEXTS {
            for seed in 0..2 {
                out.push(curve(c, seed, f / 10.0, |i| ((i as f64 - shift) / 10.0).clamp(0.0, 1.0)));
            }
        }
        out
    }

    fn freqs() -> BTreeMap<ContextType, f64> {
        CONTEXTS.into_iter().collect()
    }

    #[test]
    fn identical_runs_have_zero_abc() {
        let prov = Provenance::new("analyze", &RunConfig::default());
        let a = analyze(&fixture(0.0), &fixture(0.0), &freqs(), settings(), prov).unwrap();
        for c in &a.report.contexts {
            assert_eq!(c.single.as_ref().unwrap().abc.abc, 0.0);
        }
        assert_eq!(a.report.transfer.as_ref().unwrap().mean_abc, 0.0);
        assert!(a.report.transfer.unwrap().t_test.is_none());
        assert_eq!(a.report.degenerate.len(), 1);
    }

    #[test]
    fn efficiency_scales_with_examples_per_step() {
        let prov = Provenance::new("analyze", &RunConfig::default());
        let a = analyze(&fixture(0.0), &fixture(3.0), &freqs(), settings(), prov).unwrap();
        let means: Vec<f64> = a.report.contexts.iter().map(|c| c.mean_examples_to_95).collect();
        // identical step profiles, so examples grow with frequency
        assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
        let r = &a.report.frequency_efficiency.as_ref().unwrap().correlation;
        assert!(r.statistic > 0.99);
        // the all-context curves lead by three checkpoints
        let t = a.report.transfer.as_ref().unwrap();
        assert!(t.mean_normalized_abc > 0.0);
        assert_eq!(a.figures().len(), 2 + 3 + 2);
    }

    #[test]
    fn needs_three_contexts_and_frequencies() {
        let prov = Provenance::new("analyze", &RunConfig::default());
        let two: Vec<LearningCurve> = fixture(0.0).into_iter().filter(|c| c.context != ContextType::Only).collect();
        let err = analyze(&two, &[], &freqs(), settings(), prov.clone()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = analyze(&fixture(0.0), &[], &BTreeMap::new(), settings(), prov).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
