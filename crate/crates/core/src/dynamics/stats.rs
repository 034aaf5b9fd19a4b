use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{DataEfficiencyResult, DynamicsError};
use crate::lexicon::ContextType;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    TwoSided,
    /// Alternative: statistic greater than under the null.
    Greater,
    Less,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub test: String,
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub df: f64,
    pub sidedness: Sidedness,
}

fn student_p(t: f64, df: f64, sidedness: Sidedness) -> f64 {
    if t.is_infinite() {
        let upper = if t > 0.0 { 0.0 } else { 1.0 };
        return match sidedness {
            Sidedness::TwoSided => 0.0,
            Sidedness::Greater => upper,
            Sidedness::Less => 1.0 - upper,
        };
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p = match sidedness {
        Sidedness::TwoSided => 2.0 * dist.sf(t.abs()),
        Sidedness::Greater => dist.sf(t),
        Sidedness::Less => dist.cdf(t),
    };
    p.clamp(0.0, 1.0)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Sample correlation with a two-sided p-value from `t = r·√((n−2)/(1−r²))`.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<StatResult, DynamicsError> {
    assert_eq!(xs.len(), ys.len(), "paired samples");
    let n = xs.len();
    if n < 3 {
        return Err(DynamicsError::TooFew { needed: 3, got: n });
    }
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(DynamicsError::UndefinedCorrelation(
            "an input has zero variance".into(),
        ));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let t = if r.abs() == 1.0 {
        r * f64::INFINITY
    } else {
        r * (df / (1.0 - r * r)).sqrt()
    };
    Ok(StatResult {
        test: "pearson".into(),
        statistic: r,
        p_value: student_p(t, df, Sidedness::TwoSided),
        n,
        df,
        sidedness: Sidedness::TwoSided,
    })
}

/// `t = (mean − mu0)/(s/√n)` with `n − 1` degrees of freedom.
pub fn t_test_one_sample(values: &[f64], mu0: f64, sidedness: Sidedness) -> Result<StatResult, DynamicsError> {
    let n = values.len();
    if n < 2 {
        return Err(DynamicsError::TooFew { needed: 2, got: n });
    }
    let var = variance(values);
    if var == 0.0 {
        return Err(DynamicsError::DegenerateTest("zero sample variance".into()));
    }
    let t = (mean(values) - mu0) / (var / n as f64).sqrt();
    let df = (n - 1) as f64;
    Ok(StatResult {
        test: "one_sample_t".into(),
        statistic: t,
        p_value: student_p(t, df, sidedness),
        n,
        df,
        sidedness,
    })
}

/// Welch's unequal-variance test of `mean(a) − mean(b)` with
/// Welch–Satterthwaite degrees of freedom.
pub fn welch_t_test(a: &[f64], b: &[f64], sidedness: Sidedness) -> Result<StatResult, DynamicsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(DynamicsError::TooFew { needed: 2, got: s.len() });
        }
    }
    let (va, vb) = (variance(a) / a.len() as f64, variance(b) / b.len() as f64);
    let se2 = va + vb;
    if se2 == 0.0 {
        return Err(DynamicsError::DegenerateTest("both samples are constant".into()));
    }
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    Ok(StatResult {
        test: "welch_t".into(),
        statistic: t,
        p_value: student_p(t, df, sidedness),
        n: a.len() + b.len(),
        df,
        sidedness,
    })
}

/// Whether the correlation pairs each context's seed-mean with its frequency
/// or uses one point per (context, seed).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationUnit {
    #[default]
    ContextMean,
    PerSeed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub context: ContextType,
    pub frequency: f64,
    pub mean_examples_to_95: f64,
    pub per_seed: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEfficiency {
    pub points: Vec<ScatterPoint>,
    pub unit: CorrelationUnit,
    pub correlation: StatResult,
}

/// Correlates context frequency with the examples needed to converge.
/// `rows` holds, per context, its frequency and one result per seed.
pub fn frequency_vs_efficiency(
    rows: &[(ContextType, f64, Vec<DataEfficiencyResult>)],
    unit: CorrelationUnit,
) -> Result<FrequencyEfficiency, DynamicsError> {
    if rows.len() < 3 {
        return Err(DynamicsError::TooFew {
            needed: 3,
            got: rows.len(),
        });
    }
    let mut points = Vec::with_capacity(rows.len());
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (context, frequency, results) in rows {
        if results.is_empty() {
            return Err(DynamicsError::TooFew { needed: 1, got: 0 });
        }
        let per_seed: Vec<f64> = results.iter().map(|r| r.examples_to_95).collect();
        let m = mean(&per_seed);
        match unit {
            CorrelationUnit::ContextMean => {
                xs.push(*frequency);
                ys.push(m);
            }
            CorrelationUnit::PerSeed => {
                xs.extend(std::iter::repeat(*frequency).take(per_seed.len()));
                ys.extend(&per_seed);
            }
        }
        points.push(ScatterPoint {
            context: *context,
            frequency: *frequency,
            mean_examples_to_95: m,
            per_seed,
        });
    }
    Ok(FrequencyEfficiency {
        points,
        unit,
        correlation: pearson(&xs, &ys)?,
    })
}
