use serde::{Deserialize, Serialize};

use super::{DynamicsError, LearningCurve};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingConfig {
    pub window: usize,
    pub degree: usize,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig { window: 25, degree: 1 }
    }
}

impl SmoothingConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if self.window == 0 || self.window % 2 == 0 {
            return Err(DynamicsError::Config(format!(
                "window must be odd and positive, got {}",
                self.window
            )));
        }
        if self.degree >= self.window {
            return Err(DynamicsError::Config(format!(
                "degree {} must be below window {}",
                self.degree, self.window
            )));
        }
        Ok(())
    }
}

/// Weights `w` such that `Σ w[k]·y[k]` over offsets `-half..=half` is the
/// value at offset 0 of the least-squares polynomial of `degree`. Needs
/// `2·half + 1 > degree`.
pub fn savgol_weights(half: usize, degree: usize) -> Vec<f64> {
    let width = 2 * half + 1;
    assert!(width > degree, "window narrower than polynomial");
    let scale = half.max(1) as f64;
    let xs: Vec<f64> = (0..width).map(|k| (k as f64 - half as f64) / scale).collect();
    let m = degree + 1;
    // Normal equations A = VᵀV; the weights are the first row of A⁻¹Vᵀ,
    // i.e. V·(A⁻¹e₀) since A is symmetric.
    let mut a = vec![vec![0.0; m + 1]; m];
    for (r, row) in a.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().take(m).enumerate() {
            *cell = xs.iter().map(|x| x.powi((r + c) as i32)).sum();
        }
        row[m] = if r == 0 { 1.0 } else { 0.0 };
    }
    let z = solve(a);
    xs.iter()
        .map(|x| z.iter().enumerate().map(|(j, zj)| zj * x.powi(j as i32)).sum())
        .collect()
}

/// Gaussian elimination with partial pivoting on an augmented system.
fn solve(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty");
        a.swap(col, pivot);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..=n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][n] - tail) / a[r][r];
    }
    x
}

/// Replaces every accuracy by the value of the least-squares polynomial fit
/// over a window centred on it. Near the ends the window shrinks
/// symmetrically; where it holds no more than `degree` points, the fit
/// interpolates and the value is kept. Other fields are untouched.
pub fn savgol_smooth(curve: &LearningCurve, cfg: SmoothingConfig) -> Result<LearningCurve, DynamicsError> {
    cfg.validate()?;
    let n = curve.len();
    if n == 0 {
        return Err(DynamicsError::EmptyCurve);
    }
    if n < cfg.degree + 1 {
        return Err(DynamicsError::TooShort {
            len: n,
            degree: cfg.degree,
        });
    }
    let ys = curve.accuracies();
    let max_half = cfg.window / 2;
    let mut cache: Vec<Option<Vec<f64>>> = vec![None; max_half + 1];
    let mut out = curve.clone();
    for (i, point) in out.points.iter_mut().enumerate() {
        let half = max_half.min(i).min(n - 1 - i);
        if 2 * half < cfg.degree + 1 {
            continue;
        }
        let w = cache[half].get_or_insert_with(|| savgol_weights(half, cfg.degree));
        let v: f64 = w.iter().zip(&ys[i - half..=i + half]).map(|(w, y)| w * y).sum();
        point.accuracy = v.clamp(0.0, 1.0);
    }
    Ok(out)
}
