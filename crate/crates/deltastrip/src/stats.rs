//! Small statistics toolkit for the Monte Carlo experiments: binomial
//! interval estimates and least-squares scaling fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile used by the Wilson interval.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// A binomial proportion with its Wilson 95% score interval.
///
/// The Wilson interval stays valid at zero or full event counts, where the
/// plain normal approximation collapses to a point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: usize,
    pub trials: usize,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Wilson 95% score interval for `successes` out of `trials`.
pub fn wilson(successes: usize, trials: usize) -> Result<Proportion> {
    if trials == 0 {
        return Err(Error::InvalidArgument("a proportion needs at least one trial".into()));
    }
    if successes > trials {
        return Err(Error::InvalidArgument(format!(
            "{successes} successes out of {trials} trials"
        )));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (Z_95 / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    Ok(Proportion {
        successes,
        trials,
        estimate: p,
        lower: (center - half).max(0.0),
        upper: (center + half).min(1.0),
    })
}

/// Ordinary least-squares line `y ≈ slope·x + intercept` with its
/// coefficient of determination.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Weighted least-squares line through `(x, y)` pairs. `weights = None`
/// gives the ordinary fit; weights must be positive.
pub fn fit_line(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> Result<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "line fit needs matched samples with at least 2 points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let w_of = |i: usize| weights.map_or(1.0, |w| w[i]);
    if let Some(w) = weights {
        if w.len() != xs.len() {
            return Err(Error::InvalidArgument(format!(
                "{} weights for {} points",
                w.len(),
                xs.len()
            )));
        }
        if w.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::InvalidArgument("weights must be positive and finite".into()));
        }
    }
    let n = xs.len();
    let sw: f64 = (0..n).map(w_of).sum();
    let mx: f64 = (0..n).map(|i| w_of(i) * xs[i]).sum::<f64>() / sw;
    let my: f64 = (0..n).map(|i| w_of(i) * ys[i]).sum::<f64>() / sw;
    let sxx: f64 = (0..n).map(|i| w_of(i) * (xs[i] - mx) * (xs[i] - mx)).sum();
    let sxy: f64 = (0..n).map(|i| w_of(i) * (xs[i] - mx) * (ys[i] - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidArgument("all abscissae coincide; slope is undefined".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = (0..n).map(|i| w_of(i) * (ys[i] - my) * (ys[i] - my)).sum();
    let ss_res: f64 = (0..n)
        .map(|i| {
            let r = ys[i] - slope * xs[i] - intercept;
            w_of(i) * r * r
        })
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(LineFit { slope, intercept, r_squared, points: n })
}

/// Least-squares power-law fit `y ≈ C·x^slope` via the log-log line.
/// Every sample must be strictly positive.
pub fn fit_log_log(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> Result<LineFit> {
    for (&x, &y) in xs.iter().zip(ys) {
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "log-log fit needs positive samples, got ({x}, {y})"
            )));
        }
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_line(&lx, &ly, weights)
}
