//! Goodness-of-fit summaries shared by every evaluation path.

use crate::stats::dist::t_two_sided_p;
use crate::stats::StatsError;
use crate::util::{mean, pearson};

/// Fit quality of a prediction vector against observed targets, adjusted
/// for the number of predictors that produced it.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct RegressionMetrics {
    pub n: usize,
    pub p: usize,
    pub r2: f64,
    pub adj_r2: f64,
    pub rmse: f64,
    pub corr: f64,
}

/// Computes R^2, adjusted R^2, RMSE, and the Pearson correlation between
/// predictions and truth. `p` is the predictor count of the generating
/// model. Constant predictions get `corr = 0` by convention so downstream
/// p-values degrade to 1 instead of NaN; a constant target is an error.
pub fn regression_metrics(
    y_true: &[f64],
    y_pred: &[f64],
    p: usize,
) -> Result<RegressionMetrics, StatsError> {
    assert_eq!(y_true.len(), y_pred.len(), "prediction length mismatch");
    let n = y_true.len();
    if n < p + 2 {
        return Err(StatsError::TooFewRows { n, p });
    }
    let y_bar = mean(y_true);
    let tss: f64 = y_true.iter().map(|y| (y - y_bar).powi(2)).sum();
    if tss <= 0.0 {
        return Err(StatsError::ConstantTarget);
    }
    let rss: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(y, f)| (y - f).powi(2))
        .sum();
    let r2 = 1.0 - rss / tss;
    let adj_r2 = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - p as f64 - 1.0);
    let rmse = (rss / n as f64).sqrt();
    let corr = pearson(y_true, y_pred).unwrap_or(0.0);
    Ok(RegressionMetrics {
        n,
        p,
        r2,
        adj_r2,
        rmse,
        corr,
    })
}

/// Two-sided p-value for a Pearson correlation of `r` over `n` pairs,
/// via the exact t transform with `n - 2` degrees of freedom. Perfect
/// correlation maps to zero; `n < 3` leaves no degrees of freedom and
/// is an error.
pub fn corr_pvalue(r: f64, n: usize) -> Result<f64, StatsError> {
    if n < 3 {
        return Err(StatsError::TooFewForPValue { n });
    }
    if r.abs() >= 1.0 {
        return Ok(0.0);
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    Ok(t_two_sided_p(t, df))
}
