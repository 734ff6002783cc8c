//! Ordinary least squares with standard errors, t-statistics, and a
//! rank-deficiency diagnostic that names the offending columns.
//!
//! Predictors are z-scored internally (population statistics of the rows
//! given to the fit) before the decomposition, purely for conditioning;
//! reported coefficients and standard errors are mapped back to the raw
//! feature scale, so slopes mean "per unit of input".

use nalgebra::{DMatrix, DVector};

use crate::stats::dist::t_two_sided_p;
use crate::stats::StatsError;
use crate::util::{mean, pop_std};

/// Per-column centering and scaling parameters.
#[derive(Debug, Clone)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    /// Computes population mean and standard deviation per column. A
    /// zero-variance column is an error carrying that column's name.
    pub fn fit(rows: &[Vec<f64>], names: &[String]) -> Result<Standardizer, StatsError> {
        let p = names.len();
        let mut means = Vec::with_capacity(p);
        let mut stds = Vec::with_capacity(p);
        for j in 0..p {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let m = mean(&col);
            let s = pop_std(&col);
            if !(s > 0.0) {
                return Err(StatsError::ZeroVarianceColumn {
                    name: names[j].clone(),
                });
            }
            means.push(m);
            stds.push(s);
        }
        Ok(Standardizer { means, stds })
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&x, (&m, &s))| (x - m) / s)
            .collect()
    }
}

/// A fitted linear model. `coefficients[0]` is the intercept; entry `j + 1`
/// belongs to `feature_names[j]`, both in raw feature scale.
#[derive(Debug, Clone)]
pub struct OlsModel {
    pub feature_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub sigma2: f64,
    pub n: usize,
    pub p: usize,
}

impl OlsModel {
    pub fn df_residual(&self) -> usize {
        self.n - self.p - 1
    }

    pub fn predict_row(&self, raw: &[f64]) -> f64 {
        assert_eq!(raw.len(), self.p, "predict_row width mismatch");
        self.coefficients[0]
            + raw
                .iter()
                .zip(&self.coefficients[1..])
                .map(|(&x, &b)| x * b)
                .sum::<f64>()
    }

    /// t-statistic per feature (intercept excluded), `coef / se`. A zero
    /// standard error yields a signed infinity, or zero for a zero slope.
    pub fn t_statistics(&self) -> Vec<f64> {
        (0..self.p)
            .map(|j| t_ratio(self.coefficients[j + 1], self.standard_errors[j + 1]))
            .collect()
    }
}

fn t_ratio(coef: f64, se: f64) -> f64 {
    if se > 0.0 {
        coef / se
    } else if coef == 0.0 {
        0.0
    } else {
        coef.signum() * f64::INFINITY
    }
}

/// Fits `y ~ 1 + rows` by column-pivoted QR.
///
/// Errors: fewer than `p + 2` rows, a zero-variance column, or a
/// rank-deficient design; the latter names the columns whose pivots
/// collapsed, rather than failing silently.
pub fn ols_fit(rows: &[Vec<f64>], names: &[String], y: &[f64]) -> Result<OlsModel, StatsError> {
    let n = rows.len();
    let p = names.len();
    let m = p + 1;
    assert_eq!(y.len(), n, "target length must match row count");
    assert!(rows.iter().all(|r| r.len() == p), "ragged design rows");
    if n < p + 2 {
        return Err(StatsError::TooFewRows { n, p });
    }
    let standardizer = Standardizer::fit(rows, names)?;
    let zrows: Vec<Vec<f64>> = rows.iter().map(|r| standardizer.apply_row(r)).collect();

    let z = DMatrix::from_fn(n, m, |i, j| if j == 0 { 1.0 } else { zrows[i][j - 1] });
    let yv = DVector::from_column_slice(y);
    let qr = z.clone().col_piv_qr();
    let r = qr.r();

    // Map pivoted column positions back to original column indices, so a
    // dropped pivot can be reported by name.
    let mut pos = DVector::from_fn(m, |i, _| i as f64);
    qr.p().inv_permute_rows(&mut pos);
    let mut orig_of = vec![0usize; m];
    for orig in 0..m {
        orig_of[pos[orig] as usize] = orig;
    }

    let tol = f64::EPSILON * (n.max(m) as f64) * r[(0, 0)].abs();
    let deficient: Vec<usize> = (0..m).filter(|&i| r[(i, i)].abs() <= tol).collect();
    if !deficient.is_empty() {
        let mut columns: Vec<String> = deficient
            .iter()
            .map(|&i| match orig_of[i] {
                0 => "intercept".to_string(),
                k => names[k - 1].clone(),
            })
            .collect();
        columns.sort();
        return Err(StatsError::RankDeficient { columns });
    }

    let mut qty = yv.clone();
    qr.q_tr_mul(&mut qty);
    let qty_top = qty.rows(0, m).clone_owned();
    let ill = || StatsError::IllConditioned {
        context: "least squares back-substitution".to_string(),
    };
    let mut beta = r.solve_upper_triangular(&qty_top).ok_or_else(ill)?;
    qr.p().inv_permute_rows(&mut beta);

    let fitted_v = &z * &beta;
    let residuals_v = &yv - &fitted_v;
    let rss: f64 = residuals_v.iter().map(|e| e * e).sum();
    let df = n - m;
    let sigma2 = rss / df as f64;

    // (Z'Z)^-1 from the triangular factor, un-permuted on both axes.
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(m, m))
        .ok_or_else(ill)?;
    let g = &rinv * rinv.transpose();
    let mut ztz_inv = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            ztz_inv[(orig_of[i], orig_of[j])] = g[(i, j)];
        }
    }
    let cov_z = ztz_inv * sigma2;

    // Undo the standardization: raw = T * standardized-scale coefficients,
    // and the covariance transforms as T C T'.
    let mut t = DMatrix::zeros(m, m);
    t[(0, 0)] = 1.0;
    for j in 1..m {
        t[(0, j)] = -standardizer.means[j - 1] / standardizer.stds[j - 1];
        t[(j, j)] = 1.0 / standardizer.stds[j - 1];
    }
    let coef_raw = &t * &beta;
    let cov_raw = &t * cov_z * t.transpose();
    let standard_errors: Vec<f64> = (0..m).map(|i| cov_raw[(i, i)].max(0.0).sqrt()).collect();

    Ok(OlsModel {
        feature_names: names.to_vec(),
        coefficients: coef_raw.iter().copied().collect(),
        standard_errors,
        fitted: fitted_v.iter().copied().collect(),
        residuals: residuals_v.iter().copied().collect(),
        sigma2,
        n,
        p,
    })
}

/// One feature's contribution, as judged by its t-statistic.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FeatureImportance {
    pub name: String,
    pub coefficient: f64,
    pub t: f64,
    pub p_value: f64,
}

/// Features ranked by |t| descending; ties keep the model's column order.
/// p-values are two-sided with the model's residual degrees of freedom.
pub fn t_importance(model: &OlsModel) -> Vec<FeatureImportance> {
    let df = model.df_residual() as f64;
    let ts = model.t_statistics();
    let mut order: Vec<usize> = (0..model.p).collect();
    order.sort_by(|&a, &b| {
        ts[b]
            .abs()
            .partial_cmp(&ts[a].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
        .into_iter()
        .map(|j| FeatureImportance {
            name: model.feature_names[j].clone(),
            coefficient: model.coefficients[j + 1],
            t: ts[j],
            p_value: t_two_sided_p(ts[j], df),
        })
        .collect()
}
