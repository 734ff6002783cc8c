//! Random-intercept linear mixed model, fitted by maximum likelihood.
//!
//! The model is `y = X beta + u[group] + e` with `u ~ N(0, var_random)`
//! and `e ~ N(0, var_residual)`. Writing `lambda = var_random /
//! var_residual`, the marginal covariance per group is `var_residual *
//! (I + lambda J)`, whose inverse and determinant have closed forms:
//!
//! ```text
//! (I + lambda J)^-1 = I - (lambda / (1 + lambda n_g)) J
//! log det(I + lambda J) = log(1 + lambda n_g)
//! ```
//!
//! so the likelihood profiles down to a one-dimensional search over
//! `lambda`, done on a log-spaced grid followed by golden-section
//! refinement. No iterative EM is involved; every evaluation is exact
//! GLS algebra on per-group sufficient statistics.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::stats::ols::Standardizer;
use crate::stats::StatsError;
use crate::util::pop_var;

const LOG_LAMBDA_MIN: f64 = -12.0;
const LOG_LAMBDA_MAX: f64 = 12.0;
const GRID_STEP: f64 = 0.25;
const REFINE_TOL: f64 = 1e-6;

/// Which edge of the variance-ratio search the optimum landed on.
/// `Lower` means the random effect vanished (a legal solution);
/// `Upper` means the residual variance is effectively zero and the
/// reported ratio saturates the search range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Boundary {
    Lower,
    Upper,
}

#[derive(Debug, Clone)]
pub struct MixedModelReport {
    pub feature_names: Vec<String>,
    /// Raw-scale fixed effects, intercept first.
    pub fixed_coefficients: Vec<f64>,
    pub var_random: f64,
    pub var_residual: f64,
    /// Intraclass share `var_random / (var_random + var_residual)`,
    /// computed from the stored components.
    pub e_random: f64,
    pub log_likelihood: f64,
    /// Fitted variance ratio `var_random / var_residual`.
    pub lambda: f64,
    pub boundary: Option<Boundary>,
    pub n: usize,
    pub n_groups: usize,
}

struct GroupStats {
    n_g: f64,
    /// Column sums of the standardized design over the group's rows.
    s: DVector<f64>,
    /// Target sum over the group's rows.
    t: f64,
}

struct ProfileContext {
    ztz: DMatrix<f64>,
    zty: DVector<f64>,
    yty: f64,
    groups: Vec<GroupStats>,
    n: usize,
    m: usize,
}

struct Profile {
    loglik: f64,
    beta: DVector<f64>,
    sigma2: f64,
}

impl ProfileContext {
    fn build(z: &DMatrix<f64>, y: &DVector<f64>, group_ids: &[usize], n_groups: usize) -> Self {
        let n = z.nrows();
        let m = z.ncols();
        let ztz = z.transpose() * z;
        let zty = z.transpose() * y;
        let yty = y.dot(y);
        let mut groups: Vec<GroupStats> = (0..n_groups)
            .map(|_| GroupStats {
                n_g: 0.0,
                s: DVector::zeros(m),
                t: 0.0,
            })
            .collect();
        for i in 0..n {
            let g = &mut groups[group_ids[i]];
            g.n_g += 1.0;
            g.s += z.row(i).transpose();
            g.t += y[i];
        }
        ProfileContext {
            ztz,
            zty,
            yty,
            groups,
            n,
            m,
        }
    }

    /// GLS at a fixed variance ratio. Returns the profiled log-likelihood,
    /// the standardized-scale coefficients, and the ML residual variance.
    fn evaluate(&self, lambda: f64) -> Result<Profile, StatsError> {
        let mut a = self.ztz.clone();
        let mut b = self.zty.clone();
        let mut yvy = self.yty;
        let mut log_det = 0.0;
        for g in &self.groups {
            let w = lambda / (1.0 + lambda * g.n_g);
            if w != 0.0 {
                a.ger(-w, &g.s, &g.s, 1.0);
                b.axpy(-w * g.t, &g.s, 1.0);
                yvy -= w * g.t * g.t;
            }
            log_det += (1.0 + lambda * g.n_g).ln();
        }
        let chol = a.cholesky().ok_or_else(|| StatsError::IllConditioned {
            context: "mixed model generalized least squares".to_string(),
        })?;
        let beta = chol.solve(&b);
        let q = (yvy - beta.dot(&b)).max(1e-300);
        let sigma2 = q / self.n as f64;
        let loglik = -0.5 * self.n as f64 * ((std::f64::consts::TAU * sigma2).ln() + 1.0)
            - 0.5 * log_det;
        Ok(Profile {
            loglik,
            beta,
            sigma2,
        })
    }
}

/// Golden-section maximization of `f` on `[a, b]` to the given width.
fn golden_max(
    mut a: f64,
    mut b: f64,
    tol: f64,
    mut f: impl FnMut(f64) -> Result<f64, StatsError>,
) -> Result<f64, StatsError> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

fn index_groups(groups: &[String]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    let mut assigned = Vec::with_capacity(groups.len());
    for g in groups {
        let next = ids.len();
        let id = *ids.entry(g.as_str()).or_insert(next);
        assigned.push(id);
    }
    (assigned, ids.len())
}

/// Fits the random-intercept model. `rows` may have zero columns for an
/// intercept-only fit. `groups[i]` labels the grouping level of row `i`.
///
/// A ratio driven to the lower edge reports `var_random = 0` (flagged,
/// not an error). A target with no variance at all leaves the residual
/// variance undefined and is rejected.
pub fn lmm_random_intercept(
    rows: &[Vec<f64>],
    names: &[String],
    y: &[f64],
    groups: &[String],
) -> Result<MixedModelReport, StatsError> {
    let context = FitContext::prepare(rows, names, y, groups)?;

    // Coarse pass: the exact zero plus a log-spaced grid of ratios.
    let steps = ((LOG_LAMBDA_MAX - LOG_LAMBDA_MIN) / GRID_STEP).round() as usize;
    let mut best_lambda = 0.0;
    let mut best = context.profile.evaluate(0.0)?;
    let mut best_grid_index = None;
    for i in 0..=steps {
        let log_lambda = LOG_LAMBDA_MIN + GRID_STEP * i as f64;
        let lambda = log_lambda.exp();
        let prof = context.profile.evaluate(lambda)?;
        if prof.loglik > best.loglik {
            best = prof;
            best_lambda = lambda;
            best_grid_index = Some(i);
        }
    }

    // Refine around an interior winner; an edge winner stays put and is
    // flagged below.
    if let Some(i) = best_grid_index {
        let lo = LOG_LAMBDA_MIN + GRID_STEP * i.saturating_sub(1) as f64;
        let hi = (LOG_LAMBDA_MIN + GRID_STEP * (i + 1) as f64).min(LOG_LAMBDA_MAX);
        let log_best = golden_max(lo, hi, REFINE_TOL, |x| {
            context.profile.evaluate(x.exp()).map(|p| p.loglik)
        })?;
        let refined = context.profile.evaluate(log_best.exp())?;
        if refined.loglik > best.loglik {
            best = refined;
            best_lambda = log_best.exp();
        }
    }

    let boundary = if best_grid_index.is_none() {
        Some(Boundary::Lower)
    } else if best_lambda.ln() >= LOG_LAMBDA_MAX - GRID_STEP {
        log::warn!(
            "variance ratio saturated the search range; residual variance is near zero"
        );
        Some(Boundary::Upper)
    } else {
        None
    };
    let lambda = if boundary == Some(Boundary::Lower) {
        0.0
    } else {
        best_lambda
    };
    Ok(context.report(lambda, best, boundary))
}

/// Fits at a caller-chosen ratio instead of searching. Used to pin the
/// model against plain least squares at `lambda = 0`.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn lmm_fixed_lambda(
    rows: &[Vec<f64>],
    names: &[String],
    y: &[f64],
    groups: &[String],
    lambda: f64,
) -> Result<MixedModelReport, StatsError> {
    assert!(lambda >= 0.0, "variance ratio must be nonnegative");
    let context = FitContext::prepare(rows, names, y, groups)?;
    let prof = context.profile.evaluate(lambda)?;
    Ok(context.report(lambda, prof, None))
}

struct FitContext {
    profile: ProfileContext,
    standardizer: Option<Standardizer>,
    names: Vec<String>,
    n_groups: usize,
}

impl FitContext {
    fn prepare(
        rows: &[Vec<f64>],
        names: &[String],
        y: &[f64],
        groups: &[String],
    ) -> Result<FitContext, StatsError> {
        let n = rows.len();
        let p = names.len();
        let m = p + 1;
        assert_eq!(y.len(), n, "target length must match row count");
        assert_eq!(groups.len(), n, "group labels must match row count");
        assert!(rows.iter().all(|r| r.len() == p), "ragged design rows");
        if n < m + 1 {
            return Err(StatsError::TooFewRows { n, p });
        }
        if !(pop_var(y) > 0.0) {
            return Err(StatsError::ConstantTarget);
        }
        let (group_ids, n_groups) = index_groups(groups);
        if n_groups < 2 {
            return Err(StatsError::TooFewGroups {
                kind: "random-intercept".to_string(),
                found: n_groups,
            });
        }
        let standardizer = if p > 0 {
            Some(Standardizer::fit(rows, names)?)
        } else {
            None
        };
        let z = DMatrix::from_fn(n, m, |i, j| {
            if j == 0 {
                1.0
            } else {
                let s = standardizer.as_ref().unwrap();
                (rows[i][j - 1] - s.means[j - 1]) / s.stds[j - 1]
            }
        });
        let yv = DVector::from_column_slice(y);
        let profile = ProfileContext::build(&z, &yv, &group_ids, n_groups);
        Ok(FitContext {
            profile,
            standardizer,
            names: names.to_vec(),
            n_groups,
        })
    }

    fn report(&self, lambda: f64, prof: Profile, boundary: Option<Boundary>) -> MixedModelReport {
        // Undo the standardization so fixed effects are per raw unit.
        let mut fixed = vec![0.0; self.profile.m];
        fixed[0] = prof.beta[0];
        if let Some(s) = &self.standardizer {
            for j in 1..self.profile.m {
                fixed[j] = prof.beta[j] / s.stds[j - 1];
                fixed[0] -= prof.beta[j] * s.means[j - 1] / s.stds[j - 1];
            }
        }
        let var_residual = prof.sigma2;
        let var_random = lambda * prof.sigma2;
        let total = var_random + var_residual;
        let e_random = if total > 0.0 { var_random / total } else { 0.0 };
        MixedModelReport {
            feature_names: self.names.clone(),
            fixed_coefficients: fixed,
            var_random,
            var_residual,
            e_random,
            log_likelihood: prof.loglik,
            lambda,
            boundary,
            n: self.profile.n,
            n_groups: self.n_groups,
        }
    }
}
