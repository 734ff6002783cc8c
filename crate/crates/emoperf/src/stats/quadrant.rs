//! Emotion quadrants and a multinomial logistic classifier over them.
//!
//! The quadrant of a clip is read off the signs of its standardized
//! (arousal, valence) coordinates. The classifier is a 4-class softmax
//! regression with a small ridge on every parameter (intercepts
//! included), which keeps the objective strictly convex and the optimum
//! finite even for separable data. Fitting is full Newton with step
//! halving; evaluation is leave-one-out, warm-started from the full fit.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::stats::ols::Standardizer;
use crate::stats::StatsError;

/// Ridge strength applied to all classifier parameters.
pub const CLASSIFIER_RIDGE: f64 = 1e-4;
/// Chance accuracy for four balanced classes.
pub const CHANCE_BASELINE: f64 = 0.25;
const GRAD_TOL: f64 = 1e-8;
const MAX_ITERATIONS: usize = 500;
const N_CLASSES: usize = 4;

/// The four sign quadrants of the standardized (arousal, valence) plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub enum Quadrant {
    Happy,
    Relaxed,
    Sad,
    Angry,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [
        Quadrant::Happy,
        Quadrant::Relaxed,
        Quadrant::Sad,
        Quadrant::Angry,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Quadrant::Happy => "happy",
            Quadrant::Relaxed => "relaxed",
            Quadrant::Sad => "sad",
            Quadrant::Angry => "angry",
        }
    }

    fn index(self) -> usize {
        match self {
            Quadrant::Happy => 0,
            Quadrant::Relaxed => 1,
            Quadrant::Sad => 2,
            Quadrant::Angry => 3,
        }
    }
}

impl std::fmt::Display for Quadrant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sign-based quadrant assignment. Zero counts as positive on both axes,
/// so the origin lands in `Happy`.
pub fn quadrantize(arousal_z: f64, valence_z: f64) -> Quadrant {
    debug_assert!(arousal_z.is_finite() && valence_z.is_finite());
    match (arousal_z >= 0.0, valence_z >= 0.0) {
        (true, true) => Quadrant::Happy,
        (false, true) => Quadrant::Relaxed,
        (false, false) => Quadrant::Sad,
        (true, false) => Quadrant::Angry,
    }
}

#[derive(Debug, Clone)]
pub struct ClassifyReport {
    pub n: usize,
    pub loo_accuracy: f64,
    /// Chance level for four classes, for side-by-side reporting.
    pub baseline: f64,
    /// Observed label counts.
    pub class_counts: BTreeMap<Quadrant, usize>,
}

/// Rows with a leading 1 for the intercept, in standardized scale.
struct Encoded {
    z: Vec<Vec<f64>>,
    y: Vec<usize>,
    m: usize,
}

fn encode(rows: &[Vec<f64>], labels: &[Quadrant]) -> Result<Encoded, StatsError> {
    let n = rows.len();
    let p = rows.first().map_or(0, |r| r.len());
    assert_eq!(labels.len(), n, "label length must match row count");
    assert!(rows.iter().all(|r| r.len() == p), "ragged feature rows");
    if n < p + 2 {
        return Err(StatsError::TooFewRows { n, p });
    }
    let distinct = labels
        .iter()
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    if distinct < 2 {
        return Err(StatsError::SingleClass { found: distinct });
    }
    let names: Vec<String> = (0..p).map(|j| format!("column {j}")).collect();
    let standardizer = Standardizer::fit(rows, &names)?;
    let z = rows
        .iter()
        .map(|r| {
            let mut zi = Vec::with_capacity(p + 1);
            zi.push(1.0);
            zi.extend(standardizer.apply_row(r));
            zi
        })
        .collect();
    Ok(Encoded {
        z,
        y: labels.iter().map(|l| l.index()).collect(),
        m: p + 1,
    })
}

/// Class probabilities for one row under parameters `theta` (class-major
/// blocks of length `m`).
fn probabilities(theta: &DVector<f64>, zi: &[f64], m: usize) -> [f64; N_CLASSES] {
    let mut scores = [0.0; N_CLASSES];
    for (k, score) in scores.iter_mut().enumerate() {
        *score = zi
            .iter()
            .enumerate()
            .map(|(a, &z)| theta[k * m + a] * z)
            .sum();
    }
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs = [0.0; N_CLASSES];
    let mut total = 0.0;
    for k in 0..N_CLASSES {
        probs[k] = (scores[k] - max).exp();
        total += probs[k];
    }
    for p in &mut probs {
        *p /= total;
    }
    probs
}

fn negative_log_likelihood(theta: &DVector<f64>, data: &Encoded, skip: Option<usize>) -> f64 {
    let mut nll = 0.0;
    for (i, zi) in data.z.iter().enumerate() {
        if skip == Some(i) {
            continue;
        }
        let probs = probabilities(theta, zi, data.m);
        nll -= probs[data.y[i]].max(1e-300).ln();
    }
    nll + 0.5 * CLASSIFIER_RIDGE * theta.dot(theta)
}

/// Newton fit of the ridged softmax objective, leaving out `skip` when
/// given. Converges when the gradient norm drops below `GRAD_TOL`.
fn newton_fit(
    data: &Encoded,
    init: DVector<f64>,
    skip: Option<usize>,
) -> Result<DVector<f64>, StatsError> {
    let m = data.m;
    let dim = N_CLASSES * m;
    let mut theta = init;
    let mut nll = negative_log_likelihood(&theta, data, skip);
    for _ in 0..MAX_ITERATIONS {
        let mut grad = &theta * CLASSIFIER_RIDGE;
        let mut hess = DMatrix::identity(dim, dim) * CLASSIFIER_RIDGE;
        for (i, zi) in data.z.iter().enumerate() {
            if skip == Some(i) {
                continue;
            }
            let probs = probabilities(&theta, zi, m);
            for k in 0..N_CLASSES {
                let indicator = if data.y[i] == k { 1.0 } else { 0.0 };
                let gk = probs[k] - indicator;
                for a in 0..m {
                    grad[k * m + a] += gk * zi[a];
                }
            }
            for k in 0..N_CLASSES {
                for l in k..N_CLASSES {
                    let lam = if k == l {
                        probs[k] * (1.0 - probs[k])
                    } else {
                        -probs[k] * probs[l]
                    };
                    if lam == 0.0 {
                        continue;
                    }
                    for a in 0..m {
                        let za = lam * zi[a];
                        for b in 0..m {
                            hess[(k * m + a, l * m + b)] += za * zi[b];
                            if l != k {
                                hess[(l * m + b, k * m + a)] += za * zi[b];
                            }
                        }
                    }
                }
            }
        }
        if grad.norm() < GRAD_TOL {
            return Ok(theta);
        }
        let chol = hess.cholesky().ok_or_else(|| StatsError::IllConditioned {
            context: "classifier newton step".to_string(),
        })?;
        let direction = chol.solve(&grad);

        // Strict descent: once every trial step rounds to the same
        // objective value the iterate sits at the floating-point floor,
        // and the no-descent exit below is the correct way out.
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let candidate = &theta - &direction * step;
            let cand_nll = negative_log_likelihood(&candidate, data, skip);
            if cand_nll < nll {
                theta = candidate;
                nll = cand_nll;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No descent at machine precision: the current point is the
            // optimum for all practical purposes.
            return Ok(theta);
        }
    }
    Err(StatsError::NonConvergence {
        iterations: MAX_ITERATIONS,
    })
}

/// Highest-scoring class, first on ties.
fn predict(theta: &DVector<f64>, zi: &[f64], m: usize) -> usize {
    let probs = probabilities(theta, zi, m);
    let mut best = 0;
    for k in 1..N_CLASSES {
        if probs[k] > probs[best] {
            best = k;
        }
    }
    best
}

/// Fits the classifier on all rows, then scores it by leave-one-out:
/// each held-out prediction comes from a model refitted without that row,
/// warm-started from the full fit.
pub fn classify_quadrants(
    rows: &[Vec<f64>],
    labels: &[Quadrant],
) -> Result<ClassifyReport, StatsError> {
    let data = encode(rows, labels)?;
    let dim = N_CLASSES * data.m;
    let full = newton_fit(&data, DVector::zeros(dim), None)?;

    let mut correct = 0;
    for i in 0..data.z.len() {
        let theta = newton_fit(&data, full.clone(), Some(i))?;
        if predict(&theta, &data.z[i], data.m) == data.y[i] {
            correct += 1;
        }
    }
    let mut class_counts: BTreeMap<Quadrant, usize> = BTreeMap::new();
    for l in labels {
        *class_counts.entry(*l).or_insert(0) += 1;
    }
    Ok(ClassifyReport {
        n: data.z.len(),
        loo_accuracy: correct as f64 / data.z.len() as f64,
        baseline: CHANCE_BASELINE,
        class_counts,
    })
}
