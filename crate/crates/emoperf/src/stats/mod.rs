//! The statistical evaluation battery: OLS with diagnostics, regression
//! metrics, grouped cross-validation, a random-intercept mixed model,
//! per-piece performance-variation analysis, exact MCD outlier picking,
//! and quadrant classification.
//!
//! Every fit is a deterministic pure function of its inputs; simulation
//! lives in tests, behind explicit seeds.

pub mod design;
pub mod dist;
pub mod folds;
pub mod lmm;
pub mod mcd;
pub mod metrics;
pub mod ols;
pub mod perfvar;
pub mod quadrant;

use crate::corpus::FeatureSet;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StatsError {
    #[error("feature column {name} has zero variance")]
    ZeroVarianceColumn { name: String },
    #[error("design is rank-deficient; collinear columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("{n} rows is too few for {p} predictors (need at least {})", p + 2)]
    TooFewRows { n: usize, p: usize },
    #[error("target has zero variance; metrics undefined")]
    ConstantTarget,
    #[error("correlation p-value needs n >= 3, got {n}")]
    TooFewForPValue { n: usize },
    #[error("need at least 2 {kind} groups, found {found}")]
    TooFewGroups { kind: String, found: usize },
    #[error("piece {piece_id} has {n} performances; need at least 3")]
    TooFewPerformances { piece_id: String, n: usize },
    #[error("no piece had positive target variance")]
    NoValidPieces,
    #[error("outlier detection needs 5..=12 points, got {n}")]
    BadPointCount { n: usize },
    #[error("all points identical; covariance degenerate")]
    DegenerateCovariance,
    #[error("feature set {set} is not loaded")]
    MissingFeatureSet { set: FeatureSet },
    #[error("design has no rows after matching features to targets")]
    EmptyDesign,
    #[error("classifier needs at least 2 classes, found {found}")]
    SingleClass { found: usize },
    #[error("did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("{context}: linear system is ill-conditioned")]
    IllConditioned { context: String },
}
