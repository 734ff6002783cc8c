//! Within-piece performance variation: can a model trained on other
//! pieces track how ratings differ between performances of the same one?
//!
//! For each piece the model is fitted on every other piece, and its
//! predictions for the held-out performances are scored against that
//! piece's own spread: the fraction of variance unexplained (FVU) uses
//! the piece's true mean as the baseline, so an FVU of 1 means "no
//! better than guessing the piece mean" and values below 1 mean the
//! model tracks the pianists.

use crate::stats::design::Design;
use crate::stats::metrics::corr_pvalue;
use crate::stats::ols::ols_fit;
use crate::stats::StatsError;
use crate::util::{mean, pearson};

/// Two-sided significance threshold for per-piece correlations.
pub const SIGNIFICANCE_LEVEL: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct PieceEval {
    pub piece_id: String,
    pub n: usize,
    pub fvu: f64,
    /// Pearson correlation between predicted and observed ratings within
    /// the piece; undefined when either side is constant.
    pub corr: Option<f64>,
    pub p_value: Option<f64>,
    pub significant: bool,
}

#[derive(Debug, Clone)]
pub struct PerfVariationReport {
    pub pieces: Vec<PieceEval>,
    /// Pieces skipped because their performances share one rating, which
    /// leaves the FVU denominator at zero.
    pub excluded: Vec<String>,
    pub fvu_mean: f64,
    /// Mean over pieces where the correlation is defined.
    pub corr_mean: Option<f64>,
    /// Share of evaluated pieces with p below [`SIGNIFICANCE_LEVEL`];
    /// undefined correlations count as not significant.
    pub fraction_significant: f64,
}

/// FVU and correlation of predictions against a piece's own ratings.
pub(crate) fn score_piece(y_true: &[f64], y_pred: &[f64]) -> (f64, Option<f64>) {
    let center = mean(y_true);
    let tss: f64 = y_true.iter().map(|y| (y - center).powi(2)).sum();
    assert!(tss > 0.0, "caller must exclude zero-variance pieces");
    let rss: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(y, f)| (y - f).powi(2))
        .sum();
    (rss / tss, pearson(y_true, y_pred))
}

/// Leave-one-piece-out evaluation over the whole design.
pub fn performance_variation_eval(design: &Design) -> Result<PerfVariationReport, StatsError> {
    let mut piece_order: Vec<String> = Vec::new();
    for p in &design.pieces {
        if !piece_order.contains(p) {
            piece_order.push(p.clone());
        }
    }
    if piece_order.len() < 2 {
        return Err(StatsError::TooFewGroups {
            kind: "piece".to_string(),
            found: piece_order.len(),
        });
    }
    for piece in &piece_order {
        let n = design.pieces.iter().filter(|p| *p == piece).count();
        if n < 3 {
            return Err(StatsError::TooFewPerformances {
                piece_id: piece.clone(),
                n,
            });
        }
    }

    let mut pieces = Vec::new();
    let mut excluded = Vec::new();
    for piece in &piece_order {
        let test_idx: Vec<usize> = (0..design.n())
            .filter(|&i| design.pieces[i] == *piece)
            .collect();
        let y_true: Vec<f64> = test_idx.iter().map(|&i| design.y[i]).collect();
        let center = mean(&y_true);
        if y_true.iter().all(|y| (y - center).abs() == 0.0) {
            log::warn!("piece {piece} has identical ratings; excluded from the report");
            excluded.push(piece.clone());
            continue;
        }

        let train_idx: Vec<usize> = (0..design.n())
            .filter(|&i| design.pieces[i] != *piece)
            .collect();
        let (train_rows, train_y) = design.subset(&train_idx);
        let model = ols_fit(&train_rows, &design.feature_names, &train_y)?;
        let y_pred: Vec<f64> = test_idx
            .iter()
            .map(|&i| model.predict_row(&design.rows[i]))
            .collect();

        let (fvu, corr) = score_piece(&y_true, &y_pred);
        let p_value = match corr {
            Some(r) => Some(corr_pvalue(r, y_true.len())?),
            None => None,
        };
        let significant = p_value.is_some_and(|p| p < SIGNIFICANCE_LEVEL);
        pieces.push(PieceEval {
            piece_id: piece.clone(),
            n: y_true.len(),
            fvu,
            corr,
            p_value,
            significant,
        });
    }

    if pieces.is_empty() {
        return Err(StatsError::NoValidPieces);
    }
    let fvu_mean = mean(&pieces.iter().map(|p| p.fvu).collect::<Vec<f64>>());
    let corrs: Vec<f64> = pieces.iter().filter_map(|p| p.corr).collect();
    let corr_mean = if corrs.is_empty() {
        None
    } else {
        Some(mean(&corrs))
    };
    let fraction_significant =
        pieces.iter().filter(|p| p.significant).count() as f64 / pieces.len() as f64;
    Ok(PerfVariationReport {
        pieces,
        excluded,
        fvu_mean,
        corr_mean,
        fraction_significant,
    })
}
