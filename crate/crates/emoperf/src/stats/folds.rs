//! Grouped cross-validation.
//!
//! Folds are built from the manifest so grouping follows the corpus
//! structure (pieces, pianists, or single clips), and evaluation pools
//! out-of-fold predictions over the whole design. Each training fit sees
//! only its own fold's rows, which keeps feature standardization inside
//! the training data.

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::ClipRecord;
use crate::stats::design::Design;
use crate::stats::metrics::{regression_metrics, RegressionMetrics};
use crate::stats::ols::ols_fit;
use crate::stats::StatsError;
use crate::util::{mean, pop_var};

/// What defines a held-out group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum FoldKind {
    PieceWise,
    PianistWise,
    LeaveOneOut,
}

impl FoldKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FoldKind::PieceWise => "piecewise",
            FoldKind::PianistWise => "pianistwise",
            FoldKind::LeaveOneOut => "loo",
        }
    }

    fn group_of(self, clip: &ClipRecord) -> &str {
        match self {
            FoldKind::PieceWise => &clip.piece_id,
            FoldKind::PianistWise => &clip.pianist_id,
            FoldKind::LeaveOneOut => &clip.clip_id,
        }
    }

    fn group_noun(self) -> &'static str {
        match self {
            FoldKind::PieceWise => "piece",
            FoldKind::PianistWise => "pianist",
            FoldKind::LeaveOneOut => "clip",
        }
    }
}

impl std::fmt::Display for FoldKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One held-out group: the clips tested when everything else trains.
#[derive(Debug, Clone)]
pub struct Fold {
    pub label: String,
    pub test_clips: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct FoldScheme {
    pub kind: FoldKind,
    pub folds: Vec<Fold>,
}

/// Builds one fold per group, in manifest first-appearance order. Fewer
/// than two groups leaves nothing to hold out and is an error.
pub fn make_folds(clips: &[ClipRecord], kind: FoldKind) -> Result<FoldScheme, StatsError> {
    let mut order: Vec<String> = Vec::new();
    let mut members: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for clip in clips {
        let group = kind.group_of(clip).to_string();
        if !members.contains_key(&group) {
            order.push(group.clone());
        }
        members
            .entry(group)
            .or_default()
            .push(clip.clip_id.clone());
    }
    if order.len() < 2 {
        return Err(StatsError::TooFewGroups {
            kind: kind.group_noun().to_string(),
            found: order.len(),
        });
    }
    let folds = order
        .into_iter()
        .map(|label| {
            let test_clips = members.remove(&label).unwrap();
            Fold { label, test_clips }
        })
        .collect();
    Ok(FoldScheme { kind, folds })
}

/// Cross-validation output: pooled out-of-fold metrics plus the per-fold
/// view, which is only defined where a fold is big enough to adjust.
#[derive(Debug, Clone)]
pub struct CvResult {
    pub kind: FoldKind,
    /// Metrics over all pooled out-of-fold predictions, with `p` equal to
    /// the model's feature count.
    pub pooled: RegressionMetrics,
    /// Out-of-fold prediction per design row, in design order.
    pub predictions: Vec<f64>,
    /// Adjusted R^2 per fold. `None` where the fold has too few rows for
    /// the adjustment (`n <= p + 1`) or a constant target.
    pub fold_adj_r2: Vec<(String, Option<f64>)>,
    /// Mean of the defined per-fold values, if any exist.
    pub fold_mean_adj_r2: Option<f64>,
}

/// Fits the design once per fold, predicting the held-out rows, then
/// scores the pooled predictions. A rank-deficient training fold aborts
/// the whole run; silently skipping a fold would bias the pool.
pub fn cross_validate(design: &Design, scheme: &FoldScheme) -> Result<CvResult, StatsError> {
    let n = design.n();
    let row_of: BTreeMap<&str, usize> = design
        .clip_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();

    let mut predictions = vec![f64::NAN; n];
    let mut covered = vec![false; n];
    let mut fold_adj_r2 = Vec::with_capacity(scheme.folds.len());
    for fold in &scheme.folds {
        let test_set: BTreeSet<usize> = fold
            .test_clips
            .iter()
            .filter_map(|id| row_of.get(id.as_str()).copied())
            .collect();
        if test_set.is_empty() {
            // A fold may be empty here when clips were dropped from the
            // design for missing features; there is nothing to predict.
            continue;
        }
        let train_idx: Vec<usize> = (0..n).filter(|i| !test_set.contains(i)).collect();
        let (train_rows, train_y) = design.subset(&train_idx);
        let model = ols_fit(&train_rows, &design.feature_names, &train_y)?;

        let test_idx: Vec<usize> = (0..n).filter(|i| test_set.contains(i)).collect();
        let mut fold_true = Vec::with_capacity(test_idx.len());
        let mut fold_pred = Vec::with_capacity(test_idx.len());
        for &i in &test_idx {
            let pred = model.predict_row(&design.rows[i]);
            assert!(!covered[i], "folds must not overlap");
            predictions[i] = pred;
            covered[i] = true;
            fold_true.push(design.y[i]);
            fold_pred.push(pred);
        }

        let adj = if fold_true.len() > design.p() + 1 && pop_var(&fold_true) > 0.0 {
            Some(
                regression_metrics(&fold_true, &fold_pred, design.p())
                    .expect("preconditions checked")
                    .adj_r2,
            )
        } else {
            None
        };
        fold_adj_r2.push((fold.label.clone(), adj));
    }

    assert!(
        covered.iter().all(|&c| c),
        "fold scheme must cover every design row"
    );
    let pooled = regression_metrics(&design.y, &predictions, design.p())?;
    let defined: Vec<f64> = fold_adj_r2.iter().filter_map(|(_, a)| *a).collect();
    let fold_mean_adj_r2 = if defined.is_empty() {
        None
    } else {
        Some(mean(&defined))
    };
    Ok(CvResult {
        kind: scheme.kind,
        pooled,
        predictions,
        fold_adj_r2,
        fold_mean_adj_r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Mode, TimeSignature};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::path::PathBuf;

    use crate::stats::ols::tests::normals;

    fn clip(id: String, piece: String, pianist: String) -> ClipRecord {
        ClipRecord {
            clip_id: id,
            piece_id: piece,
            pianist_id: pianist,
            audio_path: PathBuf::from("x.wav"),
            score_path: None,
            time_sig: TimeSignature {
                numerator: 4,
                denominator: 4,
            },
            key: "C".to_string(),
            mode: Mode::Major,
        }
    }

    fn grid_clips(n_pieces: usize, n_pianists: usize) -> Vec<ClipRecord> {
        let mut out = Vec::new();
        for i in 0..n_pieces {
            for j in 0..n_pianists {
                out.push(clip(
                    format!("p{i:02}_g{j}"),
                    format!("piece{i:02}"),
                    format!("pianist{j}"),
                ));
            }
        }
        out
    }

    /// Builds a design directly; clip order mirrors `grid_clips`.
    fn grid_design(
        clips: &[ClipRecord],
        rows: Vec<Vec<f64>>,
        y: Vec<f64>,
        names: &[&str],
    ) -> Design {
        Design {
            clip_ids: clips.iter().map(|c| c.clip_id.clone()).collect(),
            feature_names: names.iter().map(|s| s.to_string()).collect(),
            rows,
            y,
            pieces: clips.iter().map(|c| c.piece_id.clone()).collect(),
            pianists: clips.iter().map(|c| c.pianist_id.clone()).collect(),
        }
    }

    #[test]
    fn fold_counts_match_group_counts() {
        let clips = grid_clips(48, 6);
        assert_eq!(
            make_folds(&clips, FoldKind::PieceWise).unwrap().folds.len(),
            48
        );
        assert_eq!(
            make_folds(&clips, FoldKind::PianistWise).unwrap().folds.len(),
            6
        );
        assert_eq!(
            make_folds(&clips, FoldKind::LeaveOneOut).unwrap().folds.len(),
            288
        );
    }

    #[test]
    fn single_group_is_an_error() {
        let clips = grid_clips(1, 4);
        let err = make_folds(&clips, FoldKind::PieceWise).unwrap_err();
        assert_eq!(
            err,
            StatsError::TooFewGroups {
                kind: "piece".to_string(),
                found: 1
            }
        );
    }

    #[test]
    fn exact_linear_target_scores_one_under_every_scheme() {
        let clips = grid_clips(12, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..36).map(|_| normals(&mut rng, 2)).collect();
        let y: Vec<f64> = rows.iter().map(|r| 1.0 + 2.0 * r[0] - r[1]).collect();
        let design = grid_design(&clips, rows, y, &["a", "b"]);
        for kind in [FoldKind::PieceWise, FoldKind::PianistWise, FoldKind::LeaveOneOut] {
            let scheme = make_folds(&clips, kind).unwrap();
            let cv = cross_validate(&design, &scheme).unwrap();
            assert_abs_diff_eq!(cv.pooled.adj_r2, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn pure_noise_scores_near_zero() {
        let clips = grid_clips(24, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let rows: Vec<Vec<f64>> = (0..96).map(|_| normals(&mut rng, 3)).collect();
        let y = normals(&mut rng, 96);
        let design = grid_design(&clips, rows, y, &["a", "b", "c"]);
        let scheme = make_folds(&clips, FoldKind::PieceWise).unwrap();
        let cv = cross_validate(&design, &scheme).unwrap();
        assert!(
            cv.pooled.adj_r2 <= 0.05,
            "noise scored {}",
            cv.pooled.adj_r2
        );
    }

    #[test]
    fn matches_manual_out_of_fold_loop() {
        let clips = grid_clips(6, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rows: Vec<Vec<f64>> = (0..18).map(|_| normals(&mut rng, 2)).collect();
        let noise = normals(&mut rng, 18);
        let y: Vec<f64> = rows
            .iter()
            .zip(&noise)
            .map(|(r, e)| r[0] + 0.5 * e)
            .collect();
        let design = grid_design(&clips, rows.clone(), y.clone(), &["a", "b"]);
        let scheme = make_folds(&clips, FoldKind::PieceWise).unwrap();
        let cv = cross_validate(&design, &scheme).unwrap();

        let cols = vec!["a".to_string(), "b".to_string()];
        for fold in &scheme.folds {
            let test: Vec<usize> = design
                .clip_ids
                .iter()
                .enumerate()
                .filter(|(_, id)| fold.test_clips.contains(id))
                .map(|(i, _)| i)
                .collect();
            let train: Vec<usize> = (0..18).filter(|i| !test.contains(i)).collect();
            let (tr, ty) = design.subset(&train);
            let model = ols_fit(&tr, &cols, &ty).unwrap();
            for &i in &test {
                assert_abs_diff_eq!(
                    cv.predictions[i],
                    model.predict_row(&rows[i]),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn per_fold_scores_defined_only_for_large_folds() {
        let clips = grid_clips(8, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let rows: Vec<Vec<f64>> = (0..32).map(|_| normals(&mut rng, 2)).collect();
        let y = normals(&mut rng, 32);
        let design = grid_design(&clips, rows, y, &["a", "b"]);

        // Piecewise folds hold out 4 rows; with p = 2 the adjustment
        // needs n > 3, so they qualify.
        let piecewise = make_folds(&clips, FoldKind::PieceWise).unwrap();
        let cv = cross_validate(&design, &piecewise).unwrap();
        assert!(cv.fold_adj_r2.iter().all(|(_, a)| a.is_some()));
        assert!(cv.fold_mean_adj_r2.is_some());

        // Leave-one-out folds never have enough rows.
        let loo = make_folds(&clips, FoldKind::LeaveOneOut).unwrap();
        let cv = cross_validate(&design, &loo).unwrap();
        assert!(cv.fold_adj_r2.iter().all(|(_, a)| a.is_none()));
        assert!(cv.fold_mean_adj_r2.is_none());
    }

    #[test]
    fn rank_deficient_training_fold_propagates() {
        let clips = grid_clips(4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let base = normals(&mut rng, 12);
        let rows: Vec<Vec<f64>> = base.iter().map(|&v| vec![v, 2.0 * v]).collect();
        let y = normals(&mut rng, 12);
        let design = grid_design(&clips, rows, y, &["a", "twice_a"]);
        let scheme = make_folds(&clips, FoldKind::PieceWise).unwrap();
        let err = cross_validate(&design, &scheme).unwrap_err();
        assert!(matches!(err, StatsError::RankDeficient { .. }));
    }

    proptest! {
        #[test]
        fn folds_partition_the_clips(
            n_pieces in 2usize..7,
            n_pianists in 2usize..5,
            kind_pick in 0usize..3,
        ) {
            let kind = [FoldKind::PieceWise, FoldKind::PianistWise, FoldKind::LeaveOneOut][kind_pick];
            let clips = grid_clips(n_pieces, n_pianists);
            let scheme = make_folds(&clips, kind).unwrap();
            let mut seen = BTreeSet::new();
            for fold in &scheme.folds {
                prop_assert!(!fold.test_clips.is_empty());
                for id in &fold.test_clips {
                    prop_assert!(seen.insert(id.clone()), "clip {id} appears in two folds");
                }
            }
            prop_assert_eq!(seen.len(), clips.len());
        }
    }
}
