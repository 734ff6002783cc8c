//! Assembly of regression designs from a loaded dataset.
//!
//! A [`Design`] is the flat numeric view every estimator consumes: one row
//! per clip in manifest order, raw (unstandardized) feature columns, a
//! z-scored emotion target, and the piece/pianist labels used for grouped
//! resampling. Standardization of the predictor columns happens inside the
//! estimators so cross-validation can restrict it to training folds.

use crate::corpus::{Dataset, FeatureSet};
use crate::stats::StatsError;

/// Which standardized emotion rating a design predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Target {
    Arousal,
    Valence,
}

impl Target {
    pub const BOTH: [Target; 2] = [Target::Arousal, Target::Valence];

    pub fn as_str(self) -> &'static str {
        match self {
            Target::Arousal => "arousal",
            Target::Valence => "valence",
        }
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A fully aligned regression problem: `rows[i]` describes `clip_ids[i]`,
/// which plays `pieces[i]` performed by `pianists[i]` and has standardized
/// rating `y[i]`.
#[derive(Debug, Clone)]
pub struct Design {
    pub clip_ids: Vec<String>,
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub pieces: Vec<String>,
    pub pianists: Vec<String>,
}

impl Design {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn p(&self) -> usize {
        self.feature_names.len()
    }

    /// Row indices of the design, in order. Convenience for fold builders.
    pub fn indices(&self) -> Vec<usize> {
        (0..self.n()).collect()
    }

    /// Extracts the rows and targets at `idx`, preserving the given order.
    pub fn subset(&self, idx: &[usize]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let rows = idx.iter().map(|&i| self.rows[i].clone()).collect();
        let y = idx.iter().map(|&i| self.y[i]).collect();
        (rows, y)
    }
}

/// Builds the design for `target` from the requested feature sets, in
/// manifest order. Clips missing the target or any requested set are
/// skipped with a warning so partial extractions stay usable. Columns of
/// multiple sets are concatenated; names gain a `set:` prefix only when
/// more than one set is requested, keeping single-set reports terse.
pub fn build_design(
    dataset: &Dataset,
    sets: &[FeatureSet],
    target: Target,
) -> Result<Design, StatsError> {
    assert!(!sets.is_empty(), "at least one feature set is required");
    let mut tables = Vec::with_capacity(sets.len());
    for &set in sets {
        let table = dataset
            .feature_table(set)
            .ok_or(StatsError::MissingFeatureSet { set })?;
        tables.push(table);
    }

    let mut feature_names = Vec::new();
    for (&set, table) in sets.iter().zip(&tables) {
        for name in &table.names {
            if sets.len() == 1 {
                feature_names.push(name.clone());
            } else {
                feature_names.push(format!("{set}:{name}"));
            }
        }
    }

    let mut design = Design {
        clip_ids: Vec::new(),
        feature_names,
        rows: Vec::new(),
        y: Vec::new(),
        pieces: Vec::new(),
        pianists: Vec::new(),
    };

    for clip in dataset.clips() {
        let Some(target_row) = dataset.target(&clip.clip_id) else {
            log::warn!("clip {} has no rating; dropped from design", clip.clip_id);
            continue;
        };
        let mut row = Vec::with_capacity(design.feature_names.len());
        let mut complete = true;
        for (&set, table) in sets.iter().zip(&tables) {
            match table.get(&clip.clip_id) {
                Some(values) => row.extend_from_slice(values),
                None => {
                    log::warn!(
                        "clip {} missing {set} features; dropped from design",
                        clip.clip_id
                    );
                    complete = false;
                    break;
                }
            }
        }
        if !complete {
            continue;
        }
        design.clip_ids.push(clip.clip_id.clone());
        design.rows.push(row);
        design.y.push(match target {
            Target::Arousal => target_row.arousal_z,
            Target::Valence => target_row.valence_z,
        });
        design.pieces.push(clip.piece_id.clone());
        design.pianists.push(clip.pianist_id.clone());
    }

    if design.rows.is_empty() {
        return Err(StatsError::EmptyDesign);
    }
    Ok(design)
}
