//! Ingestion of externally computed embedding vectors (7-dim perceptual
//! mid-level ratings, 512-dim emotion-model activations) and the PCA
//! reduction applied to the high-dimensional set.
//!
//! The PCA model is fitted on the same clip table it later transforms;
//! features derived from it therefore see the full corpus during fitting,
//! a deliberate caveat documented here rather than hidden.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::corpus::{FeatureSet, FeatureTable};

pub const MIDLEVEL_DIM: usize = 7;
pub const DEAM_DIM: usize = 512;

/// Perceptual mid-level attribute names, the required header of the
/// 7-dim embedding table.
pub const MIDLEVEL_NAMES: [&str; MIDLEVEL_DIM] = [
    "melodiousness",
    "articulation",
    "rhythmic_stability",
    "rhythmic_complexity",
    "dissonance",
    "tonal_stability",
    "minorness",
];

/// Singular values at or below this fraction of the largest are treated
/// as numerically zero rank.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: Box<csv::Error>,
    },
    #[error("{path}: expected header [{expected}], found [{found}]")]
    Header {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path}: clip {clip_id}: expected {expected} values, found {found}")]
    DimensionMismatch {
        path: PathBuf,
        clip_id: String,
        expected: usize,
        found: usize,
    },
    #[error("{path}: clip {clip_id}: non-finite value in column {column}")]
    NonFinite {
        path: PathBuf,
        clip_id: String,
        column: usize,
    },
    #[error("{path}: duplicate clip_id {clip_id}")]
    DuplicateClipId { path: PathBuf, clip_id: String },
    #[error("PCA needs at least 2 rows, got {n}")]
    TooFewRows { n: usize },
    #[error("PCA input has zero total variance")]
    ZeroVariance,
    #[error("vector has {found} entries, model expects {expected}")]
    BadVectorDim { expected: usize, found: usize },
}

fn csv_err(path: &Path, e: csv::Error) -> EmbedError {
    EmbedError::Csv {
        path: path.to_path_buf(),
        source: Box::new(e),
    }
}

/// Loads an embedding CSV: `clip_id` column followed by exactly
/// `expected_dim` numeric columns. Column names are free-form here;
/// [`load_midlevel`] pins them for the 7-dim set.
pub fn load_embeddings(
    path: &Path,
    expected_dim: usize,
) -> Result<BTreeMap<String, Vec<f64>>, EmbedError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => EmbedError::Io {
                path: path.to_path_buf(),
                source: match e.into_kind() {
                    csv::ErrorKind::Io(io) => io,
                    _ => unreachable!(),
                },
            },
            _ => csv_err(path, e),
        })?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.get(0).map(str::trim) != Some("clip_id") || header.len() != expected_dim + 1 {
        return Err(EmbedError::Header {
            path: path.to_path_buf(),
            expected: format!("clip_id + {expected_dim} value columns"),
            found: format!(
                "{} columns starting {:?}",
                header.len(),
                header.get(0).unwrap_or("")
            ),
        });
    }

    let mut rows = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let clip_id = rec.get(0).unwrap_or("").trim().to_string();
        if rec.len() != expected_dim + 1 {
            return Err(EmbedError::DimensionMismatch {
                path: path.to_path_buf(),
                clip_id,
                expected: expected_dim,
                found: rec.len().saturating_sub(1),
            });
        }
        let mut values = Vec::with_capacity(expected_dim);
        for (i, field) in rec.iter().skip(1).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| EmbedError::NonFinite {
                path: path.to_path_buf(),
                clip_id: clip_id.clone(),
                column: i + 1,
            })?;
            if !v.is_finite() {
                return Err(EmbedError::NonFinite {
                    path: path.to_path_buf(),
                    clip_id: clip_id.clone(),
                    column: i + 1,
                });
            }
            values.push(v);
        }
        if rows.insert(clip_id.clone(), values).is_some() {
            return Err(EmbedError::DuplicateClipId {
                path: path.to_path_buf(),
                clip_id,
            });
        }
    }
    Ok(rows)
}

/// Loads the 7-dim mid-level table; the header must name the seven
/// attributes of [`MIDLEVEL_NAMES`] in order, after `clip_id`.
pub fn load_midlevel(path: &Path) -> Result<FeatureTable, EmbedError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => EmbedError::Io {
            path: path.to_path_buf(),
            source: match e.into_kind() {
                csv::ErrorKind::Io(io) => io,
                _ => unreachable!(),
            },
        },
        _ => csv_err(path, e),
    })?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let mut expected = vec!["clip_id".to_string()];
    expected.extend(MIDLEVEL_NAMES.iter().map(|s| s.to_string()));
    if header != expected {
        return Err(EmbedError::Header {
            path: path.to_path_buf(),
            expected: expected.join(","),
            found: header.join(","),
        });
    }
    drop(rdr);

    let rows = load_embeddings(path, MIDLEVEL_DIM)?;
    let mut table = FeatureTable::new(
        FeatureSet::MidLevel,
        MIDLEVEL_NAMES.iter().map(|s| s.to_string()).collect(),
    );
    for (clip_id, values) in rows {
        table.insert(clip_id, values);
    }
    Ok(table)
}

/// Center-only PCA fitted by singular value decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// k orthonormal rows of the input dimension.
    pub components: Vec<Vec<f64>>,
    /// Per-component variance, non-increasing.
    pub explained_variance: Vec<f64>,
    /// Cumulative explained-variance ratio, ending ≥ the fit target.
    pub cumulative_ratio: Vec<f64>,
    pub k: usize,
    dim: usize,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Output feature names pca_1..pca_k.
    pub fn feature_names(&self) -> Vec<String> {
        (1..=self.k).map(|i| format!("pca_{i}")).collect()
    }
}

/// Fits a PCA on the rows of `data`, keeping the smallest component count
/// whose cumulative explained-variance ratio reaches `variance_target`.
///
/// Sign convention: each component's largest-magnitude entry (the first,
/// on ties) is made positive, so refits are reproducible.
pub fn pca_fit(data: &[Vec<f64>], variance_target: f64) -> Result<PcaModel, EmbedError> {
    let n = data.len();
    if n < 2 {
        return Err(EmbedError::TooFewRows { n });
    }
    let dim = data[0].len();
    assert!(
        data.iter().all(|r| r.len() == dim),
        "PCA input must be rectangular"
    );
    assert!(
        (0.0..=1.0).contains(&variance_target) && variance_target > 0.0,
        "variance target must be in (0, 1]"
    );

    let mean: Vec<f64> = (0..dim)
        .map(|j| data.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut centered = DMatrix::zeros(n, dim);
    for (i, row) in data.iter().enumerate() {
        for j in 0..dim {
            centered[(i, j)] = row[j] - mean[j];
        }
    }

    let svd = centered.svd(true, true);
    let v_t = svd.v_t.expect("V requested");
    let sigma = &svd.singular_values; // non-increasing
    let s_max = sigma[0];
    if s_max <= 0.0 {
        return Err(EmbedError::ZeroVariance);
    }

    let denom = (n - 1) as f64;
    let variances: Vec<f64> = sigma
        .iter()
        .map(|&s| {
            let s = if s <= s_max * RANK_TOL { 0.0 } else { s };
            s * s / denom
        })
        .collect();
    let total: f64 = variances.iter().sum();

    let mut k = variances.len();
    let mut cum = 0.0;
    let mut cumulative_ratio = Vec::with_capacity(variances.len());
    for (i, v) in variances.iter().enumerate() {
        cum += v;
        cumulative_ratio.push(cum / total);
        if cum / total >= variance_target {
            k = i + 1;
            break;
        }
    }

    let mut components = Vec::with_capacity(k);
    for i in 0..k {
        let mut row: Vec<f64> = (0..dim).map(|j| v_t[(i, j)]).collect();
        // first index of largest magnitude, so ties resolve stably
        let mut lead = 0;
        for (idx, v) in row.iter().enumerate() {
            if v.abs() > row[lead].abs() {
                lead = idx;
            }
        }
        if row[lead] < 0.0 {
            for x in &mut row {
                *x = -*x;
            }
        }
        components.push(row);
    }

    Ok(PcaModel {
        mean,
        components,
        explained_variance: variances[..k].to_vec(),
        cumulative_ratio,
        k,
        dim,
    })
}

/// Projects one vector onto the fitted components.
pub fn pca_transform(model: &PcaModel, x: &[f64]) -> Result<Vec<f64>, EmbedError> {
    if x.len() != model.dim {
        return Err(EmbedError::BadVectorDim {
            expected: model.dim,
            found: x.len(),
        });
    }
    Ok(model
        .components
        .iter()
        .map(|c| {
            x.iter()
                .zip(&model.mean)
                .zip(c)
                .map(|((xi, mi), ci)| (xi - mi) * ci)
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn write_csv(dir: &Path, name: &str, content: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn load_embeddings_small_table() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(
            dir.path(),
            "emb.csv",
            "clip_id,e1,e2,e3\na,1.0,2.0,3.0\nb,4.0,5.0,6.0\n",
        );
        let rows = load_embeddings(&path, 3).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows["a"], vec![1.0, 2.0, 3.0]);
        assert_eq!(rows["b"], vec![4.0, 5.0, 6.0]);
    }

    #[test]
    fn short_row_error_names_the_clip() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(
            dir.path(),
            "emb.csv",
            "clip_id,e1,e2,e3\na,1.0,2.0,3.0\nbad_clip,4.0,5.0\n",
        );
        match load_embeddings(&path, 3).unwrap_err() {
            EmbedError::DimensionMismatch {
                clip_id,
                expected,
                found,
                ..
            } => {
                assert_eq!(clip_id, "bad_clip");
                assert_eq!((expected, found), (3, 2));
            }
            other => panic!("expected dimension error, got {other}"),
        }
    }

    #[test]
    fn non_finite_and_duplicate_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let nan = write_csv(dir.path(), "nan.csv", "clip_id,e1\na,NaN\n");
        assert!(matches!(
            load_embeddings(&nan, 1).unwrap_err(),
            EmbedError::NonFinite { .. }
        ));
        let dup = write_csv(dir.path(), "dup.csv", "clip_id,e1\na,1.0\na,2.0\n");
        assert!(matches!(
            load_embeddings(&dup, 1).unwrap_err(),
            EmbedError::DuplicateClipId { .. }
        ));
    }

    #[test]
    fn midlevel_header_is_pinned() {
        let dir = tempfile::tempdir().unwrap();
        let good = write_csv(
            dir.path(),
            "mid.csv",
            "clip_id,melodiousness,articulation,rhythmic_stability,rhythmic_complexity,dissonance,tonal_stability,minorness\n\
             a,1,2,3,4,5,6,7\n",
        );
        let table = load_midlevel(&good).unwrap();
        assert_eq!(table.names, MIDLEVEL_NAMES.to_vec());
        assert_eq!(table.get("a").unwrap(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);

        let bad = write_csv(
            dir.path(),
            "bad.csv",
            "clip_id,m1,m2,m3,m4,m5,m6,m7\na,1,2,3,4,5,6,7\n",
        );
        assert!(matches!(
            load_midlevel(&bad).unwrap_err(),
            EmbedError::Header { .. }
        ));
    }

    // ── PCA ──

    fn noisy_line(n: usize, dim: usize, noise: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let direction: Vec<f64> = (0..dim).map(|j| ((j + 1) as f64).sin()).collect();
        (0..n)
            .map(|_| {
                let t: f64 = rng.gen_range(-3.0..3.0);
                direction
                    .iter()
                    .map(|d| t * d + noise * rng.gen_range(-1.0..1.0))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn near_line_data_needs_one_component() {
        let data = noisy_line(50, 16, 1e-6, 1);
        let model = pca_fit(&data, 0.98).unwrap();
        assert_eq!(model.k, 1);
        assert!(model.cumulative_ratio[0] >= 0.98);
    }

    #[test]
    fn full_variance_target_recovers_exact_rank() {
        // rank-3 data in 8 dimensions: polynomial basis 1, j, j^2 is
        // linearly independent by the Vandermonde argument.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let basis: Vec<Vec<f64>> = (0..3)
            .map(|b| (0..8).map(|j| ((j + 1) as f64 / 8.0).powi(b)).collect())
            .collect();
        let data: Vec<Vec<f64>> = (0..20)
            .map(|_| {
                let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
                (0..8)
                    .map(|j| (0..3).map(|b| c[b] * basis[b][j]).sum())
                    .collect()
            })
            .collect();
        let model = pca_fit(&data, 1.0).unwrap();
        assert_eq!(model.k, 3, "rank-3 data at full variance target");
    }

    #[test]
    fn threshold_rule_matches_eigen_oracle() {
        // isotropic cloud: many near-equal variances, k close to 0.98·dim
        let dim = 60;
        let n = 300;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let model = pca_fit(&data, 0.98).unwrap();

        // oracle: eigen-decomposition of the sample covariance
        let mean: Vec<f64> = (0..dim)
            .map(|j| data.iter().map(|r| r[j]).sum::<f64>() / n as f64)
            .collect();
        let mut cov = DMatrix::zeros(dim, dim);
        for r in &data {
            for i in 0..dim {
                for j in 0..dim {
                    cov[(i, j)] += (r[i] - mean[i]) * (r[j] - mean[j]);
                }
            }
        }
        cov /= (n - 1) as f64;
        let mut eigs: Vec<f64> = cov.symmetric_eigen().eigenvalues.iter().copied().collect();
        eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let total: f64 = eigs.iter().sum();
        let mut cum = 0.0;
        let mut k_oracle = eigs.len();
        for (i, e) in eigs.iter().enumerate() {
            cum += e;
            if cum / total >= 0.98 {
                k_oracle = i + 1;
                break;
            }
        }
        assert_eq!(model.k, k_oracle, "threshold rule must match the oracle");
        assert!(model.k > dim / 2, "isotropic data keeps most components");
        for (ours, theirs) in model.explained_variance.iter().zip(&eigs) {
            assert!(
                (ours - theirs).abs() < 1e-8 * total,
                "variance mismatch {ours} vs {theirs}"
            );
        }
    }

    #[test]
    fn components_are_orthonormal_and_variances_sorted() {
        let data = noisy_line(80, 24, 0.5, 4);
        let model = pca_fit(&data, 0.99).unwrap();
        for i in 0..model.k {
            for j in 0..model.k {
                let dot: f64 = model.components[i]
                    .iter()
                    .zip(&model.components[j])
                    .map(|(a, b)| a * b)
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-8, "rows {i},{j}: dot {dot}");
            }
        }
        for w in model.explained_variance.windows(2) {
            assert!(w[0] >= w[1], "variances must be non-increasing");
        }
    }

    #[test]
    fn projected_training_data_has_diagonal_covariance() {
        let data = noisy_line(60, 12, 0.8, 5);
        let model = pca_fit(&data, 0.999).unwrap();
        let proj: Vec<Vec<f64>> = data
            .iter()
            .map(|r| pca_transform(&model, r).unwrap())
            .collect();
        let k = model.k;
        let n = proj.len() as f64;
        let means: Vec<f64> = (0..k)
            .map(|j| proj.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect();
        let mut max_var = 0.0_f64;
        let mut max_off = 0.0_f64;
        for i in 0..k {
            for j in 0..k {
                let c: f64 = proj
                    .iter()
                    .map(|r| (r[i] - means[i]) * (r[j] - means[j]))
                    .sum::<f64>()
                    / (n - 1.0);
                if i == j {
                    max_var = max_var.max(c);
                } else {
                    max_off = max_off.max(c.abs());
                }
            }
        }
        assert!(
            max_off < 1e-8 * max_var,
            "off-diagonal {max_off} vs max variance {max_var}"
        );
    }

    #[test]
    fn transform_centering_and_axes() {
        let data = noisy_line(40, 10, 0.3, 6);
        let model = pca_fit(&data, 0.99).unwrap();
        let at_mean = pca_transform(&model, &model.mean).unwrap();
        assert!(at_mean.iter().all(|v| v.abs() < 1e-10), "mean maps to origin");

        let mut shifted = model.mean.clone();
        for (s, c) in shifted.iter_mut().zip(&model.components[0]) {
            *s += c;
        }
        let along_first = pca_transform(&model, &shifted).unwrap();
        assert!((along_first[0] - 1.0).abs() < 1e-10);
        for v in &along_first[1..] {
            assert!(v.abs() < 1e-10);
        }
    }

    #[test]
    fn rank_limited_data_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // exact rank 2 in 6-D via two fixed directions
        let d1: Vec<f64> = (0..6).map(|j| (j as f64 + 0.3).sin()).collect();
        let d2: Vec<f64> = (0..6).map(|j| (j as f64 * 1.7).cos()).collect();
        let data: Vec<Vec<f64>> = (0..30)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                (0..6).map(|j| a * d1[j] + b * d2[j]).collect()
            })
            .collect();
        let model = pca_fit(&data, 1.0).unwrap();
        assert_eq!(model.k, 2);
        for row in &data {
            let z = pca_transform(&model, row).unwrap();
            let recon: Vec<f64> = (0..6)
                .map(|j| {
                    model.mean[j]
                        + (0..model.k).map(|i| z[i] * model.components[i][j]).sum::<f64>()
                })
                .collect();
            for (x, r) in row.iter().zip(&recon) {
                assert!((x - r).abs() < 1e-6, "reconstruction off: {x} vs {r}");
            }
        }
    }

    #[test]
    fn refit_is_identical() {
        let data = noisy_line(64, 20, 0.4, 8);
        let a = pca_fit(&data, 0.98).unwrap();
        let b = pca_fit(&data, 0.98).unwrap();
        assert_eq!(a.k, b.k);
        for (ra, rb) in a.components.iter().zip(&b.components) {
            for (x, y) in ra.iter().zip(rb) {
                assert_eq!(x.to_bits(), y.to_bits(), "refit must be bit-identical");
            }
        }
    }

    #[test]
    fn degenerate_inputs_error() {
        assert!(matches!(
            pca_fit(&[vec![1.0, 2.0]], 0.98).unwrap_err(),
            EmbedError::TooFewRows { n: 1 }
        ));
        let constant = vec![vec![3.0, 4.0]; 5];
        assert!(matches!(
            pca_fit(&constant, 0.98).unwrap_err(),
            EmbedError::ZeroVariance
        ));
        let model = pca_fit(&noisy_line(10, 4, 0.1, 9), 0.9).unwrap();
        assert!(matches!(
            pca_transform(&model, &[0.0; 3]).unwrap_err(),
            EmbedError::BadVectorDim { expected: 4, found: 3 }
        ));
    }

    #[test]
    fn sign_convention_makes_lead_entry_positive() {
        let data = noisy_line(50, 8, 0.2, 10);
        let model = pca_fit(&data, 0.999).unwrap();
        for row in &model.components {
            let lead = row
                .iter()
                .cloned()
                .max_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())
                .unwrap();
            assert!(lead > 0.0, "largest-magnitude entry must be positive");
        }
    }
}
