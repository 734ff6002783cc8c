//! Exact minimum covariance determinant outlier picking in two
//! dimensions, used to flag the most atypical performance of each piece
//! in the (arousal, valence) plane.
//!
//! Group sizes here are tiny (one point per pianist), so instead of the
//! usual subsampling heuristics the determinant is minimized over every
//! h-subset exhaustively. That makes the answer exact and deterministic:
//! ties in the determinant keep the first subset in lexicographic order,
//! and ties in the final distance keep the lowest point index.

use std::collections::BTreeMap;

use crate::corpus::Dataset;
use crate::stats::StatsError;

pub const MCD_MIN_POINTS: usize = 5;
pub const MCD_MAX_POINTS: usize = 12;

/// Ridge added to the covariance so a collinear best subset still yields
/// finite distances.
const COV_RIDGE: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
struct Cov2 {
    mx: f64,
    my: f64,
    sxx: f64,
    sxy: f64,
    syy: f64,
}

/// Population mean and covariance of the selected points.
fn cov_of(points: &[(f64, f64)], subset: &[usize]) -> Cov2 {
    let h = subset.len() as f64;
    let mut mx = 0.0;
    let mut my = 0.0;
    for &i in subset {
        mx += points[i].0;
        my += points[i].1;
    }
    mx /= h;
    my /= h;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for &i in subset {
        let dx = points[i].0 - mx;
        let dy = points[i].1 - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    Cov2 {
        mx,
        my,
        sxx: sxx / h,
        sxy: sxy / h,
        syy: syy / h,
    }
}

fn det(c: &Cov2) -> f64 {
    c.sxx * c.syy - c.sxy * c.sxy
}

/// Advances `subset` to the next h-combination of `0..n` in lexicographic
/// order; false once exhausted.
fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let h = subset.len();
    let mut i = h;
    while i > 0 {
        i -= 1;
        if subset[i] < n - h + i {
            subset[i] += 1;
            for j in i + 1..h {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Index of the most outlying point by robust Mahalanobis distance.
///
/// The subset size is `h = (n + 3) / 2 + 1` (integer division), slightly
/// above half so the covariance stays well determined at these tiny n.
pub fn mcd_outlier(points: &[(f64, f64)]) -> Result<usize, StatsError> {
    let n = points.len();
    if !(MCD_MIN_POINTS..=MCD_MAX_POINTS).contains(&n) {
        return Err(StatsError::BadPointCount { n });
    }
    if points.iter().all(|p| *p == points[0]) {
        return Err(StatsError::DegenerateCovariance);
    }
    let h = (n + 3) / 2 + 1;

    let mut subset: Vec<usize> = (0..h).collect();
    let mut best = cov_of(points, &subset);
    let mut best_det = det(&best);
    while next_combination(&mut subset, n) {
        let cand = cov_of(points, &subset);
        let d = det(&cand);
        if d < best_det {
            best_det = d;
            best = cand;
        }
    }

    let a = best.sxx + COV_RIDGE;
    let b = best.sxy;
    let c = best.syy + COV_RIDGE;
    let inv_det = a * c - b * b;
    assert!(inv_det > 0.0, "ridged covariance must be positive definite");
    let mut outlier = 0;
    let mut max_d2 = f64::NEG_INFINITY;
    for (i, &(x, y)) in points.iter().enumerate() {
        let dx = x - best.mx;
        let dy = y - best.my;
        let d2 = (c * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / inv_det;
        if d2 > max_d2 {
            max_d2 = d2;
            outlier = i;
        }
    }
    Ok(outlier)
}

/// How the corpus splits when each piece donates its most atypical
/// performance in the standardized (arousal, valence) plane.
#[derive(Debug, Clone)]
pub struct OutlierSplit {
    /// One clip per piece, in piece order.
    pub test_clips: Vec<String>,
    /// The remaining clips, in manifest order.
    pub train_clips: Vec<String>,
    /// How often each pianist was the flagged performance.
    pub outliers_per_pianist: BTreeMap<String, usize>,
}

/// Runs [`mcd_outlier`] per piece over the clips that have ratings.
/// The same split serves both emotion targets since it is defined on the
/// joint (arousal, valence) coordinates.
pub fn emotion_outlier_split(dataset: &Dataset) -> Result<OutlierSplit, StatsError> {
    let mut test_clips = Vec::new();
    let mut outliers_per_pianist: BTreeMap<String, usize> = BTreeMap::new();
    for piece in dataset.pieces() {
        let mut clip_ids = Vec::new();
        let mut points = Vec::new();
        let mut pianists = Vec::new();
        for clip in dataset.clips() {
            if clip.piece_id != piece {
                continue;
            }
            let Some(t) = dataset.target(&clip.clip_id) else {
                log::warn!("clip {} has no rating; skipped in outlier scan", clip.clip_id);
                continue;
            };
            clip_ids.push(clip.clip_id.clone());
            points.push((t.arousal_z, t.valence_z));
            pianists.push(clip.pianist_id.clone());
        }
        let idx = mcd_outlier(&points)?;
        test_clips.push(clip_ids[idx].clone());
        *outliers_per_pianist.entry(pianists[idx].clone()).or_insert(0) += 1;
    }
    let held: std::collections::BTreeSet<&String> = test_clips.iter().collect();
    let train_clips = dataset
        .clips()
        .iter()
        .map(|c| c.clip_id.clone())
        .filter(|id| !held.contains(id))
        .collect();
    Ok(OutlierSplit {
        test_clips,
        train_clips,
        outliers_per_pianist,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::stats::ols::tests::normals;

    /// Reference answer by independent bitmask enumeration: minimal
    /// determinant over all h-subsets, lexicographically first on ties,
    /// then the largest ridged Mahalanobis distance, lowest index on ties.
    fn bitmask_oracle(points: &[(f64, f64)]) -> usize {
        let n = points.len();
        let h = (n + 3) / 2 + 1;
        let mut best: Option<(f64, Vec<usize>)> = None;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != h {
                continue;
            }
            let subset: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            let c = cov_of(points, &subset);
            let d = det(&c);
            let better = match &best {
                None => true,
                Some((bd, bs)) => d < *bd || (d == *bd && subset < *bs),
            };
            if better {
                best = Some((d, subset));
            }
        }
        let (_, subset) = best.unwrap();
        let c = cov_of(points, &subset);
        let a = c.sxx + COV_RIDGE;
        let b = c.sxy;
        let cc = c.syy + COV_RIDGE;
        let inv_det = a * cc - b * b;
        let mut outlier = 0;
        let mut max_d2 = f64::NEG_INFINITY;
        for (i, &(x, y)) in points.iter().enumerate() {
            let dx = x - c.mx;
            let dy = y - c.my;
            let d2 = (cc * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / inv_det;
            if d2 > max_d2 {
                max_d2 = d2;
                outlier = i;
            }
        }
        outlier
    }

    #[test]
    fn point_count_bounds_are_enforced() {
        let four = vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
        assert_eq!(
            mcd_outlier(&four).unwrap_err(),
            StatsError::BadPointCount { n: 4 }
        );
        let thirteen: Vec<(f64, f64)> = (0..13).map(|i| (i as f64, (i * i) as f64)).collect();
        assert_eq!(
            mcd_outlier(&thirteen).unwrap_err(),
            StatsError::BadPointCount { n: 13 }
        );
    }

    #[test]
    fn identical_points_are_rejected() {
        let points = vec![(1.0, 2.0); 6];
        assert_eq!(
            mcd_outlier(&points).unwrap_err(),
            StatsError::DegenerateCovariance
        );
    }

    #[test]
    fn planted_outlier_is_flagged_at_every_position() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for position in 0..6 {
            for _rep in 0..50 {
                let xs = normals(&mut rng, 5);
                let ys = normals(&mut rng, 5);
                let mut points: Vec<(f64, f64)> =
                    xs.iter().zip(&ys).map(|(&x, &y)| (0.3 * x, 0.3 * y)).collect();
                points.insert(position, (8.0 + rng.gen::<f64>(), -7.5));
                assert_eq!(
                    mcd_outlier(&points).unwrap(),
                    position,
                    "missed the planted point at {position}"
                );
            }
        }
    }

    #[test]
    fn matches_bitmask_oracle_on_seeded_sets() {
        for seed in 0..1000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(90_000 + seed);
            let n = 5 + (seed % 4) as usize;
            let xs = normals(&mut rng, n);
            let ys = normals(&mut rng, n);
            let points: Vec<(f64, f64)> = xs.into_iter().zip(ys).collect();
            assert_eq!(
                mcd_outlier(&points).unwrap(),
                bitmask_oracle(&points),
                "divergence at seed {seed}"
            );
        }
    }

    #[test]
    fn tied_outliers_resolve_to_the_lowest_index() {
        // Two copies of the same far point. With n = 8 the subset size is
        // h = 6, so the best subset is exactly the six cluster points and
        // both copies are scored from the same fit: their distances tie
        // bit for bit and the first copy must win.
        let points = vec![
            (0.0, 0.0),
            (40.0, -30.0),
            (0.2, 0.0),
            (0.0, 0.2),
            (0.2, 0.2),
            (0.1, -0.1),
            (40.0, -30.0),
            (-0.1, 0.1),
        ];
        assert_eq!(mcd_outlier(&points).unwrap(), 1);
    }

    #[test]
    fn combination_enumeration_is_exhaustive_and_ordered() {
        let mut subset = vec![0, 1, 2];
        let mut seen = vec![subset.clone()];
        while next_combination(&mut subset, 5) {
            seen.push(subset.clone());
        }
        assert_eq!(seen.len(), 10, "C(5,3) must enumerate 10 subsets");
        for w in seen.windows(2) {
            assert!(w[0] < w[1], "enumeration must be lexicographic");
        }
    }
}
