//! Corpus ingestion: clip manifests, listener annotations, and per-clip
//! feature tables, joined into an immutable [`Dataset`].
//!
//! CSV schemas are fixed:
//!
//! * manifest: `clip_id,piece_id,pianist_id,audio_path,score_path,time_sig,key,mode`
//!   (`score_path` may be empty; `time_sig` is `N/D`; `mode` is `major` or `minor`)
//! * annotations, per rater: `clip_id,rater_id,arousal,valence`
//! * annotations, pre-aggregated: `clip_id,arousal_mean,valence_mean`
//! * feature table: `clip_id,<feature name>,...`
//! * saved targets: `clip_id,arousal_mean,valence_mean,arousal_z,valence_z,n_raters`
//!
//! Arousal ratings live on a 0..100 scale and valence on -5..5. Regression
//! targets are the per-clip mean ratings standardized across the loaded
//! clips (population standard deviation); experiments that re-standardize
//! within a subset go through [`Dataset::filter`] followed by
//! [`Dataset::restandardize_targets`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use crate::util;

pub const AROUSAL_MIN: f64 = 0.0;
pub const AROUSAL_MAX: f64 = 100.0;
pub const VALENCE_MIN: f64 = -5.0;
pub const VALENCE_MAX: f64 = 5.0;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        source: Box<csv::Error>,
    },
    #[error("{path}: expected header [{expected}], found [{found}]")]
    Header {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path} line {line}: {msg}")]
    Row {
        path: PathBuf,
        line: u64,
        msg: String,
    },
    #[error("{path} line {line}: duplicate clip_id {clip_id}")]
    DuplicateClipId {
        path: PathBuf,
        line: u64,
        clip_id: String,
    },
    #[error("{path} line {line}: duplicate (piece_id, pianist_id) pair ({piece_id}, {pianist_id})")]
    DuplicatePerformance {
        path: PathBuf,
        line: u64,
        piece_id: String,
        pianist_id: String,
    },
    #[error("{path} line {line}: clip_id {clip_id} is not in the manifest")]
    UnknownClipId {
        path: PathBuf,
        line: u64,
        clip_id: String,
    },
    #[error("{path} line {line}: {target} rating {value} outside [{lo}, {hi}]")]
    RatingOutOfRange {
        path: PathBuf,
        line: u64,
        target: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("cannot standardize {target}: zero variance across {n} clips")]
    ZeroVarianceTarget { target: String, n: usize },
    #[error("{path}: duplicate feature name {name}")]
    DuplicateFeatureName { path: PathBuf, name: String },
    #[error("{path} line {line}: non-finite value in column {column}")]
    NonFiniteValue {
        path: PathBuf,
        line: u64,
        column: String,
    },
    #[error("feature set {set} supplied twice to assemble")]
    DuplicateFeatureSet { set: FeatureSet },
    #[error("{what} references clip_id {clip_id} that is not in the manifest")]
    ForeignClipId { what: String, clip_id: String },
}

/// The four feature families the pipeline knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub enum FeatureSet {
    LowLevel,
    Score,
    MidLevel,
    DeamPca,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 4] = [
        FeatureSet::LowLevel,
        FeatureSet::Score,
        FeatureSet::MidLevel,
        FeatureSet::DeamPca,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureSet::LowLevel => "lowlevel",
            FeatureSet::Score => "score",
            FeatureSet::MidLevel => "midlevel",
            FeatureSet::DeamPca => "deam_pca",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FeatureSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lowlevel" => Ok(FeatureSet::LowLevel),
            "score" => Ok(FeatureSet::Score),
            "midlevel" => Ok(FeatureSet::MidLevel),
            "deam_pca" => Ok(FeatureSet::DeamPca),
            other => Err(format!(
                "unknown feature set {other:?}; expected one of lowlevel, score, midlevel, deam_pca"
            )),
        }
    }
}

/// Notated mode of a piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Mode {
    Major,
    Minor,
}

impl Mode {
    /// Encoding used wherever mode enters a feature vector: major 0, minor 1.
    pub fn as_feature_value(&self) -> f64 {
        match self {
            Mode::Major => 0.0,
            Mode::Minor => 1.0,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Major => "major",
            Mode::Minor => "minor",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct TimeSignature {
    pub numerator: u32,
    pub denominator: u32,
}

impl TimeSignature {
    pub fn parse(s: &str) -> Result<Self, String> {
        let (n, d) = s
            .split_once('/')
            .ok_or_else(|| format!("time signature {s:?} is not of the form N/D"))?;
        let numerator: u32 = n
            .trim()
            .parse()
            .map_err(|_| format!("bad time signature numerator {n:?}"))?;
        let denominator: u32 = d
            .trim()
            .parse()
            .map_err(|_| format!("bad time signature denominator {d:?}"))?;
        if numerator < 1 {
            return Err(format!("time signature numerator must be >= 1, got {numerator}"));
        }
        if ![1, 2, 4, 8, 16].contains(&denominator) {
            return Err(format!(
                "time signature denominator must be one of 1, 2, 4, 8, 16, got {denominator}"
            ));
        }
        Ok(TimeSignature { numerator, denominator })
    }
}

impl fmt::Display for TimeSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

/// One row of the clip manifest: a recording of one piece by one pianist.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ClipRecord {
    pub clip_id: String,
    pub piece_id: String,
    pub pianist_id: String,
    pub audio_path: PathBuf,
    pub score_path: Option<PathBuf>,
    pub time_sig: TimeSignature,
    pub key: String,
    pub mode: Mode,
}

/// Aggregated emotion ratings for one clip, raw and standardized.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EmotionTarget {
    pub clip_id: String,
    pub arousal_mean: f64,
    pub valence_mean: f64,
    pub arousal_z: f64,
    pub valence_z: f64,
    pub n_raters: usize,
}

/// Ordered feature values for one clip within one feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub clip_id: String,
    pub set: FeatureSet,
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

/// Rectangular per-set feature storage keyed by clip id.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub set: FeatureSet,
    pub names: Vec<String>,
    rows: BTreeMap<String, Vec<f64>>,
}

impl FeatureTable {
    pub fn new(set: FeatureSet, names: Vec<String>) -> Self {
        FeatureTable {
            set,
            names,
            rows: BTreeMap::new(),
        }
    }

    /// Inserts a clip row. Panics if the width does not match the header;
    /// loaders validate before calling.
    pub fn insert(&mut self, clip_id: String, values: Vec<f64>) {
        assert_eq!(
            values.len(),
            self.names.len(),
            "feature row width mismatch for {clip_id}"
        );
        self.rows.insert(clip_id, values);
    }

    pub fn get(&self, clip_id: &str) -> Option<&[f64]> {
        self.rows.get(clip_id).map(|v| v.as_slice())
    }

    pub fn contains(&self, clip_id: &str) -> bool {
        self.rows.contains_key(clip_id)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn clip_ids(&self) -> impl Iterator<Item = &String> {
        self.rows.keys()
    }
}

/// Per-set join coverage produced by [`assemble`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct SetCoverage {
    pub set: FeatureSet,
    pub clips_covered: usize,
    pub total_clips: usize,
}

#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct CoverageReport {
    pub sets: Vec<SetCoverage>,
}

impl CoverageReport {
    pub fn is_full(&self) -> bool {
        self.sets.iter().all(|s| s.clips_covered == s.total_clips)
    }
}

/// The joined, immutable view the statistics battery runs on.
#[derive(Debug, Clone)]
pub struct Dataset {
    clips: Vec<ClipRecord>,
    targets: BTreeMap<String, EmotionTarget>,
    features: BTreeMap<FeatureSet, FeatureTable>,
}

impl Dataset {
    /// Clips in manifest order. This order is canonical everywhere.
    pub fn clips(&self) -> &[ClipRecord] {
        &self.clips
    }

    pub fn clip(&self, clip_id: &str) -> Option<&ClipRecord> {
        self.clips.iter().find(|c| c.clip_id == clip_id)
    }

    pub fn target(&self, clip_id: &str) -> Option<&EmotionTarget> {
        self.targets.get(clip_id)
    }

    pub fn targets(&self) -> &BTreeMap<String, EmotionTarget> {
        &self.targets
    }

    pub fn feature_table(&self, set: FeatureSet) -> Option<&FeatureTable> {
        self.features.get(&set)
    }

    pub fn feature_sets(&self) -> impl Iterator<Item = FeatureSet> + '_ {
        self.features.keys().copied()
    }

    /// Unique piece ids in manifest order.
    pub fn pieces(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for c in &self.clips {
            if seen.insert(c.piece_id.clone()) {
                out.push(c.piece_id.clone());
            }
        }
        out
    }

    /// Unique pianist ids in manifest order.
    pub fn pianists(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for c in &self.clips {
            if seen.insert(c.pianist_id.clone()) {
                out.push(c.pianist_id.clone());
            }
        }
        out
    }

    /// Restricts the dataset to clips matching the predicate. Targets keep
    /// their global standardization; call [`Dataset::restandardize_targets`]
    /// for within-subset z-scores.
    pub fn filter<F: Fn(&ClipRecord) -> bool>(&self, keep: F) -> Dataset {
        let clips: Vec<ClipRecord> = self.clips.iter().filter(|c| keep(c)).cloned().collect();
        let kept: BTreeSet<&str> = clips.iter().map(|c| c.clip_id.as_str()).collect();
        let targets = self
            .targets
            .iter()
            .filter(|(k, _)| kept.contains(k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let features = self
            .features
            .iter()
            .map(|(set, table)| {
                let mut t = FeatureTable::new(*set, table.names.clone());
                for (clip, vals) in &table.rows {
                    if kept.contains(clip.as_str()) {
                        t.insert(clip.clone(), vals.clone());
                    }
                }
                (*set, t)
            })
            .collect();
        Dataset {
            clips,
            targets,
            features,
        }
    }

    /// Recomputes z-scores from the raw means across the clips currently in
    /// the dataset (population standard deviation).
    pub fn restandardize_targets(&mut self) -> Result<(), CorpusError> {
        let ids: Vec<String> = self.targets.keys().cloned().collect();
        let arousal: Vec<f64> = ids.iter().map(|id| self.targets[id].arousal_mean).collect();
        let valence: Vec<f64> = ids.iter().map(|id| self.targets[id].valence_mean).collect();
        let az = standardize("arousal", &arousal)?;
        let vz = standardize("valence", &valence)?;
        for (i, id) in ids.iter().enumerate() {
            let t = self.targets.get_mut(id).unwrap();
            t.arousal_z = az[i];
            t.valence_z = vz[i];
        }
        Ok(())
    }
}

fn standardize(target: &str, xs: &[f64]) -> Result<Vec<f64>, CorpusError> {
    let sd = util::pop_std(xs);
    if sd <= 0.0 {
        return Err(CorpusError::ZeroVarianceTarget {
            target: target.to_string(),
            n: xs.len(),
        });
    }
    let m = util::mean(xs);
    Ok(xs.iter().map(|x| (x - m) / sd).collect())
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>, CorpusError> {
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn header_of(
    rdr: &mut csv::Reader<std::fs::File>,
    path: &Path,
) -> Result<Vec<String>, CorpusError> {
    let headers = rdr.headers().map_err(|source| CorpusError::Csv {
        path: path.to_path_buf(),
        source: Box::new(source),
    })?;
    Ok(headers.iter().map(|h| h.trim().to_string()).collect())
}

const MANIFEST_HEADER: [&str; 8] = [
    "clip_id",
    "piece_id",
    "pianist_id",
    "audio_path",
    "score_path",
    "time_sig",
    "key",
    "mode",
];

/// Loads and validates a clip manifest. Clip ids and (piece, pianist) pairs
/// must be unique; order is preserved.
pub fn load_manifest(path: &Path) -> Result<Vec<ClipRecord>, CorpusError> {
    let mut rdr = open_reader(path)?;
    let header = header_of(&mut rdr, path)?;
    if header != MANIFEST_HEADER {
        return Err(CorpusError::Header {
            path: path.to_path_buf(),
            expected: MANIFEST_HEADER.join(","),
            found: header.join(","),
        });
    }

    let mut clips = Vec::new();
    let mut seen_ids = BTreeSet::new();
    let mut seen_pairs = BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|source| CorpusError::Csv {
            path: path.to_path_buf(),
            source: Box::new(source),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let row_err = |msg: String| CorpusError::Row {
            path: path.to_path_buf(),
            line,
            msg,
        };

        let field = |i: usize| rec.get(i).unwrap_or("").trim().to_string();
        let clip_id = field(0);
        if clip_id.is_empty() {
            return Err(row_err("empty clip_id".into()));
        }
        if !seen_ids.insert(clip_id.clone()) {
            return Err(CorpusError::DuplicateClipId {
                path: path.to_path_buf(),
                line,
                clip_id,
            });
        }
        let piece_id = field(1);
        let pianist_id = field(2);
        if piece_id.is_empty() || pianist_id.is_empty() {
            return Err(row_err("empty piece_id or pianist_id".into()));
        }
        if !seen_pairs.insert((piece_id.clone(), pianist_id.clone())) {
            return Err(CorpusError::DuplicatePerformance {
                path: path.to_path_buf(),
                line,
                piece_id,
                pianist_id,
            });
        }
        let audio = field(3);
        if audio.is_empty() {
            return Err(row_err("empty audio_path".into()));
        }
        let score = field(4);
        let time_sig = TimeSignature::parse(&field(5)).map_err(row_err)?;
        let key = field(6);
        let mode = match field(7).to_ascii_lowercase().as_str() {
            "major" => Mode::Major,
            "minor" => Mode::Minor,
            other => return Err(row_err(format!("mode must be major or minor, got {other:?}"))),
        };
        clips.push(ClipRecord {
            clip_id,
            piece_id,
            pianist_id,
            audio_path: PathBuf::from(audio),
            score_path: if score.is_empty() {
                None
            } else {
                Some(PathBuf::from(score))
            },
            time_sig,
            key,
            mode,
        });
    }
    Ok(clips)
}

const RATER_HEADER: [&str; 4] = ["clip_id", "rater_id", "arousal", "valence"];
const AGG_HEADER: [&str; 3] = ["clip_id", "arousal_mean", "valence_mean"];

/// Loads listener annotations, auto-detecting per-rater or pre-aggregated
/// layout from the header, validates rating scales and clip references,
/// aggregates to per-clip means, and standardizes across all annotated clips.
pub fn load_annotations(
    path: &Path,
    clips: &[ClipRecord],
) -> Result<BTreeMap<String, EmotionTarget>, CorpusError> {
    let known: BTreeSet<&str> = clips.iter().map(|c| c.clip_id.as_str()).collect();
    let mut rdr = open_reader(path)?;
    let header = header_of(&mut rdr, path)?;

    // per clip: arousal ratings, valence ratings
    let mut ratings: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();

    let per_rater = if header == RATER_HEADER {
        true
    } else if header == AGG_HEADER {
        false
    } else {
        return Err(CorpusError::Header {
            path: path.to_path_buf(),
            expected: format!("{} or {}", RATER_HEADER.join(","), AGG_HEADER.join(",")),
            found: header.join(","),
        });
    };

    for rec in rdr.records() {
        let rec = rec.map_err(|source| CorpusError::Csv {
            path: path.to_path_buf(),
            source: Box::new(source),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let clip_id = rec.get(0).unwrap_or("").trim().to_string();
        if !known.contains(clip_id.as_str()) {
            return Err(CorpusError::UnknownClipId {
                path: path.to_path_buf(),
                line,
                clip_id,
            });
        }
        let (a_idx, v_idx) = if per_rater { (2, 3) } else { (1, 2) };
        let parse = |idx: usize, what: &str| -> Result<f64, CorpusError> {
            let raw = rec.get(idx).unwrap_or("").trim();
            raw.parse::<f64>().map_err(|_| CorpusError::Row {
                path: path.to_path_buf(),
                line,
                msg: format!("bad {what} value {raw:?}"),
            })
        };
        let arousal = parse(a_idx, "arousal")?;
        let valence = parse(v_idx, "valence")?;
        check_range(path, line, "arousal", arousal, AROUSAL_MIN, AROUSAL_MAX)?;
        check_range(path, line, "valence", valence, VALENCE_MIN, VALENCE_MAX)?;
        let entry = ratings.entry(clip_id).or_default();
        entry.0.push(arousal);
        entry.1.push(valence);
    }

    let ids: Vec<String> = ratings.keys().cloned().collect();
    let arousal_means: Vec<f64> = ids.iter().map(|id| util::mean(&ratings[id].0)).collect();
    let valence_means: Vec<f64> = ids.iter().map(|id| util::mean(&ratings[id].1)).collect();
    if ids.is_empty() {
        return Ok(BTreeMap::new());
    }
    let az = standardize("arousal", &arousal_means)?;
    let vz = standardize("valence", &valence_means)?;

    let mut out = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        out.insert(
            id.clone(),
            EmotionTarget {
                clip_id: id.clone(),
                arousal_mean: arousal_means[i],
                valence_mean: valence_means[i],
                arousal_z: az[i],
                valence_z: vz[i],
                n_raters: ratings[id].0.len(),
            },
        );
    }
    Ok(out)
}

fn check_range(
    path: &Path,
    line: u64,
    target: &str,
    value: f64,
    lo: f64,
    hi: f64,
) -> Result<(), CorpusError> {
    if !value.is_finite() || value < lo || value > hi {
        return Err(CorpusError::RatingOutOfRange {
            path: path.to_path_buf(),
            line,
            target: target.to_string(),
            value,
            lo,
            hi,
        });
    }
    Ok(())
}

/// Loads a rectangular feature table (`clip_id` column plus one column per
/// feature). Every referenced clip must exist in the manifest, names must be
/// unique, and all values must be finite.
pub fn load_feature_table(
    path: &Path,
    set: FeatureSet,
    clips: &[ClipRecord],
) -> Result<FeatureTable, CorpusError> {
    let known: BTreeSet<&str> = clips.iter().map(|c| c.clip_id.as_str()).collect();
    let mut rdr = open_reader(path)?;
    let header = header_of(&mut rdr, path)?;
    if header.first().map(|s| s.as_str()) != Some("clip_id") || header.len() < 2 {
        return Err(CorpusError::Header {
            path: path.to_path_buf(),
            expected: "clip_id,<feature names>".into(),
            found: header.join(","),
        });
    }
    let names: Vec<String> = header[1..].to_vec();
    let mut unique = BTreeSet::new();
    for n in &names {
        if !unique.insert(n.clone()) {
            return Err(CorpusError::DuplicateFeatureName {
                path: path.to_path_buf(),
                name: n.clone(),
            });
        }
    }

    let mut table = FeatureTable::new(set, names.clone());
    for rec in rdr.records() {
        let rec = rec.map_err(|source| CorpusError::Csv {
            path: path.to_path_buf(),
            source: Box::new(source),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let clip_id = rec.get(0).unwrap_or("").trim().to_string();
        if !known.contains(clip_id.as_str()) {
            return Err(CorpusError::UnknownClipId {
                path: path.to_path_buf(),
                line,
                clip_id,
            });
        }
        if table.contains(&clip_id) {
            return Err(CorpusError::DuplicateClipId {
                path: path.to_path_buf(),
                line,
                clip_id,
            });
        }
        let mut values = Vec::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            let raw = rec.get(i + 1).unwrap_or("").trim();
            let v: f64 = raw.parse().map_err(|_| CorpusError::Row {
                path: path.to_path_buf(),
                line,
                msg: format!("bad value {raw:?} in column {name}"),
            })?;
            if !v.is_finite() {
                return Err(CorpusError::NonFiniteValue {
                    path: path.to_path_buf(),
                    line,
                    column: name.clone(),
                });
            }
            values.push(v);
        }
        table.insert(clip_id, values);
    }
    Ok(table)
}

/// Joins manifest, targets, and feature tables into a [`Dataset`], verifying
/// every cross-reference, and reports per-set coverage (gaps are logged).
pub fn assemble(
    clips: Vec<ClipRecord>,
    targets: BTreeMap<String, EmotionTarget>,
    tables: Vec<FeatureTable>,
) -> Result<(Dataset, CoverageReport), CorpusError> {
    let known: BTreeSet<&str> = clips.iter().map(|c| c.clip_id.as_str()).collect();
    for id in targets.keys() {
        if !known.contains(id.as_str()) {
            return Err(CorpusError::ForeignClipId {
                what: "targets".into(),
                clip_id: id.clone(),
            });
        }
    }
    let mut features: BTreeMap<FeatureSet, FeatureTable> = BTreeMap::new();
    let mut coverage = CoverageReport::default();
    for table in tables {
        if features.contains_key(&table.set) {
            return Err(CorpusError::DuplicateFeatureSet { set: table.set });
        }
        for id in table.clip_ids() {
            if !known.contains(id.as_str()) {
                return Err(CorpusError::ForeignClipId {
                    what: format!("feature set {}", table.set),
                    clip_id: id.clone(),
                });
            }
        }
        let covered = clips.iter().filter(|c| table.contains(&c.clip_id)).count();
        if covered < clips.len() {
            log::warn!(
                "feature set {} covers {covered} of {} clips",
                table.set,
                clips.len()
            );
        }
        coverage.sets.push(SetCoverage {
            set: table.set,
            clips_covered: covered,
            total_clips: clips.len(),
        });
        features.insert(table.set, table);
    }
    Ok((
        Dataset {
            clips,
            targets,
            features,
        },
        coverage,
    ))
}

const TARGETS_HEADER: [&str; 6] = [
    "clip_id",
    "arousal_mean",
    "valence_mean",
    "arousal_z",
    "valence_z",
    "n_raters",
];

/// Writes targets to CSV in the given clip order. Floats use the shortest
/// representation that round-trips, so a save/load cycle is bit-exact.
pub fn save_targets(
    path: &Path,
    order: &[ClipRecord],
    targets: &BTreeMap<String, EmotionTarget>,
) -> Result<(), CorpusError> {
    let mut wtr = csv::Writer::from_path(path).map_err(|source| CorpusError::Csv {
        path: path.to_path_buf(),
        source: Box::new(source),
    })?;
    let write = |wtr: &mut csv::Writer<std::fs::File>, row: &[String]| {
        wtr.write_record(row).map_err(|source| CorpusError::Csv {
            path: path.to_path_buf(),
            source: Box::new(source),
        })
    };
    write(&mut wtr, &TARGETS_HEADER.map(String::from))?;
    for clip in order {
        if let Some(t) = targets.get(&clip.clip_id) {
            write(
                &mut wtr,
                &[
                    t.clip_id.clone(),
                    format_f64(t.arousal_mean),
                    format_f64(t.valence_mean),
                    format_f64(t.arousal_z),
                    format_f64(t.valence_z),
                    t.n_raters.to_string(),
                ],
            )?;
        }
    }
    wtr.flush().map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

/// Reads a targets file written by [`save_targets`].
pub fn load_targets(path: &Path) -> Result<BTreeMap<String, EmotionTarget>, CorpusError> {
    let mut rdr = open_reader(path)?;
    let header = header_of(&mut rdr, path)?;
    if header != TARGETS_HEADER {
        return Err(CorpusError::Header {
            path: path.to_path_buf(),
            expected: TARGETS_HEADER.join(","),
            found: header.join(","),
        });
    }
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|source| CorpusError::Csv {
            path: path.to_path_buf(),
            source: Box::new(source),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let get = |i: usize, what: &str| -> Result<f64, CorpusError> {
            let raw = rec.get(i).unwrap_or("").trim();
            raw.parse().map_err(|_| CorpusError::Row {
                path: path.to_path_buf(),
                line,
                msg: format!("bad {what} value {raw:?}"),
            })
        };
        let clip_id = rec.get(0).unwrap_or("").trim().to_string();
        let n_raters: usize = rec.get(5).unwrap_or("").trim().parse().map_err(|_| {
            CorpusError::Row {
                path: path.to_path_buf(),
                line,
                msg: "bad n_raters".into(),
            }
        })?;
        out.insert(
            clip_id.clone(),
            EmotionTarget {
                clip_id,
                arousal_mean: get(1, "arousal_mean")?,
                valence_mean: get(2, "valence_mean")?,
                arousal_z: get(3, "arousal_z")?,
                valence_z: get(4, "valence_z")?,
                n_raters,
            },
        );
    }
    Ok(out)
}

/// Writes a feature table to CSV in the given clip order (clips without a
/// row are skipped).
pub fn save_feature_table(
    path: &Path,
    order: &[ClipRecord],
    table: &FeatureTable,
) -> Result<(), CorpusError> {
    let mut wtr = csv::Writer::from_path(path).map_err(|source| CorpusError::Csv {
        path: path.to_path_buf(),
        source: Box::new(source),
    })?;
    let mut header = vec!["clip_id".to_string()];
    header.extend(table.names.iter().cloned());
    wtr.write_record(&header).map_err(|source| CorpusError::Csv {
        path: path.to_path_buf(),
        source: Box::new(source),
    })?;
    for clip in order {
        if let Some(values) = table.get(&clip.clip_id) {
            let mut row = vec![clip.clip_id.clone()];
            row.extend(values.iter().map(|v| format_f64(*v)));
            wtr.write_record(&row).map_err(|source| CorpusError::Csv {
                path: path.to_path_buf(),
                source: Box::new(source),
            })?;
        }
    }
    wtr.flush().map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

/// Shortest f64 representation that parses back to the identical bits
/// (std's Display for f64 guarantees round-tripping).
pub fn format_f64(v: f64) -> String {
    format!("{v}")
}
