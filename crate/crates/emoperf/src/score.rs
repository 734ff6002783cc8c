//! Score-based features from the symbolic note list of a clip's excerpt:
//! rhythm and density statistics in beat units, plus Krumhansl-Schmuckler
//! key finding (mode and key strength).

use std::path::Path;

use crate::corpus::{FeatureSet, FeatureVector, Mode, TimeSignature};
use crate::util::{mean, pearson, pop_std};

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: expected header onset_beats,duration_beats,midi_pitch, found {found:?}")]
    Header { path: String, found: Vec<String> },
    #[error("{path} line {line}: {msg}")]
    Row {
        path: String,
        line: u64,
        msg: String,
    },
    #[error("note list is empty")]
    EmptyNoteList,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Note {
    pub onset_beats: f64,
    pub duration_beats: f64,
    /// MIDI pitch 0..=127.
    pub pitch: u8,
}

/// Notes of one excerpt, sorted by onset (stable for chords), in beat time.
#[derive(Debug, Clone, PartialEq)]
pub struct NoteList {
    pub notes: Vec<Note>,
    pub time_signature: TimeSignature,
}

impl NoteList {
    /// Builds a sorted list; ordering of equal onsets is preserved.
    pub fn new(mut notes: Vec<Note>, time_signature: TimeSignature) -> Self {
        notes.sort_by(|a, b| a.onset_beats.partial_cmp(&b.onset_beats).unwrap());
        NoteList {
            notes,
            time_signature,
        }
    }

    /// Length of the excerpt in beats: the latest note release.
    pub fn total_beats(&self) -> f64 {
        self.notes
            .iter()
            .map(|n| n.onset_beats + n.duration_beats)
            .fold(0.0, f64::max)
    }
}

const NOTES_HEADER: [&str; 3] = ["onset_beats", "duration_beats", "midi_pitch"];

/// Reads a notes CSV; the time signature comes from the clip's manifest
/// record, not the file.
pub fn parse_notes(path: &Path, time_signature: TimeSignature) -> Result<NoteList, ScoreError> {
    let p = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => ScoreError::Io {
            path: p.clone(),
            source: match e.into_kind() {
                csv::ErrorKind::Io(io) => io,
                _ => unreachable!(),
            },
        },
        _ => ScoreError::Csv {
            path: p.clone(),
            source: e,
        },
    })?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| ScoreError::Csv {
            path: p.clone(),
            source: e,
        })?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header != NOTES_HEADER {
        return Err(ScoreError::Header {
            path: p,
            found: header,
        });
    }

    let mut notes = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ScoreError::Csv {
            path: p.clone(),
            source: e,
        })?;
        let line = rec.position().map_or(0, |pos| pos.line());
        let row_err = |msg: String| ScoreError::Row {
            path: p.clone(),
            line,
            msg,
        };
        if rec.len() != 3 {
            return Err(row_err(format!("expected 3 fields, found {}", rec.len())));
        }
        let onset_beats: f64 = rec[0]
            .trim()
            .parse()
            .map_err(|_| row_err(format!("bad onset_beats {:?}", &rec[0])))?;
        let duration_beats: f64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| row_err(format!("bad duration_beats {:?}", &rec[1])))?;
        let pitch_raw: i64 = rec[2]
            .trim()
            .parse()
            .map_err(|_| row_err(format!("bad midi_pitch {:?}", &rec[2])))?;
        if !onset_beats.is_finite() || onset_beats < 0.0 {
            return Err(row_err(format!("onset_beats must be >= 0, got {onset_beats}")));
        }
        if !duration_beats.is_finite() || duration_beats <= 0.0 {
            return Err(row_err(format!(
                "duration_beats must be > 0, got {duration_beats}"
            )));
        }
        if !(0..=127).contains(&pitch_raw) {
            return Err(row_err(format!("midi_pitch must be 0..=127, got {pitch_raw}")));
        }
        notes.push(Note {
            onset_beats,
            duration_beats,
            pitch: pitch_raw as u8,
        });
    }
    Ok(NoteList::new(notes, time_signature))
}

/// Rhythm and density statistics in beat units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhythmFeatures {
    pub ioi_mean_beats: f64,
    pub duration_mean_beats: f64,
    pub duration_std_beats: f64,
    pub onset_density_per_beat: f64,
    pub pitch_density_per_beat: f64,
}

/// Distinct onset times; simultaneous notes (a chord) share one onset.
fn distinct_onsets(notes: &NoteList) -> Vec<f64> {
    let mut onsets: Vec<f64> = notes.notes.iter().map(|n| n.onset_beats).collect();
    onsets.sort_by(|a, b| a.partial_cmp(b).unwrap());
    onsets.dedup();
    onsets
}

pub fn rhythm_density(notes: &NoteList) -> Result<RhythmFeatures, ScoreError> {
    if notes.notes.is_empty() {
        return Err(ScoreError::EmptyNoteList);
    }
    let onsets = distinct_onsets(notes);
    let ioi_mean_beats = if onsets.len() < 2 {
        log::warn!("single distinct onset: inter-onset interval defined as 0");
        0.0
    } else {
        let diffs: Vec<f64> = onsets.windows(2).map(|w| w[1] - w[0]).collect();
        mean(&diffs)
    };
    let durations: Vec<f64> = notes.notes.iter().map(|n| n.duration_beats).collect();
    let total = notes.total_beats();

    // unique pitches sounded, counted once per onset they appear at
    let mut events: Vec<(u64, u8)> = notes
        .notes
        .iter()
        .map(|n| (n.onset_beats.to_bits(), n.pitch))
        .collect();
    events.sort_unstable();
    events.dedup();

    Ok(RhythmFeatures {
        ioi_mean_beats,
        duration_mean_beats: mean(&durations),
        duration_std_beats: pop_std(&durations),
        onset_density_per_beat: onsets.len() as f64 / total,
        pitch_density_per_beat: events.len() as f64 / total,
    })
}

// ── Key finding ──

/// Krumhansl-Kessler probe-tone profiles, index 0 = tonic.
pub const KK_MAJOR: [f64; 12] = [
    6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88,
];
pub const KK_MINOR: [f64; 12] = [
    6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyEstimate {
    /// Tonic pitch class, 0 = C.
    pub tonic: u8,
    pub mode: Mode,
    /// Pearson correlation with the winning key profile.
    pub strength: f64,
}

/// Duration-weighted pitch-class profile with a uniform 1e-6 floor.
fn pitch_class_profile(notes: &NoteList) -> [f64; 12] {
    let mut profile = [1e-6; 12];
    for n in &notes.notes {
        profile[(n.pitch % 12) as usize] += n.duration_beats;
    }
    profile
}

/// Krumhansl-Schmuckler key estimate: the pitch-class profile is
/// correlated against all 24 rotated key profiles. A constant profile has
/// no defined correlation and scores 0 against every candidate; ties go to
/// the lower pitch class, major before minor.
pub fn ks_key(notes: &NoteList) -> Result<KeyEstimate, ScoreError> {
    if notes.notes.is_empty() {
        return Err(ScoreError::EmptyNoteList);
    }
    let profile = pitch_class_profile(notes);
    let spread = profile.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - profile.iter().cloned().fold(f64::INFINITY, f64::min);
    if spread == 0.0 {
        // All twelve bins identical: correlation is undefined, and summation
        // dust must not be allowed to pick an arbitrary winner.
        return Ok(KeyEstimate {
            tonic: 0,
            mode: Mode::Major,
            strength: 0.0,
        });
    }
    let mut best: Option<KeyEstimate> = None;
    for tonic in 0..12u8 {
        for mode in [Mode::Major, Mode::Minor] {
            let template = match mode {
                Mode::Major => &KK_MAJOR,
                Mode::Minor => &KK_MINOR,
            };
            let rotated: Vec<f64> = (0..12)
                .map(|pc| template[(pc + 12 - tonic as usize) % 12])
                .collect();
            let r = pearson(&profile, &rotated).unwrap_or(0.0);
            if best.map_or(true, |b| r > b.strength) {
                best = Some(KeyEstimate {
                    tonic,
                    mode,
                    strength: r,
                });
            }
        }
    }
    Ok(best.expect("24 candidates were scanned"))
}

// ── Full vector ──

pub const N_SCORE: usize = 7;

pub const SCORE_NAMES: [&str; N_SCORE] = [
    "ioi_mean_beats",
    "duration_mean_beats",
    "duration_std_beats",
    "onset_density_per_beat",
    "pitch_density_per_beat",
    "mode",
    "key_strength",
];

/// One clip's score features, in [`SCORE_NAMES`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub values: [f64; N_SCORE],
}

impl ScoreVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        SCORE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values[i])
    }

    pub fn feature_vector(&self, clip_id: &str) -> FeatureVector {
        FeatureVector {
            clip_id: clip_id.to_string(),
            set: FeatureSet::Score,
            names: SCORE_NAMES.iter().map(|s| s.to_string()).collect(),
            values: self.values.to_vec(),
        }
    }
}

/// Extracts the 7-value score vector. The mode is the key-finding result,
/// deliberately independent of any notated key.
pub fn extract_score(notes: &NoteList) -> Result<ScoreVector, ScoreError> {
    let rhythm = rhythm_density(notes)?;
    let key = ks_key(notes)?;
    Ok(ScoreVector {
        values: [
            rhythm.ioi_mean_beats,
            rhythm.duration_mean_beats,
            rhythm.duration_std_beats,
            rhythm.onset_density_per_beat,
            rhythm.pitch_density_per_beat,
            key.mode.as_feature_value(),
            key.strength,
        ],
    })
}
