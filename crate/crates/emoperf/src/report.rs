//! Plot-ready CSV artifacts with embedded provenance.
//!
//! Every artifact starts with one comment line carrying the config hash
//! and seed that produced it, so a file can always be traced back to its
//! run. Nothing time-dependent is ever written; rerunning with the same
//! inputs must reproduce every byte.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::corpus::format_f64;

/// Identity of a run: a digest of the effective configuration plus the
/// seed, stamped into every artifact.
#[derive(Debug, Clone)]
pub struct Provenance {
    /// First 16 hex digits of the configuration digest.
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn line(&self) -> String {
        format!("# emoperf config_hash={} seed={}", self.config_hash, self.seed)
    }
}

/// One tabular artifact: a named CSV with optional trailing notes.
#[derive(Debug, Clone)]
pub struct Table {
    /// File stem; the artifact lands at `<dir>/<name>.csv`.
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Caveats appended as comment lines after the data.
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Table {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width mismatch in table {}",
            self.name
        );
        self.rows.push(row);
    }

    pub fn push_note(&mut self, note: &str) {
        self.notes.push(note.to_string());
    }

    /// Renders the complete file: provenance, header, rows, notes.
    pub fn to_csv_string(&self, provenance: &Provenance) -> String {
        let mut body = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut body);
            w.write_record(&self.columns).expect("in-memory write");
            for row in &self.rows {
                w.write_record(row).expect("in-memory write");
            }
            w.flush().expect("in-memory flush");
        }
        let mut out = String::new();
        out.push_str(&provenance.line());
        out.push('\n');
        out.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
        for note in &self.notes {
            out.push_str("# ");
            out.push_str(note);
            out.push('\n');
        }
        out
    }

    /// Writes `<dir>/<name>.csv` and returns the path.
    pub fn write(&self, dir: &Path, provenance: &Provenance) -> std::io::Result<PathBuf> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut file = std::fs::File::create(&path)?;
        file.write_all(self.to_csv_string(provenance).as_bytes())?;
        Ok(path)
    }
}

/// Shortest round-trip decimal form, shared with the corpus writers.
pub fn fmt_num(v: f64) -> String {
    format_f64(v)
}

/// Empty field for an undefined value, so plots can skip it.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}
