//! CSV and manifest output with byte-reproducible formatting.
//!
//! Floats are written with Rust's shortest round-trip representation, '.'
//! decimal separator and LF line endings, so identical runs produce
//! identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gsd_core::error::Result;
use gsd_core::sequence::ScanImage;
use ndarray::Array2;
use sha2::{Digest, Sha256};

/// Collects emitted files and their checksums for the manifest.
pub struct OutputSink {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl OutputSink {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(OutputSink { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)?;
        let digest = Sha256::digest(bytes);
        let hex: String = digest.iter().fold(String::new(), |mut acc, b| {
            let _ = write!(acc, "{b:02x}");
            acc
        });
        self.files.push((name.to_string(), hex));
        Ok(())
    }

    /// Record a file written through another writer (PBM/PGM helpers).
    pub fn record_existing(&mut self, name: &str) -> Result<()> {
        let bytes = std::fs::read(self.dir.join(name))?;
        let digest = Sha256::digest(&bytes);
        let hex: String = digest.iter().fold(String::new(), |mut acc, b| {
            let _ = write!(acc, "{b:02x}");
            acc
        });
        self.files.push((name.to_string(), hex));
        Ok(())
    }

    pub fn files(&self) -> &[(String, String)] {
        &self.files
    }
}

/// Render a numeric matrix as CSV rows.
pub fn matrix_csv(m: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in m.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{v}");
            first = false;
        }
        out.push('\n');
    }
    out
}

/// Render a table with a header row.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{v}");
            first = false;
        }
        out.push('\n');
    }
    out
}

/// Parse a CSV matrix written by [`matrix_csv`].
pub fn parse_matrix_csv(text: &str) -> Result<Array2<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        let row = row.map_err(|_| {
            gsd_core::Error::format(format!("csv line {}: bad number", i + 1))
        })?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(gsd_core::Error::format("empty csv matrix"));
    }
    let nx = rows[0].len();
    if rows.iter().any(|r| r.len() != nx) {
        return Err(gsd_core::Error::format("ragged csv matrix"));
    }
    let ny = rows.len();
    Ok(Array2::from_shape_fn((ny, nx), |(j, i)| rows[j][i]))
}

/// Scan-image CSV: the probability matrix alone (metadata lives in the
/// manifest).
pub fn image_csv(img: &ScanImage) -> String {
    matrix_csv(&img.probabilities)
}
