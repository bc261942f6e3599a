//! Run manifests: the resolved configuration, the seed, and every emitted
//! file with its SHA-256 checksum. Re-running the `[config]` block with the
//! same seed reproduces the listed checksums byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use gsd_core::error::{Error, Result};

use crate::config::{ExperimentKind, RunConfig};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub version: String,
    /// Canonical resolved config text.
    pub config: String,
    /// `(file name, sha256 hex)` pairs in emission order.
    pub files: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(cfg: &RunConfig, files: Vec<(String, String)>) -> Self {
        RunManifest {
            kind: cfg.kind,
            seed: cfg.seed,
            version: ARTIFACT_VERSION.to_string(),
            config: cfg.resolved(),
            files,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "gsd-run-manifest 1");
        let _ = writeln!(out, "kind = {}", self.kind.name());
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "version = {}", self.version);
        let _ = writeln!(out, "--- config ---");
        out.push_str(&self.config);
        let _ = writeln!(out, "--- files ---");
        for (name, digest) in &self.files {
            let _ = writeln!(out, "{digest}  {name}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let head = lines.next().ok_or_else(|| Error::format("empty manifest"))?;
        if head != "gsd-run-manifest 1" {
            return Err(Error::format("not a gsd run manifest"));
        }
        let mut kind = None;
        let mut seed = None;
        let mut version = String::new();
        for line in lines.by_ref() {
            if line == "--- config ---" {
                break;
            }
            if let Some((k, v)) = line.split_once('=') {
                match k.trim() {
                    "kind" => kind = Some(ExperimentKind::from_name(v.trim())?),
                    "seed" => {
                        seed = Some(v.trim().parse::<u64>().map_err(|_| {
                            Error::format("manifest: bad seed")
                        })?)
                    }
                    "version" => version = v.trim().to_string(),
                    _ => return Err(Error::format(format!("manifest: unknown field {k:?}"))),
                }
            }
        }
        let mut config = String::new();
        for line in lines.by_ref() {
            if line == "--- files ---" {
                break;
            }
            config.push_str(line);
            config.push('\n');
        }
        let mut files = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let (digest, name) = line
                .split_once("  ")
                .ok_or_else(|| Error::format("manifest: bad file entry"))?;
            files.push((name.to_string(), digest.to_string()));
        }
        Ok(RunManifest {
            kind: kind.ok_or_else(|| Error::format("manifest: missing kind"))?,
            seed: seed.ok_or_else(|| Error::format("manifest: missing seed"))?,
            version,
            config,
            files,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join("manifest.txt"), self.to_text())?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join("manifest.txt"))?;
        Self::from_text(&text)
    }
}
