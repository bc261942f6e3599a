//! Experiment runner tying the simulator modules into reproducible runs.
//!
//! A run is described by a line-based config file (`[section]` headers,
//! `key = value` entries, unit-suffixed keys) plus a master seed, and emits
//! CSV/PGM artifacts together with a manifest listing every file with its
//! checksum. Re-running the same config and seed reproduces the outputs
//! byte for byte.

pub mod config;
pub mod experiments;
pub mod manifest;
pub mod output;
pub mod scenarios;

pub use config::{ExperimentKind, RunConfig};
pub use experiments::run;
pub use manifest::RunManifest;

/// Exit codes of the `gsd` binary, one per error family.
pub fn exit_code(err: &gsd_core::Error) -> i32 {
    use gsd_core::Error::*;
    match err {
        Format(_) => 2,
        Validation(_) | Configuration(_) => 3,
        Numerical(_) => 4,
        Analysis(_) | Range(_) => 5,
        Io(_) => 6,
    }
}
