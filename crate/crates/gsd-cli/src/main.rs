use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use gsd_cli::config::{ExperimentKind, OutputFormat, RunConfig};

/// Desk-scale simulator of ground-state-depletion microscopy on a single
/// trapped ion: hologram synthesis, aberration sensing, depletion dynamics,
/// stroboscopic imaging, trajectory reconstruction and trap-voltage
/// stabilization.
#[derive(Parser)]
#[command(name = "gsd", version, about)]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    kind: Kind,
    /// Config file (line-based `[section]` / `key = value`); defaults are
    /// the published operating points.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Cap the number of worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Artifact selection.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    SenseAberration,
    SynthHologram,
    SimulateSpot,
    Deplete,
    Image,
    Motion,
    Stabilize,
    Report,
}

impl From<Kind> for ExperimentKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::SenseAberration => ExperimentKind::SenseAberration,
            Kind::SynthHologram => ExperimentKind::SynthHologram,
            Kind::SimulateSpot => ExperimentKind::SimulateSpot,
            Kind::Deplete => ExperimentKind::Deplete,
            Kind::Image => ExperimentKind::Image,
            Kind::Motion => ExperimentKind::Motion,
            Kind::Stabilize => ExperimentKind::Stabilize,
            Kind::Report => ExperimentKind::Report,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Pgm,
    Both,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("gsd: {err}");
            ExitCode::from(gsd_cli::exit_code(&err) as u8)
        }
    }
}

fn run(cli: Cli) -> gsd_core::Result<()> {
    #[cfg(feature = "parallel")]
    if let Some(n) = cli.threads {
        // A failed build means a pool already exists; keep going with it.
        let _ = rayon_pool(n);
    }
    #[cfg(not(feature = "parallel"))]
    if cli.threads.is_some() {
        eprintln!("gsd: built without the parallel feature; --threads ignored");
    }

    let kind: ExperimentKind = cli.kind.into();
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)?,
        None => String::new(),
    };
    let mut cfg = RunConfig::parse(kind, &text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(format) = cli.format {
        cfg.format = match format {
            Format::Csv => OutputFormat::Csv,
            Format::Pgm => OutputFormat::Pgm,
            Format::Both => OutputFormat::Both,
        };
    }
    let manifest = gsd_cli::experiments::run(&cfg, &cli.out)?;
    println!(
        "{}: wrote {} files to {}",
        kind.name(),
        manifest.files.len(),
        cli.out.display()
    );
    Ok(())
}

#[cfg(feature = "parallel")]
fn rayon_pool(n: usize) -> Result<(), rayon::ThreadPoolBuildError> {
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()
}
