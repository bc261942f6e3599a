//! Run configuration: line-based `[section]` / `key = value` files with
//! unit-suffixed keys, fully validated with line-number diagnostics.
//!
//! Every physical quantity carries its unit in the key name (`_m`, `_s`,
//! `_hz`, `_v`, `_n`, `_kg`, `_rad`); dimensionless quantities carry none.
//! Unknown keys are rejected, and a key that differs from a known one only
//! in its unit suffix is reported as a unit mismatch. Defaults reproduce
//! the published operating points of the experiment (see the README table).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use gsd_core::constants;
use gsd_core::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    SenseAberration,
    SynthHologram,
    SimulateSpot,
    Deplete,
    Image,
    Motion,
    Stabilize,
    Report,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SenseAberration => "sense-aberration",
            ExperimentKind::SynthHologram => "synth-hologram",
            ExperimentKind::SimulateSpot => "simulate-spot",
            ExperimentKind::Deplete => "deplete",
            ExperimentKind::Image => "image",
            ExperimentKind::Motion => "motion",
            ExperimentKind::Stabilize => "stabilize",
            ExperimentKind::Report => "report",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "sense-aberration" => ExperimentKind::SenseAberration,
            "synth-hologram" => ExperimentKind::SynthHologram,
            "simulate-spot" => ExperimentKind::SimulateSpot,
            "deplete" => ExperimentKind::Deplete,
            "image" => ExperimentKind::Image,
            "motion" => ExperimentKind::Motion,
            "stabilize" => ExperimentKind::Stabilize,
            "report" => ExperimentKind::Report,
            other => return Err(Error::format(format!("unknown experiment kind {other:?}"))),
        })
    }
}

/// Effective depletion-rate coefficient of the imaging run, 1/s, calibrated
/// so the resolution law reproduces the measured 175 nm spot at
/// s_max = 14, t_D = 7 us. The two-level theory value is 4.1e7 1/s; the
/// measured optical pumping is slower by a factor of about 60.
pub const IMAGE_K_EFFECTIVE: f64 = 6.5222e5;

/// Effective fraction of the nominal saturation driving depletion in the
/// motion runs, calibrated so the 50 ns snapshots reproduce the reported
/// 373 nm resolution at nominal s_max = 450.
pub const MOTION_EFFICIENCY: f64 = 0.018;

/// Output artifact selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Pgm,
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn pgm(self) -> bool {
        matches!(self, OutputFormat::Pgm | OutputFormat::Both)
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub format: OutputFormat,

    // [optics]
    pub wavelength_m: f64,
    pub numerical_aperture: f64,
    pub focal_length_m: f64,

    // [beam]
    pub r0_m: f64,
    pub s_max: f64,
    /// 0 means an ideal donut (zero residual centre intensity).
    pub extinction_ratio: f64,
    pub fwhm00_m: f64,

    // [pulse]
    pub t_d_s: f64,
    pub envelope: String, // "rect" | "trapezoid"
    pub rise_s: f64,
    pub fall_s: f64,

    // [physics]
    pub gamma_hz: f64,
    pub branching_bright: f64,
    /// 0 means the two-level theory value.
    pub k_per_s: f64,
    pub efficiency: f64,

    // [imaging]
    pub points: usize,
    pub pitch_m: f64,
    pub shots: u32,
    pub cooling_s: f64,
    pub pump_s: f64,
    pub detect_s: f64,
    pub exact: bool,
    pub mode: String, // "rate" | "master"
    pub t_d_sweep_s: Vec<f64>,

    // [readout]
    pub delta_p: f64,

    // [ion]
    pub ion_x_m: f64,
    pub ion_y_m: f64,
    pub thermal_rms_m: f64,
    pub per_shot_blur: bool,

    // [drift]
    pub drift_enabled: bool,
    pub drift_speed_m_per_s: f64,
    pub drift_bound_m: f64,
    pub drift_heading_diffusion: f64,

    // [motion]
    pub omega_y_hz: f64,
    pub drive_cycles: u32,
    pub force_n: f64,
    pub mass_kg: f64,
    pub delays_per_period: usize,
    pub periods: usize,

    // [hologram]
    pub region: usize,
    pub period: usize,
    pub lee_mode: String, // "proportional" | "linearized"
    pub iris_fraction: f64,

    // [aberration]
    pub patch: usize,
    pub pv_rad: f64,
    pub hidden_seed: u64,
    pub hidden_file: String,

    // [stabilizer]
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub set_point_v: f64,
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub adc_v: f64,
    pub dac_bits: u32,
    pub dac_span_v: f64,
    pub attenuation_db: f64,
    pub authority_v: f64,
    pub rw_step_v: f64,
    pub noise_v: f64,
    pub step_at_s: f64,
    pub step_v: f64,

    // [deplete]
    pub s_values: Vec<f64>,
    pub t_max_s: f64,
    pub samples: usize,

    // [report]
    pub input: String,
}

impl RunConfig {
    /// All-defaults configuration for an experiment kind; every default is
    /// an operating point of the published setup.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut cfg = RunConfig {
            kind,
            seed: 42,
            format: OutputFormat::Both,
            wavelength_m: constants::YB_WAVELENGTH,
            numerical_aperture: constants::OBJECTIVE_NA,
            focal_length_m: constants::FOCAL_LENGTH,
            r0_m: constants::DONUT_R0,
            s_max: 14.0,
            extinction_ratio: 26.0,
            fwhm00_m: constants::GAUSSIAN_FWHM00,
            t_d_s: 7e-6,
            envelope: "rect".into(),
            rise_s: 23e-9,
            fall_s: 25e-9,
            gamma_hz: 19.6e6,
            branching_bright: constants::BRANCHING_BRIGHT,
            k_per_s: 0.0,
            efficiency: 1.0,
            points: 21,
            pitch_m: 50e-9,
            shots: 100,
            cooling_s: 1e-3,
            pump_s: 50e-6,
            detect_s: 0.55e-3,
            exact: false,
            mode: "rate".into(),
            t_d_sweep_s: Vec::new(),
            delta_p: constants::READOUT_ERROR,
            ion_x_m: 0.0,
            ion_y_m: 0.0,
            thermal_rms_m: constants::THERMAL_RMS,
            per_shot_blur: false,
            drift_enabled: false,
            drift_speed_m_per_s: 1.8e-9,
            drift_bound_m: 60e-9,
            drift_heading_diffusion: 0.15,
            omega_y_hz: 1.36e6,
            drive_cycles: 100,
            force_n: 6.9e-21,
            mass_kg: constants::YB_MASS,
            delays_per_period: 10,
            periods: 1,
            region: constants::DMD_REGION,
            period: constants::GRATING_PERIOD,
            lee_mode: "linearized".into(),
            iris_fraction: 0.4,
            patch: 20,
            pv_rad: 14.0 * std::f64::consts::PI,
            hidden_seed: 7,
            hidden_file: String::new(),
            duration_s: 3600.0,
            sample_rate_hz: 2.0,
            set_point_v: 0.39,
            kp: 0.2,
            ki: 1.0,
            kd: 0.0,
            adc_v: 1e-6,
            dac_bits: 24,
            dac_span_v: 10.0,
            attenuation_db: 20.0,
            authority_v: 0.05,
            rw_step_v: 8e-6,
            noise_v: 1e-6,
            step_at_s: 0.0,
            step_v: 0.0,
            s_values: vec![1.0, 10.0, 100.0, 400.0],
            t_max_s: 150e-9,
            samples: 151,
            input: String::new(),
        };
        match kind {
            ExperimentKind::Image => {
                // Best-resolution operating point: 175 nm at 65 nW / 7 us.
                cfg.k_per_s = IMAGE_K_EFFECTIVE;
                cfg.points = 49;
                cfg.pitch_m = 25e-9;
            }
            ExperimentKind::Motion => {
                // 50 ns snapshots of the driven 1.36 MHz mode.
                cfg.s_max = 450.0;
                cfg.extinction_ratio = 0.0;
                cfg.t_d_s = 50e-9;
                cfg.efficiency = MOTION_EFFICIENCY;
                cfg.mode = "master".into();
                cfg.points = 10;
                cfg.pitch_m = 1.25e-6 / 9.0;
            }
            ExperimentKind::Deplete => {
                cfg.t_d_s = 150e-9;
            }
            _ => {}
        }
        cfg
    }

    /// Parse a config file over the defaults for `kind`.
    pub fn parse(kind: ExperimentKind, text: &str) -> Result<Self> {
        let mut cfg = Self::defaults(kind);
        let mut section = String::from("run");
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::format(format!("line {line_no}: unterminated section header")))?;
                section = name.trim().to_string();
                if !KNOWN_SECTIONS.contains(&section.as_str()) {
                    return Err(Error::format(format!(
                        "line {line_no}: unknown section [{section}]"
                    )));
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::format(format!("line {line_no}: expected key = value"))
            })?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(&section, key, value, line_no)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str, line: usize) -> Result<()> {
        let f = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::format(format!("line {line}: {key}: bad number {v:?}")))
        };
        let nonneg = |v: &str| -> Result<f64> {
            let x = f(v)?;
            if x < 0.0 {
                return Err(Error::format(format!(
                    "line {line}: {key} must be nonnegative, got {v}"
                )));
            }
            Ok(x)
        };
        let positive = |v: &str| -> Result<f64> {
            let x = f(v)?;
            if x <= 0.0 {
                return Err(Error::format(format!(
                    "line {line}: {key} must be positive, got {v}"
                )));
            }
            Ok(x)
        };
        let uint = |v: &str| -> Result<u64> {
            v.parse::<i64>()
                .map_err(|_| Error::format(format!("line {line}: {key}: bad integer {v:?}")))
                .and_then(|x| {
                    if x < 0 {
                        Err(Error::format(format!(
                            "line {line}: {key} must not be negative, got {v}"
                        )))
                    } else {
                        Ok(x as u64)
                    }
                })
        };
        let boolean = |v: &str| -> Result<bool> {
            match v {
                "true" | "yes" | "on" | "1" => Ok(true),
                "false" | "no" | "off" | "0" => Ok(false),
                _ => Err(Error::format(format!("line {line}: {key}: bad boolean {v:?}"))),
            }
        };
        let list = |v: &str| -> Result<Vec<f64>> {
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(',')
                .map(|item| {
                    item.trim().parse::<f64>().map_err(|_| {
                        Error::format(format!("line {line}: {key}: bad list entry {item:?}"))
                    })
                })
                .collect()
        };

        match (section, key) {
            ("run", "seed") => self.seed = uint(value)?,
            ("run", "format") => {
                self.format = match value {
                    "csv" => OutputFormat::Csv,
                    "pgm" => OutputFormat::Pgm,
                    "both" => OutputFormat::Both,
                    _ => {
                        return Err(Error::format(format!(
                            "line {line}: format must be csv, pgm or both"
                        )))
                    }
                }
            }
            ("optics", "wavelength_m") => self.wavelength_m = positive(value)?,
            ("optics", "numerical_aperture") => self.numerical_aperture = positive(value)?,
            ("optics", "focal_length_m") => self.focal_length_m = positive(value)?,
            ("beam", "r0_m") => self.r0_m = positive(value)?,
            ("beam", "s_max") => self.s_max = nonneg(value)?,
            ("beam", "extinction_ratio") => self.extinction_ratio = nonneg(value)?,
            ("beam", "fwhm00_m") => self.fwhm00_m = positive(value)?,
            ("pulse", "t_d_s") => self.t_d_s = positive(value)?,
            ("pulse", "envelope") => {
                if value != "rect" && value != "trapezoid" {
                    return Err(Error::format(format!(
                        "line {line}: envelope must be rect or trapezoid"
                    )));
                }
                self.envelope = value.to_string();
            }
            ("pulse", "rise_s") => self.rise_s = nonneg(value)?,
            ("pulse", "fall_s") => self.fall_s = nonneg(value)?,
            ("physics", "gamma_hz") => self.gamma_hz = positive(value)?,
            ("physics", "branching_bright") => self.branching_bright = nonneg(value)?,
            ("physics", "k_per_s") => self.k_per_s = nonneg(value)?,
            ("physics", "efficiency") => self.efficiency = positive(value)?,
            ("imaging", "points") => self.points = uint(value)? as usize,
            ("imaging", "pitch_m") => self.pitch_m = positive(value)?,
            ("imaging", "shots") => {
                let shots = uint(value)?;
                if shots == 0 {
                    return Err(Error::format(format!(
                        "line {line}: shots must be at least 1"
                    )));
                }
                self.shots = shots as u32;
            }
            ("imaging", "cooling_s") => self.cooling_s = nonneg(value)?,
            ("imaging", "pump_s") => self.pump_s = nonneg(value)?,
            ("imaging", "detect_s") => self.detect_s = nonneg(value)?,
            ("imaging", "exact") => self.exact = boolean(value)?,
            ("imaging", "mode") => {
                if value != "rate" && value != "master" {
                    return Err(Error::format(format!(
                        "line {line}: mode must be rate or master"
                    )));
                }
                self.mode = value.to_string();
            }
            ("imaging", "t_d_sweep_s") => self.t_d_sweep_s = list(value)?,
            ("readout", "delta_p") => {
                let dp = nonneg(value)?;
                if dp >= 0.5 {
                    return Err(Error::format(format!(
                        "line {line}: delta_p must be below 0.5"
                    )));
                }
                self.delta_p = dp;
            }
            ("ion", "x_m") => self.ion_x_m = f(value)?,
            ("ion", "y_m") => self.ion_y_m = f(value)?,
            ("ion", "thermal_rms_m") => self.thermal_rms_m = nonneg(value)?,
            ("ion", "per_shot_blur") => self.per_shot_blur = boolean(value)?,
            ("drift", "enabled") => self.drift_enabled = boolean(value)?,
            ("drift", "speed_m_per_s") => self.drift_speed_m_per_s = nonneg(value)?,
            ("drift", "bound_m") => self.drift_bound_m = positive(value)?,
            ("drift", "heading_diffusion") => self.drift_heading_diffusion = nonneg(value)?,
            ("motion", "omega_y_hz") => self.omega_y_hz = positive(value)?,
            ("motion", "drive_cycles") => self.drive_cycles = uint(value)? as u32,
            ("motion", "force_n") => self.force_n = nonneg(value)?,
            ("motion", "mass_kg") => self.mass_kg = positive(value)?,
            ("motion", "delays_per_period") => self.delays_per_period = uint(value)? as usize,
            ("motion", "periods") => self.periods = uint(value)? as usize,
            ("hologram", "region") => self.region = uint(value)? as usize,
            ("hologram", "period") => self.period = uint(value)? as usize,
            ("hologram", "mode") => {
                if value != "proportional" && value != "linearized" {
                    return Err(Error::format(format!(
                        "line {line}: hologram mode must be proportional or linearized"
                    )));
                }
                self.lee_mode = value.to_string();
            }
            ("hologram", "iris_fraction") => self.iris_fraction = positive(value)?,
            ("aberration", "patch") => self.patch = uint(value)? as usize,
            ("aberration", "pv_rad") => self.pv_rad = nonneg(value)?,
            ("aberration", "hidden_seed") => self.hidden_seed = uint(value)?,
            ("aberration", "hidden_file") => self.hidden_file = value.to_string(),
            ("stabilizer", "duration_s") => self.duration_s = positive(value)?,
            ("stabilizer", "sample_rate_hz") => self.sample_rate_hz = positive(value)?,
            ("stabilizer", "set_point_v") => self.set_point_v = positive(value)?,
            ("stabilizer", "kp") => self.kp = f(value)?,
            ("stabilizer", "ki") => self.ki = f(value)?,
            ("stabilizer", "kd") => self.kd = f(value)?,
            ("stabilizer", "adc_v") => self.adc_v = nonneg(value)?,
            ("stabilizer", "dac_bits") => self.dac_bits = uint(value)? as u32,
            ("stabilizer", "dac_span_v") => self.dac_span_v = positive(value)?,
            ("stabilizer", "attenuation_db") => self.attenuation_db = nonneg(value)?,
            ("stabilizer", "authority_v") => self.authority_v = positive(value)?,
            ("stabilizer", "rw_step_v") => self.rw_step_v = nonneg(value)?,
            ("stabilizer", "noise_v") => self.noise_v = nonneg(value)?,
            ("stabilizer", "step_at_s") => self.step_at_s = nonneg(value)?,
            ("stabilizer", "step_v") => self.step_v = f(value)?,
            ("deplete", "s_values") => self.s_values = list(value)?,
            ("deplete", "t_max_s") => self.t_max_s = positive(value)?,
            ("deplete", "samples") => self.samples = uint(value)? as usize,
            ("report", "input") => self.input = value.to_string(),
            _ => return Err(unknown_key_error(section, key, line)),
        }
        Ok(())
    }

    /// Cross-field validation that needs the whole config.
    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::validation("imaging points must be at least 2"));
        }
        if self.delays_per_period < 2 {
            return Err(Error::validation("need at least 2 delays per period"));
        }
        if !(1..=2).contains(&self.periods) {
            return Err(Error::validation("periods must be 1 or 2"));
        }
        if self.region % self.patch != 0 {
            return Err(Error::validation("aberration patch must tile the hologram region"));
        }
        if self.period < 4 {
            return Err(Error::validation("grating period must be at least 4 mirrors"));
        }
        if self.iris_fraction >= 0.5 {
            return Err(Error::configuration(
                "iris_fraction must stay below half the carrier spacing",
            ));
        }
        if self.envelope == "trapezoid" && self.t_d_s < self.rise_s + self.fall_s {
            return Err(Error::validation("trapezoid pulse shorter than rise + fall"));
        }
        Ok(())
    }

    /// Canonical serialization of the resolved config. Parsing it back
    /// reproduces this configuration.
    pub fn resolved(&self) -> String {
        let mut out = String::new();
        let mut sec = |name: &str, entries: &[(&str, String)]| {
            let _ = writeln!(out, "[{name}]");
            for (k, v) in entries {
                let _ = writeln!(out, "{k} = {v}");
            }
        };
        let fl = |v: f64| format!("{v:e}");
        let fvec = |vs: &[f64]| vs.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",");
        sec(
            "run",
            &[
                ("seed", self.seed.to_string()),
                (
                    "format",
                    match self.format {
                        OutputFormat::Csv => "csv".into(),
                        OutputFormat::Pgm => "pgm".into(),
                        OutputFormat::Both => "both".into(),
                    },
                ),
            ],
        );
        sec(
            "optics",
            &[
                ("wavelength_m", fl(self.wavelength_m)),
                ("numerical_aperture", fl(self.numerical_aperture)),
                ("focal_length_m", fl(self.focal_length_m)),
            ],
        );
        sec(
            "beam",
            &[
                ("r0_m", fl(self.r0_m)),
                ("s_max", fl(self.s_max)),
                ("extinction_ratio", fl(self.extinction_ratio)),
                ("fwhm00_m", fl(self.fwhm00_m)),
            ],
        );
        sec(
            "pulse",
            &[
                ("t_d_s", fl(self.t_d_s)),
                ("envelope", self.envelope.clone()),
                ("rise_s", fl(self.rise_s)),
                ("fall_s", fl(self.fall_s)),
            ],
        );
        sec(
            "physics",
            &[
                ("gamma_hz", fl(self.gamma_hz)),
                ("branching_bright", fl(self.branching_bright)),
                ("k_per_s", fl(self.k_per_s)),
                ("efficiency", fl(self.efficiency)),
            ],
        );
        sec(
            "imaging",
            &[
                ("points", self.points.to_string()),
                ("pitch_m", fl(self.pitch_m)),
                ("shots", self.shots.to_string()),
                ("cooling_s", fl(self.cooling_s)),
                ("pump_s", fl(self.pump_s)),
                ("detect_s", fl(self.detect_s)),
                ("exact", self.exact.to_string()),
                ("mode", self.mode.clone()),
                ("t_d_sweep_s", fvec(&self.t_d_sweep_s)),
            ],
        );
        sec("readout", &[("delta_p", fl(self.delta_p))]);
        sec(
            "ion",
            &[
                ("x_m", fl(self.ion_x_m)),
                ("y_m", fl(self.ion_y_m)),
                ("thermal_rms_m", fl(self.thermal_rms_m)),
                ("per_shot_blur", self.per_shot_blur.to_string()),
            ],
        );
        sec(
            "drift",
            &[
                ("enabled", self.drift_enabled.to_string()),
                ("speed_m_per_s", fl(self.drift_speed_m_per_s)),
                ("bound_m", fl(self.drift_bound_m)),
                ("heading_diffusion", fl(self.drift_heading_diffusion)),
            ],
        );
        sec(
            "motion",
            &[
                ("omega_y_hz", fl(self.omega_y_hz)),
                ("drive_cycles", self.drive_cycles.to_string()),
                ("force_n", fl(self.force_n)),
                ("mass_kg", fl(self.mass_kg)),
                ("delays_per_period", self.delays_per_period.to_string()),
                ("periods", self.periods.to_string()),
            ],
        );
        sec(
            "hologram",
            &[
                ("region", self.region.to_string()),
                ("period", self.period.to_string()),
                ("mode", self.lee_mode.clone()),
                ("iris_fraction", fl(self.iris_fraction)),
            ],
        );
        sec(
            "aberration",
            &[
                ("patch", self.patch.to_string()),
                ("pv_rad", fl(self.pv_rad)),
                ("hidden_seed", self.hidden_seed.to_string()),
                ("hidden_file", self.hidden_file.clone()),
            ],
        );
        sec(
            "stabilizer",
            &[
                ("duration_s", fl(self.duration_s)),
                ("sample_rate_hz", fl(self.sample_rate_hz)),
                ("set_point_v", fl(self.set_point_v)),
                ("kp", fl(self.kp)),
                ("ki", fl(self.ki)),
                ("kd", fl(self.kd)),
                ("adc_v", fl(self.adc_v)),
                ("dac_bits", self.dac_bits.to_string()),
                ("dac_span_v", fl(self.dac_span_v)),
                ("attenuation_db", fl(self.attenuation_db)),
                ("authority_v", fl(self.authority_v)),
                ("rw_step_v", fl(self.rw_step_v)),
                ("noise_v", fl(self.noise_v)),
                ("step_at_s", fl(self.step_at_s)),
                ("step_v", fl(self.step_v)),
            ],
        );
        sec(
            "deplete",
            &[
                ("s_values", fvec(&self.s_values)),
                ("t_max_s", fl(self.t_max_s)),
                ("samples", self.samples.to_string()),
            ],
        );
        sec("report", &[("input", self.input.clone())]);
        out
    }
}

const KNOWN_SECTIONS: &[&str] = &[
    "run",
    "optics",
    "beam",
    "pulse",
    "physics",
    "imaging",
    "readout",
    "ion",
    "drift",
    "motion",
    "hologram",
    "aberration",
    "stabilizer",
    "deplete",
    "report",
];

fn known_keys(section: &str) -> &'static [&'static str] {
    match section {
        "run" => &["seed", "format"],
        "optics" => &["wavelength_m", "numerical_aperture", "focal_length_m"],
        "beam" => &["r0_m", "s_max", "extinction_ratio", "fwhm00_m"],
        "pulse" => &["t_d_s", "envelope", "rise_s", "fall_s"],
        "physics" => &["gamma_hz", "branching_bright", "k_per_s", "efficiency"],
        "imaging" => &[
            "points",
            "pitch_m",
            "shots",
            "cooling_s",
            "pump_s",
            "detect_s",
            "exact",
            "mode",
            "t_d_sweep_s",
        ],
        "readout" => &["delta_p"],
        "ion" => &["x_m", "y_m", "thermal_rms_m", "per_shot_blur"],
        "drift" => &["enabled", "speed_m_per_s", "bound_m", "heading_diffusion"],
        "motion" => &[
            "omega_y_hz",
            "drive_cycles",
            "force_n",
            "mass_kg",
            "delays_per_period",
            "periods",
        ],
        "hologram" => &["region", "period", "mode", "iris_fraction"],
        "aberration" => &["patch", "pv_rad", "hidden_seed", "hidden_file"],
        "stabilizer" => &[
            "duration_s",
            "sample_rate_hz",
            "set_point_v",
            "kp",
            "ki",
            "kd",
            "adc_v",
            "dac_bits",
            "dac_span_v",
            "attenuation_db",
            "authority_v",
            "rw_step_v",
            "noise_v",
            "step_at_s",
            "step_v",
        ],
        "deplete" => &["s_values", "t_max_s", "samples"],
        "report" => &["input"],
        _ => &[],
    }
}

const UNIT_SUFFIXES: &[&str] = &["m_per_s", "per_s", "hz", "kg", "rad", "db", "m", "s", "n", "v"];

fn strip_unit(key: &str) -> &str {
    for suffix in UNIT_SUFFIXES {
        if let Some(base) = key.strip_suffix(suffix) {
            if let Some(base) = base.strip_suffix('_') {
                return base;
            }
        }
    }
    key
}

fn unknown_key_error(section: &str, key: &str, line: usize) -> Error {
    let base = strip_unit(key);
    for candidate in known_keys(section) {
        if strip_unit(candidate) == base && *candidate != key {
            return Error::format(format!(
                "line {line}: unit suffix mismatch for {key:?} in [{section}]: expected {candidate:?}"
            ));
        }
    }
    Error::format(format!("line {line}: unknown key {key:?} in section [{section}]"))
}

/// Ordered dump of every (section, key, value) pair, used by manifests.
pub fn config_entries(cfg: &RunConfig) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    let mut section = String::new();
    for line in cfg.resolved().lines() {
        if let Some(name) = line.strip_prefix('[') {
            section = name.trim_end_matches(']').to_string();
        } else if let Some((k, v)) = line.split_once('=') {
            map.insert(format!("{section}.{}", k.trim()), v.trim().to_string());
        }
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::parse(ExperimentKind::Deplete, "").unwrap();
        assert_eq!(cfg.s_values, vec![1.0, 10.0, 100.0, 400.0]);
        assert_eq!(cfg.shots, 100);
        assert_eq!(cfg.seed, 42);
    }

    #[test]
    fn pulse_duration_is_parsed() {
        let cfg = RunConfig::parse(ExperimentKind::Image, "[pulse]\nt_d_s = 7e-6\n").unwrap();
        assert_eq!(cfg.t_d_s, 7e-6);
    }

    #[test]
    fn negative_shots_name_the_line() {
        let err = RunConfig::parse(ExperimentKind::Image, "[imaging]\n\nshots = -1\n")
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("shots"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err =
            RunConfig::parse(ExperimentKind::Image, "[imaging]\nbogus = 3\n").unwrap_err();
        assert!(err.to_string().contains("unknown key"), "{err}");
    }

    #[test]
    fn unit_suffix_mismatch_is_explained() {
        let err = RunConfig::parse(ExperimentKind::Image, "[pulse]\nt_d_m = 7e-6\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unit suffix mismatch"), "{msg}");
        assert!(msg.contains("t_d_s"), "{msg}");
    }

    #[test]
    fn resolved_config_roundtrips() {
        let mut cfg = RunConfig::defaults(ExperimentKind::Motion);
        cfg.seed = 1234;
        cfg.t_d_sweep_s = vec![1e-9, 2e-9];
        let text = cfg.resolved();
        let back = RunConfig::parse(ExperimentKind::Motion, &text).unwrap();
        assert_eq!(back.seed, 1234);
        assert_eq!(back.t_d_sweep_s, cfg.t_d_sweep_s);
        assert_eq!(back.resolved(), text);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# top comment\n\n[readout]\ndelta_p = 0.03 # inline\n";
        let cfg = RunConfig::parse(ExperimentKind::Image, text).unwrap();
        assert_eq!(cfg.delta_p, 0.03);
    }
}
