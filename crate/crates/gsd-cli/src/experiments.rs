//! Experiment implementations dispatched by [`run`].

use std::path::Path;

use gsd_core::aberration::{PhaseMap, SensingConfig};
use gsd_core::analysis::{
    fit_gaussian2d, fit_trajectory, resolution_predicted, GaussianFit, Polarity,
};
use gsd_core::atom::{
    lindblad_curve, DepletionModel, DepletionPhysics, DepletionPulse, DepletionTable,
    LevelSystem, PulseEnvelope, SaturationSource,
};
use gsd_core::error::{Error, Result};
use gsd_core::exec::Exec;
use gsd_core::hologram::LeeMode;
use gsd_core::optics::{
    fwhm_1d, write_pgm16, Aperture, BeamProfile, GridSpec, OpticalSystem, ProfileMode,
};
use gsd_core::sequence::{
    run_motion, run_scan, DriftModel, ImageMeta, ImagingConfig, IonModel, MotionConfig,
    ReadoutModel, ScanImage, ThermalBlur,
};
use gsd_core::stabilizer::{frequency_drift, simulate_loop, LoopConfig, PlantModel};

use crate::config::{ExperimentKind, OutputFormat, RunConfig};
use crate::manifest::RunManifest;
use crate::output::{image_csv, matrix_csv, parse_matrix_csv, table_csv, OutputSink};
use crate::scenarios;

pub fn optical_system(cfg: &RunConfig) -> Result<OpticalSystem> {
    OpticalSystem::new(
        cfg.wavelength_m,
        cfg.numerical_aperture,
        cfg.focal_length_m,
        Aperture::None,
    )
}

pub fn beam_profile(cfg: &RunConfig) -> Result<BeamProfile> {
    if cfg.extinction_ratio > 0.0 {
        BeamProfile::with_extinction_ratio(cfg.r0_m, cfg.s_max, cfg.extinction_ratio, cfg.fwhm00_m)
    } else {
        BeamProfile::new(cfg.r0_m, cfg.s_max, 0.0, cfg.fwhm00_m)
    }
}

pub fn pulse(cfg: &RunConfig) -> Result<DepletionPulse> {
    pulse_with_duration(cfg, cfg.t_d_s)
}

pub fn pulse_with_duration(cfg: &RunConfig, t_d: f64) -> Result<DepletionPulse> {
    let envelope = if cfg.envelope == "trapezoid" {
        PulseEnvelope::Trapezoid { rise: cfg.rise_s, fall: cfg.fall_s }
    } else {
        PulseEnvelope::Rectangular
    };
    DepletionPulse::new(cfg.s_max, t_d, envelope)
}

pub fn physics(cfg: &RunConfig) -> DepletionPhysics {
    let mut phys = DepletionPhysics {
        branching_bright: cfg.branching_bright,
        wavelength: cfg.wavelength_m,
        gamma: std::f64::consts::TAU * cfg.gamma_hz,
        k_override: None,
        efficiency: cfg.efficiency,
    };
    if cfg.k_per_s > 0.0 {
        phys.k_override = Some(cfg.k_per_s);
    }
    phys
}

pub fn readout(cfg: &RunConfig) -> Result<ReadoutModel> {
    ReadoutModel::new(cfg.delta_p)
}

pub fn ion_model(cfg: &RunConfig) -> Result<IonModel> {
    Ok(IonModel {
        position: (cfg.ion_x_m, cfg.ion_y_m),
        blur: if cfg.thermal_rms_m > 0.0 {
            Some(ThermalBlur::new(cfg.thermal_rms_m)?)
        } else {
            None
        },
        per_shot_blur: cfg.per_shot_blur,
        drift: cfg.drift_enabled.then(|| DriftModel {
            speed: cfg.drift_speed_m_per_s,
            bound: cfg.drift_bound_m,
            heading_diffusion: cfg.drift_heading_diffusion,
        }),
    })
}

pub fn imaging_config(cfg: &RunConfig) -> ImagingConfig {
    ImagingConfig {
        points: cfg.points,
        pitch: cfg.pitch_m,
        shots: cfg.shots,
        cooling_time: cfg.cooling_s,
        pump_time: cfg.pump_s,
        detect_time: cfg.detect_s,
        exact_probabilities: cfg.exact,
        seed: cfg.seed,
        exec: Exec::Auto,
    }
}

pub fn sensing_config(cfg: &RunConfig) -> SensingConfig {
    SensingConfig {
        region: cfg.region,
        patch: cfg.patch,
        period: cfg.period,
        mirror_pitch: gsd_core::constants::MIRROR_PITCH,
        exec: Exec::Auto,
    }
}

pub fn lee_mode(cfg: &RunConfig) -> LeeMode {
    if cfg.lee_mode == "proportional" {
        LeeMode::Proportional
    } else {
        LeeMode::Linearized
    }
}

/// Build the master-equation lookup for a pulse, covering the effective
/// saturation range of the beam.
pub fn depletion_table(
    cfg: &RunConfig,
    pulse: &DepletionPulse,
    beam: &BeamProfile,
) -> Result<DepletionTable> {
    let phys = physics(cfg);
    let s_top = (phys.effective_s(beam.s0 + beam.s_max) * 1.05).max(0.5);
    DepletionTable::build(pulse, s_top, Exec::Auto)
}

/// Run the experiment named by `cfg.kind`, writing artifacts and a
/// manifest into `out_dir`.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let mut sink = OutputSink::new(out_dir)?;
    match cfg.kind {
        ExperimentKind::Deplete => run_deplete(cfg, &mut sink)?,
        ExperimentKind::Image => run_image(cfg, &mut sink)?,
        ExperimentKind::Motion => run_motion_experiment(cfg, &mut sink)?,
        ExperimentKind::Stabilize => run_stabilize(cfg, &mut sink)?,
        ExperimentKind::SenseAberration => run_sense(cfg, &mut sink)?,
        ExperimentKind::SynthHologram => run_synth(cfg, &mut sink)?,
        ExperimentKind::SimulateSpot => run_spot(cfg, &mut sink)?,
        ExperimentKind::Report => run_report(cfg, &mut sink)?,
    }
    let manifest = RunManifest::new(cfg, sink.files().to_vec());
    manifest.save(out_dir)?;
    Ok(manifest)
}

/// Dark-state survival curves for a list of saturation parameters.
fn run_deplete(cfg: &RunConfig, sink: &mut OutputSink) -> Result<()> {
    if cfg.s_values.is_empty() {
        return Err(Error::validation("deplete needs at least one s value"));
    }
    if cfg.samples < 2 {
        return Err(Error::validation("deplete needs at least 2 samples"));
    }
    let times: Vec<f64> = (0..cfg.samples)
        .map(|i| cfg.t_max_s * i as f64 / (cfg.samples - 1) as f64)
        .collect();
    let mut curves = Vec::new();
    for &s in &cfg.s_values {
        let sys = LevelSystem::new(
            std::f64::consts::TAU * cfg.gamma_hz,
            std::f64::consts::TAU * cfg.gamma_hz * (s / 2.0).sqrt(),
            [1.0 / 3.0, 1.0 / 3.0, 0.0, 1.0 / 3.0],
        )?;
        let p = pulse_with_duration(cfg, cfg.t_max_s)?;
        let p = DepletionPulse::new(s, p.duration, p.envelope)?;
        curves.push(lindblad_curve(&sys, &p, &times)?);
    }
    let header: Vec<String> = std::iter::once("t_s".to_string())
        .chain(cfg.s_values.iter().map(|s| format!("p0_s{s}")))
        .collect();
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<f64>> = times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            std::iter::once(t).chain(curves.iter().map(|c| c[i])).collect()
        })
        .collect();
    sink.write("deplete.csv", table_csv(&header_refs, &rows).as_bytes())
}

fn write_image(
    sink: &mut OutputSink,
    stem: &str,
    img: &ScanImage,
    format: OutputFormat,
) -> Result<()> {
    if format.csv() {
        sink.write(&format!("{stem}.csv"), image_csv(img).as_bytes())?;
    }
    if format.pgm() {
        let name = format!("{stem}.pgm");
        write_pgm16(&img.probabilities, &sink.dir().join(&name))?;
        sink.record_existing(&name)?;
    }
    Ok(())
}

/// One super-resolved image (or a depletion-time sweep of images).
fn run_image(cfg: &RunConfig, sink: &mut OutputSink) -> Result<()> {
    let beam = beam_profile(cfg)?;
    let phys = physics(cfg);
    let rd = readout(cfg)?;
    let ion = ion_model(cfg)?;
    let imaging = imaging_config(cfg);
    let src = SaturationSource::Profile(&beam);

    let durations: Vec<f64> = if cfg.t_d_sweep_s.is_empty() {
        vec![cfg.t_d_s]
    } else {
        cfg.t_d_sweep_s.clone()
    };
    let sweep = durations.len() > 1;
    for (idx, &t_d) in durations.iter().enumerate() {
        let p = pulse_with_duration(cfg, t_d)?;
        let table;
        let model = if cfg.mode == "master" {
            table = depletion_table(cfg, &p, &beam)?;
            DepletionModel::Master(&table)
        } else {
            DepletionModel::Rate
        };
        let img = run_scan(&imaging, &src, &p, &phys, &model, &rd, &ion, idx as u64)?;
        let stem = if sweep { format!("image_{idx:03}") } else { "image".to_string() };
        write_image(sink, &stem, &img, cfg.format)?;
    }
    if sweep {
        let rows: Vec<Vec<f64>> = durations
            .iter()
            .enumerate()
            .map(|(i, &t)| vec![i as f64, t])
            .collect();
        sink.write("sweep.csv", table_csv(&["index", "t_d_s"], &rows).as_bytes())?;
    }
    Ok(())
}

/// Stroboscopic snapshots of the driven ion, one image per delay.
fn run_motion_experiment(cfg: &RunConfig, sink: &mut OutputSink) -> Result<()> {
    let beam = beam_profile(cfg)?;
    let phys = physics(cfg);
    let rd = readout(cfg)?;
    let p = pulse(cfg)?;
    let table = depletion_table(cfg, &p, &beam)?;
    let model = DepletionModel::Master(&table);
    let motion = MotionConfig {
        omega_y: std::f64::consts::TAU * cfg.omega_y_hz,
        drive_cycles: cfg.drive_cycles,
        drive_force: cfg.force_n,
        mass: cfg.mass_kg,
        delays_per_period: cfg.delays_per_period,
        periods: cfg.periods,
        phase0: 0.0,
        imaging: imaging_config(cfg),
    };
    let blur =
        if cfg.thermal_rms_m > 0.0 { Some(ThermalBlur::new(cfg.thermal_rms_m)?) } else { None };
    let src = SaturationSource::Profile(&beam);
    let out = run_motion(
        &motion,
        &src,
        &p,
        &phys,
        &model,
        &rd,
        (cfg.ion_x_m, cfg.ion_y_m),
        blur,
    )?;
    let rows: Vec<Vec<f64>> = out
        .iter()
        .enumerate()
        .map(|(i, (t, _))| vec![i as f64, *t])
        .collect();
    sink.write("delays.csv", table_csv(&["index", "delay_s"], &rows).as_bytes())?;
    for (idx, (_, img)) in out.iter().enumerate() {
        write_image(sink, &format!("motion_{idx:03}"), img, cfg.format)?;
    }
    Ok(())
}

/// Trap-voltage feedback simulation with a paired open-loop record.
fn run_stabilize(cfg: &RunConfig, sink: &mut OutputSink) -> Result<()> {
    let plant = PlantModel {
        nominal_v: cfg.set_point_v,
        rw_step_v: cfg.rw_step_v,
        noise_v: cfg.noise_v,
        step_disturbance: (cfg.step_v != 0.0)
            .then(|| ((cfg.step_at_s * cfg.sample_rate_hz) as usize, cfg.step_v)),
        adc_resolution_v: cfg.adc_v,
    };
    let loop_cfg = LoopConfig {
        sample_rate_hz: cfg.sample_rate_hz,
        set_point_v: cfg.set_point_v,
        kp: cfg.kp,
        ki: cfg.ki,
        kd: cfg.kd,
        dac_bits: cfg.dac_bits,
        dac_span_v: cfg.dac_span_v,
        attenuation_db: cfg.attenuation_db,
        authority_v: cfg.authority_v,
    };
    let closed = simulate_loop(&plant, &loop_cfg, cfg.duration_s, cfg.seed, true)?;
    let open = simulate_loop(&plant, &loop_cfg, cfg.duration_s, cfg.seed, false)?;
    let dt = 1.0 / cfg.sample_rate_hz;
    let rows: Vec<Vec<f64>> = closed
        .rel_error
        .iter()
        .zip(&closed.actuator_v)
        .enumerate()
        .map(|(k, (e, a))| vec![k as f64 * dt, *e, *a])
        .collect();
    sink.write(
        "stabilize.csv",
        table_csv(&["t_s", "dv_over_v", "actuator_v"], &rows).as_bytes(),
    )?;
    let omega = std::f64::consts::TAU * cfg.omega_y_hz;
    let freq = frequency_drift(&closed.rel_error, omega);
    let spikes = closed.spike_count(250e-6);
    let summary = format!(
        "closed_std_ppm = {}\nopen_std_ppm = {}\nsuppression = {}\nspikes_over_250ppm = {}\n\
         freq_std_hz = {}\nfreq_max_excursion_hz = {}\ndiverged = {}\n",
        closed.std() * 1e6,
        open.std() * 1e6,
        open.std() / closed.std().max(f64::MIN_POSITIVE),
        spikes,
        freq.std / std::f64::consts::TAU,
        freq.max_excursion / std::f64::consts::TAU,
        closed.diverged,
    );
    sink.write("summary.txt", summary.as_bytes())
}

fn load_or_generate_hidden(cfg: &RunConfig, sensing: &SensingConfig) -> Result<PhaseMap> {
    if cfg.hidden_file.is_empty() {
        Ok(scenarios::hidden_aberration(sensing, cfg.pv_rad, cfg.hidden_seed))
    } else {
        let text = std::fs::read_to_string(&cfg.hidden_file)?;
        let map = PhaseMap::from_text(&text)?;
        if map.dims() != (sensing.region, sensing.region) {
            return Err(Error::validation("hidden aberration file has wrong dimensions"));
        }
        Ok(map)
    }
}

/// Measure a pupil phase map with the ion as detector and derive the
/// compensation pattern.
fn run_sense(cfg: &RunConfig, sink: &mut OutputSink) -> Result<()> {
    let sensing = sensing_config(cfg);
    sensing.validate()?;
    let sys = optical_system(cfg)?;
    let hidden = load_or_generate_hidden(cfg, &sensing)?;
    let waist = scenarios::pupil_waist_for_r0(&sys, cfg.r0_m);
    let focal_grid = GridSpec::centered(97, 97, 60e-9)?;
    let loop_out = scenarios::closed_loop(
        &hidden,
        &sensing,
        &sys,
        waist,
        cfg.iris_fraction,
        lee_mode(cfg),
        &focal_grid,
    )?;
    let patch_pitch = sensing.mirror_pitch * sensing.patch as f64;
    sink.write("wrapped.txt", loop_out.wrapped.to_text(patch_pitch).as_bytes())?;
    sink.write("unwrapped.txt", loop_out.unwrapped.to_text(patch_pitch).as_bytes())?;
    sink.write(
        "perpixel.txt",
        loop_out.per_pixel.to_text(sensing.mirror_pitch).as_bytes(),
    )?;
    sink.write(
        "compensation.txt",
        loop_out.compensation.to_text(sensing.mirror_pitch).as_bytes(),
    )?;
    let summary = format!(
        "residues = {}\nflagged = {}\nrecovery_rms_rad = {}\ner_before = {}\ner_after = {}\n",
        loop_out.residues,
        loop_out.wrapped.flagged.len(),
        loop_out.recovery_rms,
        loop_out.er_before,
        loop_out.er_after,
    );
    sink.write("summary.txt", summary.as_bytes())
}

/// Emit the binary donut hologram (optionally compensated).
fn run_synth(cfg: &RunConfig, sink: &mut OutputSink) -> Result<()> {
    let sensing = sensing_config(cfg);
    let sys = optical_system(cfg)?;
    let waist = scenarios::pupil_waist_for_r0(&sys, cfg.r0_m);
    let compensation = if cfg.hidden_file.is_empty() {
        None
    } else {
        let text = std::fs::read_to_string(&cfg.hidden_file)?;
        Some(PhaseMap::from_text(&text)?)
    };
    let holo = scenarios::donut_hologram(
        cfg.region,
        cfg.period,
        sensing.mirror_pitch,
        waist,
        compensation.as_ref(),
        lee_mode(cfg),
    )?;
    holo.save_pbm(&sink.dir().join("hologram.pbm"))?;
    sink.record_existing("hologram.pbm")?;
    sink.record_existing("hologram.pbm.txt")?;
    let summary = format!(
        "region = {}\nperiod = {}\non_fraction = {}\n",
        cfg.region,
        cfg.period,
        holo.on_fraction()
    );
    sink.write("summary.txt", summary.as_bytes())
}

/// Synthesize the donut, focus it, and characterize the spot.
fn run_spot(cfg: &RunConfig, sink: &mut OutputSink) -> Result<()> {
    let sensing = sensing_config(cfg);
    let sys = optical_system(cfg)?;
    let waist = scenarios::pupil_waist_for_r0(&sys, cfg.r0_m);
    let holo = scenarios::donut_hologram(
        cfg.region,
        cfg.period,
        sensing.mirror_pitch,
        waist,
        None,
        lee_mode(cfg),
    )?;
    let focal_grid = GridSpec::centered(161, 161, 40e-9)?;
    let focal =
        scenarios::hologram_to_focus(&holo, None, &sys, cfg.iris_fraction, &focal_grid)?;
    let intensity = focal.intensity();
    if cfg.format.csv() {
        sink.write("spot.csv", matrix_csv(&intensity).as_bytes())?;
    }
    if cfg.format.pgm() {
        write_pgm16(&intensity, &sink.dir().join("spot.pgm"))?;
        sink.record_existing("spot.pgm")?;
    }
    let mid = focal_grid.ny / 2;
    let profile: Vec<(f64, f64)> =
        (0..focal_grid.nx).map(|ix| (focal_grid.x(ix), intensity[(mid, ix)])).collect();
    let rows: Vec<Vec<f64>> = profile.iter().map(|&(x, v)| vec![x, v]).collect();
    sink.write("profile.csv", table_csv(&["x_m", "intensity"], &rows).as_bytes())?;
    let valley = fwhm_1d(&profile, ProfileMode::Valley)?;
    let er = scenarios::extinction_ratio_at_origin(&focal)?;
    let summary = format!("valley_fwhm_m = {valley}\nextinction_ratio = {er}\n");
    sink.write("summary.txt", summary.as_bytes())
}

fn fit_row(index: f64, control: f64, fit: &GaussianFit) -> Vec<f64> {
    vec![
        index,
        control,
        fit.center.0,
        fit.center.1,
        fit.fwhm.0,
        fit.fwhm.1,
        fit.amplitude,
        fit.offset,
        fit.center_err.0,
        fit.center_err.1,
        fit.fwhm_err.0,
        fit.fwhm_err.1,
        f64::from(u8::from(fit.converged)),
        fit.residual_norm,
    ]
}

const FIT_HEADER: [&str; 14] = [
    "index",
    "control",
    "center_x_m",
    "center_y_m",
    "fwhm_x_m",
    "fwhm_y_m",
    "amplitude",
    "offset",
    "center_x_err_m",
    "center_y_err_m",
    "fwhm_x_err_m",
    "fwhm_y_err_m",
    "converged",
    "residual",
];

fn load_image(dir: &Path, name: &str, run_cfg: &RunConfig) -> Result<ScanImage> {
    let text = std::fs::read_to_string(dir.join(name))?;
    let probabilities = parse_matrix_csv(&text)?;
    let (ny, nx) = probabilities.dim();
    let grid = GridSpec::centered(nx, ny, run_cfg.pitch_m)?;
    let counts = probabilities.mapv(|p| (p * f64::from(run_cfg.shots)).round() as u32);
    Ok(ScanImage {
        grid,
        probabilities,
        dark_counts: (!run_cfg.exact).then_some(counts),
        shots: run_cfg.shots,
        meta: ImageMeta {
            seed: run_cfg.seed,
            config_digest: 0,
            exec_mode: "loaded".to_string(),
            coverage_warning: false,
            exact: run_cfg.exact,
        },
    })
}

/// Consume a previous run's manifest and produce fit reports.
fn run_report(cfg: &RunConfig, sink: &mut OutputSink) -> Result<()> {
    if cfg.input.is_empty() {
        return Err(Error::validation("report needs [report] input = <run directory>"));
    }
    let input = Path::new(&cfg.input);
    let manifest = RunManifest::load(input)?;
    let run_cfg = RunConfig::parse(manifest.kind, &manifest.config)?;
    match manifest.kind {
        ExperimentKind::Image => {
            let sweep: Vec<(usize, f64)> = if manifest.files.iter().any(|(n, _)| n == "sweep.csv")
            {
                let text = std::fs::read_to_string(input.join("sweep.csv"))?;
                text.lines()
                    .skip(1)
                    .filter(|l| !l.is_empty())
                    .map(|l| {
                        let mut parts = l.split(',');
                        let idx = parts.next().unwrap_or("0").parse::<f64>().unwrap_or(0.0);
                        let t = parts.next().unwrap_or("0").parse::<f64>().unwrap_or(0.0);
                        (idx as usize, t)
                    })
                    .collect()
            } else {
                vec![(usize::MAX, run_cfg.t_d_s)]
            };
            let mut rows = Vec::new();
            let mut res_rows = Vec::new();
            let phys = physics(&run_cfg);
            for (i, (idx, t_d)) in sweep.iter().enumerate() {
                let name = if *idx == usize::MAX {
                    "image.csv".to_string()
                } else {
                    format!("image_{idx:03}.csv")
                };
                let img = load_image(input, &name, &run_cfg)?;
                let fit = fit_gaussian2d(&img, Polarity::Peak)?;
                rows.push(fit_row(i as f64, *t_d, &fit));
                let predicted =
                    resolution_predicted(run_cfg.s_max, *t_d, phys.k() * phys.efficiency, run_cfg.r0_m);
                res_rows.push(vec![*t_d, fit.fwhm.0, predicted]);
            }
            sink.write("fits.csv", table_csv(&FIT_HEADER, &rows).as_bytes())?;
            sink.write(
                "resolution.csv",
                table_csv(&["control_t_d_s", "measured_fwhm_m", "predicted_fwhm_m"], &res_rows)
                    .as_bytes(),
            )?;
        }
        ExperimentKind::Motion => {
            let delays_text = std::fs::read_to_string(input.join("delays.csv"))?;
            let delays: Vec<f64> = delays_text
                .lines()
                .skip(1)
                .filter(|l| !l.is_empty())
                .filter_map(|l| l.split(',').nth(1)?.parse::<f64>().ok())
                .collect();
            let mut rows = Vec::new();
            let mut centres = Vec::new();
            for (idx, &t) in delays.iter().enumerate() {
                let img = load_image(input, &format!("motion_{idx:03}.csv"), &run_cfg)?;
                let fit = fit_gaussian2d(&img, Polarity::Peak)?;
                rows.push(fit_row(idx as f64, t, &fit));
                centres.push((t, fit.center.1));
            }
            sink.write("fits.csv", table_csv(&FIT_HEADER, &rows).as_bytes())?;
            let period_nominal = 1.0 / run_cfg.omega_y_hz;
            let traj = fit_trajectory(&centres, period_nominal)?;
            let model = |t: f64| {
                traj.offset
                    + traj.amplitude * (std::f64::consts::TAU * t / traj.period + traj.phase).cos()
            };
            let traj_rows: Vec<Vec<f64>> =
                centres.iter().map(|&(t, y)| vec![t, y, model(t)]).collect();
            sink.write(
                "trajectory.csv",
                table_csv(&["t_s", "y_fit_m", "y_model_m"], &traj_rows).as_bytes(),
            )?;
            let summary = format!(
                "amplitude_m = {}\nperiod_s = {}\nphase_rad = {}\noffset_m = {}\nconverged = {}\n",
                traj.amplitude, traj.period, traj.phase, traj.offset, traj.converged
            );
            sink.write("summary.txt", summary.as_bytes())?;
        }
        other => {
            return Err(Error::validation(format!(
                "report supports image and motion runs, not {}",
                other.name()
            )))
        }
    }
    Ok(())
}
