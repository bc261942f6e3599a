//! Measurement sequences: per-pixel cooling/pump/deplete/detect cycles,
//! donut-spot scanning, Monte Carlo shot readout, driven secular motion and
//! slow stage drift.
//!
//! A scan image is built pixel by pixel: the donut is offset to a grid
//! position, the survival probability of the dark state is evaluated
//! (optionally convolved with the thermal wave packet), and the dark-state
//! fraction is estimated from `shots` noisy readouts. RNG streams split per
//! pixel, so parallel and sequential execution give identical images;
//! enabling drift forces a sequential pixel clock.

use std::sync::OnceLock;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::atom::{DepletionModel, DepletionPhysics, DepletionPulse, SaturationSource};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::optics::GridSpec;
use crate::rng::{fnv1a, stream_rng};

/// Single-shot state discrimination with symmetric error probability.
#[derive(Debug, Clone, Copy)]
pub struct ReadoutModel {
    /// Probability of misreading a single shot.
    pub error_prob: f64,
}

impl ReadoutModel {
    pub fn new(error_prob: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&error_prob) {
            return Err(Error::validation("readout error must lie in [0, 0.5)"));
        }
        Ok(ReadoutModel { error_prob })
    }

    /// Probability of *reporting* dark given true dark probability `p`.
    pub fn effective_p(&self, p: f64) -> f64 {
        p * (1.0 - self.error_prob) + (1.0 - p) * self.error_prob
    }
}

/// Estimate the dark-state probability from `shots` Bernoulli readouts.
///
/// Returns the estimate together with the raw dark count. Deterministic for
/// a fixed RNG stream.
pub fn readout_sample(
    p_dark_true: f64,
    shots: u32,
    model: &ReadoutModel,
    rng: &mut impl Rng,
) -> (f64, u32) {
    let p_eff = model.effective_p(p_dark_true.clamp(0.0, 1.0));
    let mut dark = 0u32;
    for _ in 0..shots {
        if rng.gen::<f64>() < p_eff {
            dark += 1;
        }
    }
    (f64::from(dark) / f64::from(shots.max(1)), dark)
}

/// Gaussian smearing of the survival map by the thermal wave packet.
#[derive(Debug, Clone, Copy)]
pub struct ThermalBlur {
    /// RMS size of the wave packet, m.
    pub rms: f64,
}

impl ThermalBlur {
    pub fn new(rms: f64) -> Result<Self> {
        if rms < 0.0 {
            return Err(Error::validation("wave packet size must be nonnegative"));
        }
        Ok(ThermalBlur { rms })
    }
}

/// Gauss-Hermite nodes and weights for `int exp(-t^2) f(t) dt`.
fn gauss_hermite_9() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = 9usize;
        let hermite = |t: f64| -> (f64, f64) {
            // Returns (H_n, H_{n-1}).
            let mut h_prev = 1.0; // H_0
            let mut h = 2.0 * t; // H_1
            for k in 1..n {
                let next = 2.0 * t * h - 2.0 * k as f64 * h_prev;
                h_prev = h;
                h = next;
            }
            (h, h_prev)
        };
        let reach = (2.0 * n as f64 + 1.0).sqrt();
        let mut roots = Vec::new();
        let grid = 20_000;
        let mut prev_t = -reach;
        let mut prev_v = hermite(prev_t).0;
        for i in 1..=grid {
            let t = -reach + 2.0 * reach * i as f64 / grid as f64;
            let v = hermite(t).0;
            if v == 0.0 {
                roots.push(t);
            } else if prev_v * v < 0.0 {
                let (mut lo, mut hi) = (prev_t, t);
                let mut vlo = prev_v;
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    let vm = hermite(mid).0;
                    if vm.signum() == vlo.signum() {
                        lo = mid;
                        vlo = vm;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            prev_t = t;
            prev_v = v;
        }
        assert_eq!(roots.len(), n, "expected {n} Hermite roots");
        // w_i = 2^(n-1) n! sqrt(pi) / (n^2 H_{n-1}(x_i)^2)
        let factorial: f64 = (1..=n).map(|k| k as f64).product();
        let coeff = 2.0_f64.powi(n as i32 - 1) * factorial * std::f64::consts::PI.sqrt()
            / (n as f64 * n as f64);
        let weights: Vec<f64> = roots.iter().map(|&r| coeff / hermite(r).1.powi(2)).collect();
        (roots, weights)
    })
}

/// Expected survival with the ion position smeared by `blur`:
/// the convolution of the survival map with a Gaussian kernel, evaluated by
/// tensor Gauss-Hermite quadrature.
pub fn blurred_survival(
    source: &SaturationSource,
    pulse: &DepletionPulse,
    phys: &DepletionPhysics,
    model: &DepletionModel,
    d: (f64, f64),
    blur: Option<ThermalBlur>,
) -> Result<f64> {
    let Some(blur) = blur.filter(|b| b.rms > 0.0) else {
        return crate::atom::survival_at(source, pulse, phys, model, d);
    };
    let (nodes, weights) = gauss_hermite_9();
    let scale = std::f64::consts::SQRT_2 * blur.rms;
    let mut acc = 0.0;
    for (ti, wi) in nodes.iter().zip(weights) {
        for (tj, wj) in nodes.iter().zip(weights) {
            let p = crate::atom::survival_at(
                source,
                pulse,
                phys,
                model,
                (d.0 - scale * ti, d.1 - scale * tj),
            )?;
            acc += wi * wj * p;
        }
    }
    Ok(acc / std::f64::consts::PI)
}

/// Bounded wandering of the donut spot relative to the ion.
///
/// The displacement advances at `speed` along a slowly diffusing heading and
/// is reflected at the radial `bound`, matching the observed drift scale of
/// a few tens of nanometres over minutes.
#[derive(Debug, Clone, Copy)]
pub struct DriftModel {
    /// Mean drift speed, m/s.
    pub speed: f64,
    /// Radial bound on the displacement, m.
    pub bound: f64,
    /// Heading diffusion, rad per sqrt(s).
    pub heading_diffusion: f64,
}

impl Default for DriftModel {
    fn default() -> Self {
        DriftModel { speed: 1.8e-9, bound: 60e-9, heading_diffusion: 0.15 }
    }
}

/// Running drift state.
#[derive(Debug, Clone, Copy)]
pub struct DriftState {
    pub offset: (f64, f64),
    heading: f64,
}

impl DriftModel {
    pub fn start(&self, rng: &mut impl Rng) -> DriftState {
        let heading = rng.gen::<f64>() * std::f64::consts::TAU;
        DriftState { offset: (0.0, 0.0), heading }
    }

    /// Advance the drift clock by `dt` seconds.
    pub fn advance(&self, state: &mut DriftState, dt: f64, rng: &mut impl Rng) {
        let dtheta: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
        state.heading += dtheta * self.heading_diffusion * dt.sqrt();
        state.offset.0 += self.speed * dt * state.heading.cos();
        state.offset.1 += self.speed * dt * state.heading.sin();
        let r = state.offset.0.hypot(state.offset.1);
        if r > self.bound {
            let reflected = (2.0 * self.bound - r).max(0.0);
            let scale = if r > 0.0 { reflected / r } else { 0.0 };
            state.offset.0 *= scale;
            state.offset.1 *= scale;
        }
    }
}

/// The emitter being imaged: static position plus optional thermal smearing
/// and slow drift.
#[derive(Debug, Clone, Copy, Default)]
pub struct IonModel {
    /// Nominal ion position, m.
    pub position: (f64, f64),
    pub blur: Option<ThermalBlur>,
    /// Sample the thermal jitter per shot instead of convolving the map.
    pub per_shot_blur: bool,
    pub drift: Option<DriftModel>,
}

/// Scan-grid and timing parameters of one super-resolved image.
#[derive(Debug, Clone, Copy)]
pub struct ImagingConfig {
    /// Scan points per axis.
    pub points: usize,
    /// Scan pitch, m.
    pub pitch: f64,
    /// Readout repetitions per pixel.
    pub shots: u32,
    /// Doppler cooling time per shot, s.
    pub cooling_time: f64,
    /// Optical pumping time per shot, s.
    pub pump_time: f64,
    /// State detection time per shot, s.
    pub detect_time: f64,
    /// Record exact probabilities instead of sampled shot statistics.
    pub exact_probabilities: bool,
    pub seed: u64,
    pub exec: Exec,
}

impl ImagingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::validation("scan needs at least 2 points per axis"));
        }
        if !(self.pitch > 0.0) {
            return Err(Error::validation("scan pitch must be positive"));
        }
        if self.shots < 1 {
            return Err(Error::validation("shots must be at least 1"));
        }
        Ok(())
    }

    /// Scan grid centred on the origin.
    pub fn grid(&self) -> GridSpec {
        GridSpec::centered(self.points, self.points, self.pitch)
            .expect("validated scan grid")
    }

    /// Wall-clock time spent on one pixel, s.
    pub fn pixel_dwell(&self, pulse_duration: f64) -> f64 {
        f64::from(self.shots)
            * (self.cooling_time + self.pump_time + pulse_duration + self.detect_time)
    }
}

impl Default for ImagingConfig {
    fn default() -> Self {
        // 21 x 21 points, 100 shots; cooling 1 ms, pumping 50 us and a
        // detection window sized so one pixel takes the observed 0.16 s.
        ImagingConfig {
            points: 21,
            pitch: 50e-9,
            shots: 100,
            cooling_time: 1e-3,
            pump_time: 50e-6,
            detect_time: 0.55e-3,
            exact_probabilities: false,
            seed: 42,
            exec: Exec::Auto,
        }
    }
}

/// Provenance and bookkeeping attached to every image.
#[derive(Debug, Clone)]
pub struct ImageMeta {
    pub seed: u64,
    pub config_digest: u64,
    /// "parallel", "sequential" or "sequential (drift clock)".
    pub exec_mode: String,
    /// Set when the scan area does not cover the ion by a 3-pitch margin.
    pub coverage_warning: bool,
    pub exact: bool,
}

/// Estimated dark-state probabilities over the scan grid.
#[derive(Debug, Clone)]
pub struct ScanImage {
    pub grid: GridSpec,
    /// Probability estimates indexed `[iy, ix]`.
    pub probabilities: Array2<f64>,
    /// Raw dark counts (absent in exact mode).
    pub dark_counts: Option<Array2<u32>>,
    pub shots: u32,
    pub meta: ImageMeta,
}

fn config_digest(cfg: &ImagingConfig, pulse: &DepletionPulse) -> u64 {
    fnv1a(&format!(
        "{} {:e} {} {:e} {:e} {:e} {} {:e} {:e}",
        cfg.points,
        cfg.pitch,
        cfg.shots,
        cfg.cooling_time,
        cfg.pump_time,
        cfg.detect_time,
        cfg.exact_probabilities,
        pulse.s,
        pulse.duration,
    ))
}

/// Measure one pixel: survival -> thermal smearing -> shot readout.
#[allow(clippy::too_many_arguments)]
fn measure_pixel(
    cfg: &ImagingConfig,
    source: &SaturationSource,
    pulse: &DepletionPulse,
    phys: &DepletionPhysics,
    model: &DepletionModel,
    readout: &ReadoutModel,
    ion: &IonModel,
    ion_offset: (f64, f64),
    displacement: (f64, f64),
    rng: &mut impl Rng,
) -> Result<(f64, Option<u32>)> {
    let d = (displacement.0 - ion_offset.0, displacement.1 - ion_offset.1);
    if cfg.exact_probabilities {
        let p = blurred_survival(source, pulse, phys, model, d, ion.blur)?;
        return Ok((p, None));
    }
    if ion.per_shot_blur && ion.blur.map_or(false, |b| b.rms > 0.0) {
        let rms = ion.blur.unwrap().rms;
        let mut dark = 0u32;
        for _ in 0..cfg.shots {
            let jx: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
            let jy: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
            let p = crate::atom::survival_at(
                source,
                pulse,
                phys,
                model,
                (d.0 - rms * jx, d.1 - rms * jy),
            )?;
            if rng.gen::<f64>() < readout.effective_p(p) {
                dark += 1;
            }
        }
        return Ok((f64::from(dark) / f64::from(cfg.shots), Some(dark)));
    }
    let p = blurred_survival(source, pulse, phys, model, d, ion.blur)?;
    let (estimate, dark) = readout_sample(p, cfg.shots, readout, rng);
    Ok((estimate, Some(dark)))
}

/// Scan the donut over the grid and return the estimated dark-state image.
///
/// `rng_stream` separates the RNG streams of successive images of one run
/// (delay index in motion mode).
#[allow(clippy::too_many_arguments)]
pub fn run_scan(
    cfg: &ImagingConfig,
    source: &SaturationSource,
    pulse: &DepletionPulse,
    phys: &DepletionPhysics,
    model: &DepletionModel,
    readout: &ReadoutModel,
    ion: &IonModel,
    rng_stream: u64,
) -> Result<ScanImage> {
    cfg.validate()?;
    let grid = cfg.grid();
    let (x0, x1, y0, y1) = grid.extent();
    let margin = 3.0 * cfg.pitch;
    let coverage_warning = ion.position.0 - margin < x0
        || ion.position.0 + margin > x1
        || ion.position.1 - margin < y0
        || ion.position.1 + margin > y1;

    let n = cfg.points;
    let values: Vec<Result<(f64, Option<u32>)>> = if let Some(drift) = ion.drift {
        // Drift imposes a sequential pixel clock.
        let mut drift_rng = stream_rng(cfg.seed, rng_stream, u64::MAX);
        let mut state = drift.start(&mut drift_rng);
        let dwell = cfg.pixel_dwell(pulse.duration);
        let mut out = Vec::with_capacity(n * n);
        for idx in 0..n * n {
            let (iy, ix) = (idx / n, idx % n);
            let mut rng = stream_rng(cfg.seed, rng_stream, idx as u64);
            let ion_now =
                (ion.position.0 + state.offset.0, ion.position.1 + state.offset.1);
            out.push(measure_pixel(
                cfg,
                source,
                pulse,
                phys,
                model,
                readout,
                ion,
                ion_now,
                (grid.x(ix), grid.y(iy)),
                &mut rng,
            ));
            drift.advance(&mut state, dwell, &mut drift_rng);
        }
        out
    } else {
        exec::map_indexed(cfg.exec, n * n, |idx| {
            let (iy, ix) = (idx / n, idx % n);
            let mut rng = stream_rng(cfg.seed, rng_stream, idx as u64);
            measure_pixel(
                cfg,
                source,
                pulse,
                phys,
                model,
                readout,
                ion,
                ion.position,
                (grid.x(ix), grid.y(iy)),
                &mut rng,
            )
        })
    };

    let mut probabilities = Array2::zeros((n, n));
    let mut counts = Array2::zeros((n, n));
    for (idx, v) in values.into_iter().enumerate() {
        let (p, c) = v?;
        probabilities[(idx / n, idx % n)] = p;
        counts[(idx / n, idx % n)] = c.unwrap_or(0);
    }
    let exec_mode = if ion.drift.is_some() {
        "sequential (drift clock)".to_string()
    } else {
        cfg.exec.mode_name().to_string()
    };
    Ok(ScanImage {
        grid,
        probabilities,
        dark_counts: (!cfg.exact_probabilities).then_some(counts),
        shots: cfg.shots,
        meta: ImageMeta {
            seed: cfg.seed,
            config_digest: config_digest(cfg, pulse),
            exec_mode,
            coverage_warning,
            exact: cfg.exact_probabilities,
        },
    })
}

/// Convenience wrapper for a single static-ion image.
pub fn run_imaging(
    cfg: &ImagingConfig,
    source: &SaturationSource,
    pulse: &DepletionPulse,
    phys: &DepletionPhysics,
    model: &DepletionModel,
    readout: &ReadoutModel,
    ion: &IonModel,
) -> Result<ScanImage> {
    run_scan(cfg, source, pulse, phys, model, readout, ion, 0)
}

/// Steady-state oscillation amplitude after a driving pulse
/// `F_d sin(omega_d t)` of duration `t_d`, m.
///
/// `A = 2 F_d / (m (omega_y^2 - omega_d^2)) sin[(omega_y - omega_d) t_d / 2]`,
/// with the resonant limit `A = F_d t_d / (2 m omega_y)` taken when
/// `|omega_d - omega_y| t_d < 1e-6`.
pub fn drive_amplitude(f_d: f64, omega_d: f64, omega_y: f64, t_d: f64, mass: f64) -> Result<f64> {
    if !(mass > 0.0) {
        return Err(Error::validation("mass must be positive"));
    }
    let detuning = omega_y - omega_d;
    if (detuning * t_d).abs() < 1e-6 {
        Ok(f_d * t_d / (2.0 * mass * omega_y))
    } else {
        Ok(2.0 * f_d / (mass * (omega_y * omega_y - omega_d * omega_d))
            * (detuning * t_d / 2.0).sin())
    }
}

/// Parameters of the stroboscopic motion-detection sequence.
#[derive(Debug, Clone, Copy)]
pub struct MotionConfig {
    /// Secular frequency of the driven mode, rad/s.
    pub omega_y: f64,
    /// Resonant drive length in motion cycles.
    pub drive_cycles: u32,
    /// Drive force amplitude, N.
    pub drive_force: f64,
    /// Ion mass, kg.
    pub mass: f64,
    /// Delay samples per motion period.
    pub delays_per_period: usize,
    /// Observed motion periods.
    pub periods: usize,
    /// Oscillation phase at the end of the drive, rad.
    pub phase0: f64,
    /// Scan grid for each snapshot.
    pub imaging: ImagingConfig,
}

impl MotionConfig {
    pub fn validate(&self, pulse: &DepletionPulse) -> Result<()> {
        self.imaging.validate()?;
        if self.delays_per_period < 2 || self.periods < 1 {
            return Err(Error::validation("need at least 2 delays over 1 period"));
        }
        if self.periods > 2 {
            return Err(Error::validation("delays must stay within two motion periods"));
        }
        let period = std::f64::consts::TAU / self.omega_y;
        if pulse.duration >= period / 4.0 {
            return Err(Error::configuration(
                "depletion pulse too long for a motion snapshot (t_D >= T/4)",
            ));
        }
        Ok(())
    }

    /// Motion period, s.
    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.omega_y
    }

    /// Drive duration `cycles * T`, s.
    pub fn drive_duration(&self) -> f64 {
        f64::from(self.drive_cycles) * self.period()
    }

    /// Resonantly driven oscillation amplitude, m.
    pub fn amplitude(&self) -> Result<f64> {
        drive_amplitude(
            self.drive_force,
            self.omega_y,
            self.omega_y,
            self.drive_duration(),
            self.mass,
        )
    }

    /// Snapshot delays, s.
    pub fn delays(&self) -> Vec<f64> {
        let period = self.period();
        (0..self.delays_per_period * self.periods)
            .map(|k| k as f64 * period / self.delays_per_period as f64)
            .collect()
    }
}

impl Default for MotionConfig {
    fn default() -> Self {
        MotionConfig {
            omega_y: crate::constants::OMEGA_Y,
            drive_cycles: 100,
            drive_force: 6.9e-21,
            mass: crate::constants::YB_MASS,
            delays_per_period: 10,
            periods: 1,
            phase0: 0.0,
            imaging: ImagingConfig {
                points: 10,
                pitch: 1.25e-6 / 9.0,
                ..ImagingConfig::default()
            },
        }
    }
}

/// Run the three-layer motion sequence: one scan image per delay.
///
/// The ion position at the snapshot is
/// `centre + (0, A cos(omega_y t + phase0))`; the drive phase is fixed, so
/// repeated shots see the same position.
#[allow(clippy::too_many_arguments)]
pub fn run_motion(
    cfg: &MotionConfig,
    source: &SaturationSource,
    pulse: &DepletionPulse,
    phys: &DepletionPhysics,
    model: &DepletionModel,
    readout: &ReadoutModel,
    centre: (f64, f64),
    blur: Option<ThermalBlur>,
) -> Result<Vec<(f64, ScanImage)>> {
    cfg.validate(pulse)?;
    let amplitude = cfg.amplitude()?;
    let mut out = Vec::new();
    for (k, t_k) in cfg.delays().into_iter().enumerate() {
        let y = amplitude * (cfg.omega_y * t_k + cfg.phase0).cos();
        let ion = IonModel {
            position: (centre.0, centre.1 + y),
            blur,
            per_shot_blur: false,
            drift: None,
        };
        let image = run_scan(
            &cfg.imaging,
            source,
            pulse,
            phys,
            model,
            readout,
            &ion,
            1 + k as u64,
        )?;
        out.push((t_k, image));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::DepletionTable;
    use crate::optics::BeamProfile;
    use approx::assert_relative_eq;

    #[test]
    fn readout_without_error_is_exact_at_extremes() {
        let model = ReadoutModel::new(0.0).unwrap();
        let mut rng = stream_rng(1, 0, 0);
        let (p, dark) = readout_sample(1.0, 50, &model, &mut rng);
        assert_eq!(p, 1.0);
        assert_eq!(dark, 50);
    }

    #[test]
    fn readout_error_shifts_the_mean() {
        let model = ReadoutModel::new(0.05).unwrap();
        let mut acc = 0.0;
        for rep in 0..1000 {
            let mut rng = stream_rng(7, 3, rep);
            acc += readout_sample(1.0, 100, &model, &mut rng).0;
        }
        let mean = acc / 1000.0;
        assert!((0.945..=0.955).contains(&mean), "mean = {mean}");
    }

    #[test]
    fn half_probability_is_a_fixed_point_of_readout_error() {
        for dp in [0.0, 0.05, 0.3] {
            let model = ReadoutModel::new(dp).unwrap();
            assert_relative_eq!(model.effective_p(0.5), 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn blur_preserves_a_constant_map() {
        let profile = BeamProfile::ideal(1.41e-6, 0.0); // zero intensity
        let phys = DepletionPhysics::ideal_yb();
        let pulse = DepletionPulse::rectangular(0.0, 1e-6).unwrap();
        let p = blurred_survival(
            &SaturationSource::Profile(&profile),
            &pulse,
            &phys,
            &DepletionModel::Rate,
            (0.3e-6, -0.2e-6),
            Some(ThermalBlur::new(20e-9).unwrap()),
        )
        .unwrap();
        assert_relative_eq!(p, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn ideal_centre_pixel_is_fully_dark() {
        let profile = BeamProfile::ideal(1.41e-6, 14.0);
        let phys = DepletionPhysics::ideal_yb();
        let pulse = DepletionPulse::rectangular(14.0, 7e-6).unwrap();
        let cfg = ImagingConfig {
            points: 11,
            pitch: 100e-9,
            exact_probabilities: true,
            ..ImagingConfig::default()
        };
        let readout = ReadoutModel::new(0.0).unwrap();
        let img = run_imaging(
            &cfg,
            &SaturationSource::Profile(&profile),
            &pulse,
            &phys,
            &DepletionModel::Rate,
            &readout,
            &IonModel::default(),
        )
        .unwrap();
        // Ion on the central grid point: survival there is exp(0) = 1.
        assert_relative_eq!(img.probabilities[(5, 5)], 1.0, epsilon = 1e-12);
        let max = img.probabilities.iter().cloned().fold(0.0, f64::max);
        assert_relative_eq!(max, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn images_are_deterministic_and_quantized() {
        let profile = BeamProfile::with_extinction_ratio(1.41e-6, 14.0, 26.0, 2.34e-6).unwrap();
        let phys = DepletionPhysics::ideal_yb().with_k(6.5e5);
        let pulse = DepletionPulse::rectangular(14.0, 7e-6).unwrap();
        let cfg = ImagingConfig { points: 9, pitch: 60e-9, seed: 99, ..ImagingConfig::default() };
        let readout = ReadoutModel::new(0.05).unwrap();
        let ion = IonModel { position: (20e-9, -35e-9), ..IonModel::default() };
        let src = SaturationSource::Profile(&profile);
        let a = run_imaging(&cfg, &src, &pulse, &phys, &DepletionModel::Rate, &readout, &ion)
            .unwrap();
        let b = run_imaging(&cfg, &src, &pulse, &phys, &DepletionModel::Rate, &readout, &ion)
            .unwrap();
        assert_eq!(a.probabilities, b.probabilities);
        // Sequential execution reproduces the parallel image bit for bit.
        let cfg_seq = ImagingConfig { exec: Exec::Sequential, ..cfg };
        let c = run_imaging(&cfg_seq, &src, &pulse, &phys, &DepletionModel::Rate, &readout, &ion)
            .unwrap();
        assert_eq!(a.probabilities, c.probabilities);
        // Every value sits on the shot lattice {0, 1/shots, ..., 1}.
        for (&p, &c) in a.probabilities.iter().zip(a.dark_counts.as_ref().unwrap()) {
            assert_eq!(p, f64::from(c) / f64::from(cfg.shots));
        }
    }

    #[test]
    fn snapshot_depends_only_on_the_saturation_time_product() {
        // Rate-mode exact images are unchanged when t_D halves and s_max
        // doubles.
        let phys = DepletionPhysics::ideal_yb().with_k(6.5e5);
        let readout = ReadoutModel::new(0.0).unwrap();
        let cfg = ImagingConfig {
            points: 7,
            pitch: 80e-9,
            exact_probabilities: true,
            ..ImagingConfig::default()
        };
        let p1 = BeamProfile::ideal(1.41e-6, 14.0);
        let pulse1 = DepletionPulse::rectangular(14.0, 7e-6).unwrap();
        let p2 = BeamProfile::ideal(1.41e-6, 28.0);
        let pulse2 = DepletionPulse::rectangular(28.0, 3.5e-6).unwrap();
        let ion = IonModel::default();
        let a = run_imaging(
            &cfg,
            &SaturationSource::Profile(&p1),
            &pulse1,
            &phys,
            &DepletionModel::Rate,
            &readout,
            &ion,
        )
        .unwrap();
        let b = run_imaging(
            &cfg,
            &SaturationSource::Profile(&p2),
            &pulse2,
            &phys,
            &DepletionModel::Rate,
            &readout,
            &ion,
        )
        .unwrap();
        for (x, y) in a.probabilities.iter().zip(b.probabilities.iter()) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn coverage_warning_raised_when_ion_is_off_grid() {
        let profile = BeamProfile::ideal(1.41e-6, 1.0);
        let phys = DepletionPhysics::ideal_yb();
        let pulse = DepletionPulse::rectangular(1.0, 1e-6).unwrap();
        let cfg = ImagingConfig {
            points: 5,
            pitch: 50e-9,
            exact_probabilities: true,
            ..ImagingConfig::default()
        };
        let readout = ReadoutModel::new(0.05).unwrap();
        let ion = IonModel { position: (2e-6, 0.0), ..IonModel::default() };
        let img = run_imaging(
            &cfg,
            &SaturationSource::Profile(&profile),
            &pulse,
            &phys,
            &DepletionModel::Rate,
            &readout,
            &ion,
        )
        .unwrap();
        assert!(img.meta.coverage_warning);
    }

    #[test]
    fn drift_stays_within_bound() {
        let model = DriftModel::default();
        let mut rng = stream_rng(5, 0, 0);
        let mut state = model.start(&mut rng);
        for _ in 0..1000 {
            model.advance(&mut state, 0.16, &mut rng);
            let r = state.offset.0.hypot(state.offset.1);
            assert!(r <= model.bound + 1e-15);
        }
    }

    #[test]
    fn drive_amplitude_basics() {
        use crate::constants::{OMEGA_Y, YB_MASS};
        // Zero force, zero amplitude.
        assert_eq!(drive_amplitude(0.0, OMEGA_Y, OMEGA_Y, 73.5e-6, YB_MASS).unwrap(), 0.0);
        // Resonant value for the measured drive parameters.
        let a = drive_amplitude(6.9e-21, OMEGA_Y, OMEGA_Y, 73.5e-6, YB_MASS).unwrap();
        assert!((a - 104.5e-9).abs() < 0.5e-9, "A = {a:.4e}");
        // The general branch converges to the resonant limit.
        let nearly = OMEGA_Y * (1.0 + 1e-9);
        let b = drive_amplitude(6.9e-21, nearly, OMEGA_Y, 73.5e-6, YB_MASS).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-3);
        // Linearity in the driving force.
        let a2 = drive_amplitude(2.0 * 6.9e-21, OMEGA_Y, OMEGA_Y, 73.5e-6, YB_MASS).unwrap();
        assert_relative_eq!(a2, 2.0 * a, epsilon = 1e-18);
        // A full-cycle detuning null.
        let t_d = 73.5e-6;
        let det = std::f64::consts::TAU / t_d;
        let null = drive_amplitude(6.9e-21, OMEGA_Y - det, OMEGA_Y, t_d, YB_MASS).unwrap();
        assert!(null.abs() < 1e-15);
        assert!(drive_amplitude(1e-21, OMEGA_Y, OMEGA_Y, 1e-6, 0.0).is_err());
    }

    #[test]
    fn motion_run_produces_one_image_per_delay() {
        let cfg = MotionConfig {
            imaging: ImagingConfig {
                points: 6,
                pitch: 1.25e-6 / 5.0,
                shots: 20,
                ..ImagingConfig::default()
            },
            delays_per_period: 4,
            ..MotionConfig::default()
        };
        let pulse = DepletionPulse::rectangular(450.0, 50e-9).unwrap();
        let phys = DepletionPhysics::ideal_yb().with_efficiency(0.02);
        let table = DepletionTable::build(&pulse, 12.0, Exec::Auto).unwrap();
        let profile = BeamProfile::ideal(1.41e-6, 450.0);
        let readout = ReadoutModel::new(0.05).unwrap();
        let out = run_motion(
            &cfg,
            &SaturationSource::Profile(&profile),
            &pulse,
            &phys,
            &DepletionModel::Master(&table),
            &readout,
            (0.0, 0.0),
            None,
        )
        .unwrap();
        assert_eq!(out.len(), 4);
        assert_relative_eq!(out[1].0, cfg.period() / 4.0, epsilon = 1e-15);
        // Delay images use distinct RNG streams.
        assert_ne!(out[0].1.probabilities, out[1].1.probabilities);
    }

    #[test]
    fn long_pulse_violates_snapshot_assumption() {
        let cfg = MotionConfig::default();
        let pulse = DepletionPulse::rectangular(450.0, 200e-9).unwrap();
        assert!(cfg.validate(&pulse).is_err());
    }
}
