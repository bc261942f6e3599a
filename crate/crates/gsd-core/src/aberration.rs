//! Pupil-phase sensing with the ion as the detector.
//!
//! Two mirror patches diffract beams that interfere at the focal point; the
//! sample patch's carrier is stepped through three phases and the patch
//! phase relative to the reference follows from the three intensities. The
//! scanned patch map is unwrapped (Itoh, row then columns), interpolated to
//! mirror resolution, and subtracted from the ideal phase to build the
//! compensation pattern.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::hologram::{carrier_bit, first_order_field, sensing_pattern, PatchSpec};
use crate::optics::{focus, ComplexField, GridSpec, OpticalSystem};
use crate::rng::stream_rng;
use rand::Rng;

/// Wrap a phase into (-pi, pi].
pub fn wrap_phase(phi: f64) -> f64 {
    let mut w = phi.rem_euclid(std::f64::consts::TAU);
    if w > std::f64::consts::PI {
        w -= std::f64::consts::TAU;
    }
    w
}

/// Wrapped or unwrapped 2D phase samples (patch grid or per pixel).
#[derive(Debug, Clone)]
pub struct PhaseMap {
    /// Phase values in radians, indexed `[iy, ix]`.
    pub values: Array2<f64>,
    /// Whether values are confined to (-pi, pi].
    pub wrapped: bool,
    /// Pixels where sensing failed (zero fringe visibility).
    pub flagged: Vec<(usize, usize)>,
}

impl PhaseMap {
    pub fn new(values: Array2<f64>, wrapped: bool) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("phase map contains non-finite values"));
        }
        if wrapped {
            let eps = 1e-9;
            if values
                .iter()
                .any(|&v| v <= -std::f64::consts::PI - eps || v > std::f64::consts::PI + eps)
            {
                return Err(Error::validation("wrapped phase outside (-pi, pi]"));
            }
        }
        Ok(PhaseMap { values, wrapped, flagged: Vec::new() })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dim()
    }

    /// Wrap every value into (-pi, pi].
    pub fn wrap(&self) -> PhaseMap {
        PhaseMap {
            values: self.values.mapv(wrap_phase),
            wrapped: true,
            flagged: self.flagged.clone(),
        }
    }

    /// Serialize in the shared text-matrix format (`nx ny pitch` header,
    /// one float per cell). The pitch records the sample spacing in
    /// mirrors or metres as chosen by the caller.
    pub fn to_text(&self, pitch: f64) -> String {
        use std::fmt::Write as _;
        let (ny, nx) = self.values.dim();
        let mut out = String::new();
        let _ = writeln!(out, "{nx} {ny} {pitch:e}");
        for row in self.values.rows() {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(' ');
                }
                let _ = write!(out, "{v:e}");
                first = false;
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (grid, cells) = crate::optics::parse_matrix_cells(text)?;
        let mut values = Array2::zeros((grid.ny, grid.nx));
        for (idx, cell) in cells.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::format(format!("cell {idx}: bad float {cell:?}")))?;
            values[(idx / grid.nx, idx % grid.nx)] = v;
        }
        PhaseMap::new(values, false)
    }
}

/// Geometry of the patch-scanning phase measurement.
#[derive(Debug, Clone, Copy)]
pub struct SensingConfig {
    /// Active mirror region (square), mirrors per side.
    pub region: usize,
    /// Patch side length, mirrors.
    pub patch: usize,
    /// Carrier grating period, mirrors.
    pub period: usize,
    /// Mirror pitch, m.
    pub mirror_pitch: f64,
    pub exec: Exec,
}

impl Default for SensingConfig {
    fn default() -> Self {
        SensingConfig {
            region: crate::constants::DMD_REGION,
            patch: 20,
            period: crate::constants::GRATING_PERIOD,
            mirror_pitch: crate::constants::MIRROR_PITCH,
            exec: Exec::Auto,
        }
    }
}

impl SensingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch < self.period {
            return Err(Error::validation("patch must span at least one carrier fringe"));
        }
        if self.region % self.patch != 0 {
            return Err(Error::validation("patch size must tile the active region"));
        }
        Ok(())
    }

    /// Patches per side.
    pub fn patches(&self) -> usize {
        self.region / self.patch
    }

    /// Index of the central reference patch.
    pub fn reference_index(&self) -> (usize, usize) {
        let p = self.patches();
        (p / 2, p / 2)
    }

    /// The three-step phase shifts.
    pub fn shifts(&self) -> [f64; 3] {
        [0.0, std::f64::consts::TAU / 3.0, 2.0 * std::f64::consts::TAU / 3.0]
    }
}

/// Recover `phi` from three intensities under the model
/// `m_k = A + B cos(phi - delta_k)` with `delta_k in {0, 2pi/3, 4pi/3}`.
pub fn three_step_phase(m0: f64, m1: f64, m2: f64) -> Result<f64> {
    if m0 < 0.0 || m1 < 0.0 || m2 < 0.0 {
        return Err(Error::validation("intensities must be nonnegative"));
    }
    let scale = m0.abs().max(m1.abs()).max(m2.abs());
    if scale == 0.0
        || ((m0 - m1).abs() < 1e-13 * scale && (m1 - m2).abs() < 1e-13 * scale)
    {
        return Err(Error::analysis("zero fringe visibility; phase undefined"));
    }
    Ok((3.0_f64.sqrt() * (m1 - m2)).atan2(2.0 * m0 - m1 - m2))
}

/// Complex patch response: carrier-demodulated sum of the incident phasor
/// over one patch's on mirrors.
fn patch_phasor(
    hidden: &Array2<f64>,
    cfg: &SensingConfig,
    patch_origin: (usize, usize),
    carrier_phase: f64,
) -> Complex64 {
    let mut acc = Complex64::default();
    for dy in 0..cfg.patch {
        let y = patch_origin.1 + dy;
        for dx in 0..cfg.patch {
            let x = patch_origin.0 + dx;
            if carrier_bit(x, cfg.period, carrier_phase, 0.5) {
                let arg = hidden[(y, x)]
                    - std::f64::consts::TAU * x as f64 / cfg.period as f64;
                acc += Complex64::from_polar(1.0, arg);
            }
        }
    }
    acc
}

/// Raw three-step measurement of every patch relative to the central
/// reference patch.
///
/// `hidden` is the per-pixel pupil phase the instrument is trying to find
/// (dimensions must match the active region). Returns the wrapped patch
/// map; patches with vanishing fringe visibility are flagged and set to 0.
///
/// The binary carrier couples the patch's other diffraction harmonics into
/// the measurement, which biases the recovery wherever the pupil phase has
/// a within-patch slope; [`scan_phase_map`] removes that systematic.
pub fn scan_phase_map_raw(hidden: &PhaseMap, cfg: &SensingConfig) -> Result<PhaseMap> {
    cfg.validate()?;
    let (ny, nx) = hidden.dims();
    if ny != cfg.region || nx != cfg.region {
        return Err(Error::validation(format!(
            "hidden aberration is {nx}x{ny}, active region is {0}x{0}",
            cfg.region
        )));
    }
    let patches = cfg.patches();
    let reference = cfg.reference_index();
    let ref_origin = (reference.0 * cfg.patch, reference.1 * cfg.patch);
    let w_ref = patch_phasor(&hidden.values, cfg, ref_origin, 0.0);
    let shifts = cfg.shifts();

    let results = exec::map_indexed(cfg.exec, patches * patches, |idx| {
        let (pj, pi) = (idx / patches, idx % patches);
        if (pi, pj) == reference {
            return (0.0, false);
        }
        let origin = (pi * cfg.patch, pj * cfg.patch);
        let mut m = [0.0_f64; 3];
        for (k, &shift) in shifts.iter().enumerate() {
            let w_s = patch_phasor(&hidden.values, cfg, origin, shift);
            m[k] = (w_ref + w_s).norm_sqr();
        }
        match three_step_phase(m[0], m[1], m[2]) {
            // The shifted-carrier model is m_k = A + B cos(psi + delta_k),
            // so the estimator returns -psi; negate to report the patch
            // phase relative to the reference.
            Ok(phi) => (wrap_phase(-phi), false),
            Err(_) => (0.0, true),
        }
    });

    let mut values = Array2::zeros((patches, patches));
    let mut flagged = Vec::new();
    for (idx, (phi, flag)) in results.into_iter().enumerate() {
        let (pj, pi) = (idx / patches, idx % patches);
        values[(pj, pi)] = phi;
        if flag {
            flagged.push((pj, pi));
        }
    }
    let mut map = PhaseMap::new(values, true)?;
    map.flagged = flagged;
    Ok(map)
}

/// Demodulated phasor of a locally-linear patch model
/// `mean + sx (x - cx) + sy (y - cy)` at the given carrier shift.
fn linear_patch_phasor(
    cfg: &SensingConfig,
    origin: (usize, usize),
    mean: f64,
    slopes: (f64, f64),
    shift: f64,
) -> Complex64 {
    let cx = origin.0 as f64 + (cfg.patch as f64 - 1.0) / 2.0;
    let cy = origin.1 as f64 + (cfg.patch as f64 - 1.0) / 2.0;
    let mut acc = Complex64::default();
    for dy in 0..cfg.patch {
        let y = origin.1 + dy;
        for dx in 0..cfg.patch {
            let x = origin.0 + dx;
            if carrier_bit(x, cfg.period, shift, 0.5) {
                let h = mean + slopes.0 * (x as f64 - cx) + slopes.1 * (y as f64 - cy);
                let arg = h - std::f64::consts::TAU * x as f64 / cfg.period as f64;
                acc += Complex64::from_polar(1.0, arg);
            }
        }
    }
    acc
}

/// Predicted three-step recovery error for a sample patch with local phase
/// `mean` and gradient `slopes` (rad per mirror), against a reference patch
/// with gradient `ref_slopes`. The model's true relative phase is `mean`,
/// so the difference between recovery and `mean` is the measurement bias.
#[allow(clippy::too_many_arguments)]
fn linear_patch_bias(
    cfg: &SensingConfig,
    origin: (usize, usize),
    mean: f64,
    slopes: (f64, f64),
    ref_origin: (usize, usize),
    ref_slopes: (f64, f64),
) -> f64 {
    let w_ref = linear_patch_phasor(cfg, ref_origin, 0.0, ref_slopes, 0.0);
    let mut m = [0.0_f64; 3];
    for (k, &shift) in cfg.shifts().iter().enumerate() {
        let w_s = linear_patch_phasor(cfg, origin, mean, slopes, shift);
        m[k] = (w_ref + w_s).norm_sqr();
    }
    match three_step_phase(m[0], m[1], m[2]) {
        Ok(phi) => wrap_phase(wrap_phase(-phi) - mean),
        Err(_) => 0.0,
    }
}

/// Measure the patch phase map and remove the slope-dependent systematic of
/// the binary carrier.
///
/// A first raw scan estimates the local phase gradient; for each patch the
/// bias of an ideal locally-linear pupil with that gradient is computed
/// through the same measurement model and subtracted. The correction is
/// exact for a tilted pupil and leaves only curvature-order residuals on
/// smooth maps.
pub fn scan_phase_map(hidden: &PhaseMap, cfg: &SensingConfig) -> Result<PhaseMap> {
    let raw = scan_phase_map_raw(hidden, cfg)?;
    let patches = cfg.patches();
    let reference = cfg.reference_index();
    let step = cfg.patch as f64;

    // Neighbourhood-averaged finite-difference gradient of an unwrapped
    // patch map, rad per mirror.
    let slopes_of = |u: &Array2<f64>| -> Array2<(f64, f64)> {
        Array2::from_shape_fn((patches, patches), |(pj, pi)| {
            let mut sx = 0.0;
            let mut nx = 0.0;
            for jj in pj.saturating_sub(1)..(pj + 2).min(patches) {
                if pi > 0 {
                    sx += u[(jj, pi)] - u[(jj, pi - 1)];
                    nx += 1.0;
                }
                if pi + 1 < patches {
                    sx += u[(jj, pi + 1)] - u[(jj, pi)];
                    nx += 1.0;
                }
            }
            let mut sy = 0.0;
            let mut ny = 0.0;
            for ii in pi.saturating_sub(1)..(pi + 2).min(patches) {
                if pj > 0 {
                    sy += u[(pj, ii)] - u[(pj - 1, ii)];
                    ny += 1.0;
                }
                if pj + 1 < patches {
                    sy += u[(pj + 1, ii)] - u[(pj, ii)];
                    ny += 1.0;
                }
            }
            (sx / (nx * step), sy / (ny * step))
        })
    };

    let ref_origin = (reference.0 * cfg.patch, reference.1 * cfg.patch);
    let mut current = raw.clone();
    for _pass in 0..3 {
        let (unwrapped, _) = unwrap_2d(&current)?;
        let slopes = slopes_of(&unwrapped.values);
        let ref_slopes = slopes[(reference.1, reference.0)];

        let corrected = exec::map_indexed(cfg.exec, patches * patches, |idx| {
            let (pj, pi) = (idx / patches, idx % patches);
            let raw_value = raw.values[(pj, pi)];
            if (pi, pj) == reference || raw.flagged.contains(&(pj, pi)) {
                return raw_value;
            }
            let origin = (pi * cfg.patch, pj * cfg.patch);
            // The bias depends on the patch phase itself, so refine to a
            // fixed point (the contraction ratio is well below one).
            let mut estimate = raw_value;
            for _ in 0..12 {
                let bias = linear_patch_bias(
                    cfg,
                    origin,
                    estimate,
                    slopes[(pj, pi)],
                    ref_origin,
                    ref_slopes,
                );
                let next = wrap_phase(raw_value - bias);
                let delta = wrap_phase(next - estimate).abs();
                estimate = next;
                if delta < 1e-5 {
                    break;
                }
            }
            estimate
        });

        let mut values = Array2::zeros((patches, patches));
        for (idx, v) in corrected.into_iter().enumerate() {
            values[(idx / patches, idx % patches)] = v;
        }
        current = PhaseMap::new(values, true)?;
        current.flagged = raw.flagged.clone();
    }
    Ok(current)
}

/// Literal interferometric measurement of one patch through the full
/// hologram / first-order / focusing chain: the detected intensity at the
/// focal origin. `scan_phase_map` computes the same quantity analytically;
/// the two are checked against each other in the tests.
pub fn measure_patch_full_chain(
    hidden: &PhaseMap,
    cfg: &SensingConfig,
    sys: &OpticalSystem,
    sample_patch: (usize, usize),
    shift: f64,
) -> Result<f64> {
    let reference = cfg.reference_index();
    let refp = PatchSpec::new(
        (reference.0 * cfg.patch, reference.1 * cfg.patch),
        (cfg.patch, cfg.patch),
        0.0,
    );
    let samp = PatchSpec::new(
        (sample_patch.0 * cfg.patch, sample_patch.1 * cfg.patch),
        (cfg.patch, cfg.patch),
        0.0,
    );
    let holo = sensing_pattern(
        &refp,
        &samp,
        shift,
        cfg.region,
        cfg.region,
        cfg.period,
        cfg.mirror_pitch,
    )?;
    let grid = GridSpec::centered(cfg.region, cfg.region, cfg.mirror_pitch)?;
    let incident = ComplexField::new(
        grid,
        Array2::from_shape_fn((cfg.region, cfg.region), |(y, x)| {
            Complex64::from_polar(1.0, hidden.values[(y, x)])
        }),
    )?;
    let pupil = first_order_field(&holo, &incident, 0.4 / cfg.period as f64)?;
    let focal_grid = GridSpec::centered(9, 9, sys.nyquist_focal_pitch() * 0.5)?;
    let focal = focus(&pupil, sys, &focal_grid)?;
    focal.intensity_at((0.0, 0.0))
}

/// Itoh unwrapping: integrate wrapped differences along the first row, then
/// down every column. Flagged pixels are inpainted from their neighbours
/// first. Returns the unwrapped map together with the residue count
/// diagnostic (nonzero circulation plaquettes in the input).
pub fn unwrap_2d(wrapped: &PhaseMap) -> Result<(PhaseMap, usize)> {
    if !wrapped.wrapped {
        return Err(Error::validation("unwrap expects a wrapped phase map"));
    }
    let (ny, nx) = wrapped.dims();
    let mut work = wrapped.values.clone();

    // Inpaint flagged pixels by iterative neighbour averaging of phasors.
    if !wrapped.flagged.is_empty() {
        let mut bad: std::collections::HashSet<(usize, usize)> =
            wrapped.flagged.iter().cloned().collect();
        while !bad.is_empty() {
            let mut fixed = Vec::new();
            for &(j, i) in bad.iter() {
                let mut acc = Complex64::default();
                let mut count = 0;
                let mut push = |jj: isize, ii: isize| {
                    if jj >= 0 && ii >= 0 && (jj as usize) < ny && (ii as usize) < nx {
                        let key = (jj as usize, ii as usize);
                        if !bad.contains(&key) {
                            acc += Complex64::from_polar(1.0, work[key]);
                            count += 1;
                        }
                    }
                };
                push(j as isize - 1, i as isize);
                push(j as isize + 1, i as isize);
                push(j as isize, i as isize - 1);
                push(j as isize, i as isize + 1);
                if count > 0 {
                    work[(j, i)] = acc.arg();
                    fixed.push((j, i));
                }
            }
            if fixed.is_empty() {
                break; // fully flagged map; leave zeros
            }
            for key in fixed {
                bad.remove(&key);
            }
        }
    }

    // Residue diagnostic on the (inpainted) wrapped map.
    let mut residues = 0;
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let circ = wrap_phase(work[(j, i + 1)] - work[(j, i)])
                + wrap_phase(work[(j + 1, i + 1)] - work[(j, i + 1)])
                + wrap_phase(work[(j + 1, i)] - work[(j + 1, i + 1)])
                + wrap_phase(work[(j, i)] - work[(j + 1, i)]);
            if circ.abs() > std::f64::consts::PI {
                residues += 1;
            }
        }
    }

    let mut out = Array2::zeros((ny, nx));
    out[(0, 0)] = work[(0, 0)];
    for i in 1..nx {
        out[(0, i)] = out[(0, i - 1)] + wrap_phase(work[(0, i)] - work[(0, i - 1)]);
    }
    for i in 0..nx {
        for j in 1..ny {
            out[(j, i)] = out[(j - 1, i)] + wrap_phase(work[(j, i)] - work[(j - 1, i)]);
        }
    }
    Ok((PhaseMap { values: out, wrapped: false, flagged: Vec::new() }, residues))
}

/// Keys cubic-convolution kernel (a = -1/2).
fn keys_kernel(t: f64) -> f64 {
    let t = t.abs();
    if t < 1.0 {
        (1.5 * t - 2.5) * t * t + 1.0
    } else if t < 2.0 {
        ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0
    } else {
        0.0
    }
}

/// Cubic interpolation of knot values at continuous knot coordinate `f`,
/// with linear extension beyond the first and last knots.
fn interp_1d(knots: &[f64], f: f64) -> f64 {
    let n = knots.len();
    let last = (n - 1) as f64;
    if f <= 0.0 {
        return knots[0] + f * (knots[1] - knots[0]);
    }
    if f >= last {
        return knots[n - 1] + (f - last) * (knots[n - 1] - knots[n - 2]);
    }
    let i = f.floor() as isize;
    let get = |k: isize| -> f64 {
        if k < 0 {
            2.0 * knots[0] - knots[1] // linear ghost
        } else if k as usize >= n {
            2.0 * knots[n - 1] - knots[n - 2]
        } else {
            knots[k as usize]
        }
    };
    let mut acc = 0.0;
    for m in -1..=2 {
        acc += get(i + m) * keys_kernel(f - (i + m) as f64);
    }
    acc
}

/// Interpolate an unwrapped patch map to per-pixel resolution. Patch values
/// are anchored at patch centres; pixels outside the outermost centres are
/// linearly extended.
pub fn interpolate_to_pixels(
    patch_map: &PhaseMap,
    patch: usize,
    target: (usize, usize),
) -> Result<PhaseMap> {
    if patch_map.wrapped {
        return Err(Error::validation("interpolation expects an unwrapped map"));
    }
    let (py, px) = patch_map.dims();
    if px < 2 || py < 2 {
        return Err(Error::validation("patch map needs at least 2x2 patches"));
    }
    let (tny, tnx) = (target.1, target.0);
    let centre0 = (patch as f64 - 1.0) / 2.0;
    let stride = patch as f64;

    // Rows along x first, then columns along y.
    let mut horiz = Array2::zeros((py, tnx));
    for j in 0..py {
        let row: Vec<f64> = (0..px).map(|i| patch_map.values[(j, i)]).collect();
        for ix in 0..tnx {
            let f = (ix as f64 - centre0) / stride;
            horiz[(j, ix)] = interp_1d(&row, f);
        }
    }
    let mut out = Array2::zeros((tny, tnx));
    for ix in 0..tnx {
        let col: Vec<f64> = (0..py).map(|j| horiz[(j, ix)]).collect();
        for iy in 0..tny {
            let f = (iy as f64 - centre0) / stride;
            out[(iy, ix)] = interp_1d(&col, f);
        }
    }
    PhaseMap::new(out, false)
}

/// Compensation pattern: the phase to program so that the net pupil phase
/// equals `target_ideal` once the measured aberration is traversed.
/// Returned wrapped into (-pi, pi] for encoding.
pub fn compensation_phase(measured: &PhaseMap, target_ideal: &PhaseMap) -> Result<PhaseMap> {
    if measured.dims() != target_ideal.dims() {
        return Err(Error::validation("phase map dimensions differ"));
    }
    let values = ndarray::Zip::from(&target_ideal.values)
        .and(&measured.values)
        .map_collect(|&t, &m| wrap_phase(t - m));
    PhaseMap::new(values, true)
}

/// Smooth synthetic pupil aberration with exact peak-to-valley `pv`,
/// deterministic in `seed`, and patch-scale Itoh compliant (adjacent patch
/// means differ by less than 0.85 pi).
pub fn synthetic_aberration(region: usize, patch: usize, pv: f64, seed: u64) -> PhaseMap {
    for attempt in 0..64 {
        let mut rng = stream_rng(seed, 77, attempt);
        let mut coeff = |scale: f64, offset: f64| rng.gen::<f64>() * scale + offset;
        let (a1, a2) = (coeff(2.0, -1.0), coeff(2.0, -1.0));
        let (a3, a4, a5) = (coeff(2.0, -1.0), coeff(2.0, -1.0), coeff(2.0, -1.0));
        let (b1, b2) = (coeff(0.7, -0.35), coeff(0.7, -0.35));
        let (f1x, f1y, p1) = (coeff(0.5, 0.6), coeff(0.5, 0.6), coeff(2.0, -1.0));
        let (f2x, f2y, p2) = (coeff(0.4, 0.4), coeff(0.4, 0.4), coeff(2.0, -1.0));
        let raw = Array2::from_shape_fn((region, region), |(j, i)| {
            let x = 2.0 * i as f64 / (region - 1) as f64 - 1.0;
            let y = 2.0 * j as f64 / (region - 1) as f64 - 1.0;
            a1 * x + a2 * y + a3 * x * x + a4 * x * y + a5 * y * y
                + b1 * (std::f64::consts::PI * (f1x * x + f1y * y) + p1).cos()
                + b2 * (std::f64::consts::PI * (f2x * x - f2y * y) + p2).cos()
        });
        let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < 1e-9 {
            continue;
        }
        let values = raw.mapv(|v| (v - lo) / (hi - lo) * pv - pv / 2.0);

        // Check patch-scale smoothness so Itoh unwrapping stays exact.
        let patches = region / patch;
        let mut means = Array2::zeros((patches, patches));
        for pj in 0..patches {
            for pi in 0..patches {
                let mut acc = 0.0;
                for dy in 0..patch {
                    for dx in 0..patch {
                        acc += values[(pj * patch + dy, pi * patch + dx)];
                    }
                }
                means[(pj, pi)] = acc / (patch * patch) as f64;
            }
        }
        let mut max_step = 0.0_f64;
        for pj in 0..patches {
            for pi in 0..patches {
                if pi + 1 < patches {
                    max_step = max_step.max((means[(pj, pi + 1)] - means[(pj, pi)]).abs());
                }
                if pj + 1 < patches {
                    max_step = max_step.max((means[(pj + 1, pi)] - means[(pj, pi)]).abs());
                }
            }
        }
        if max_step < 0.85 * std::f64::consts::PI {
            return PhaseMap { values, wrapped: false, flagged: Vec::new() };
        }
    }
    // Fall back to a pure tilt of the requested range.
    let values = Array2::from_shape_fn((region, region), |(_, i)| {
        pv * (i as f64 / (region - 1) as f64 - 0.5)
    });
    PhaseMap { values, wrapped: false, flagged: Vec::new() }
}

/// Mean of `map` over each `patch x patch` tile, relative to the tile
/// containing the reference patch. Truth helper for sensing tests.
pub fn patch_means_relative(map: &PhaseMap, patch: usize, reference: (usize, usize)) -> Array2<f64> {
    let (ny, nx) = map.dims();
    let (py, px) = (ny / patch, nx / patch);
    let mut out = Array2::zeros((py, px));
    for pj in 0..py {
        for pi in 0..px {
            let mut acc = 0.0;
            for dy in 0..patch {
                for dx in 0..patch {
                    acc += map.values[(pj * patch + dy, pi * patch + dx)];
                }
            }
            out[(pj, pi)] = acc / (patch * patch) as f64;
        }
    }
    let ref_val = out[(reference.1, reference.0)];
    out.mapv(|v| v - ref_val)
}
