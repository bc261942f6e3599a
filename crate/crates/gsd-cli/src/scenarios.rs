//! Composite simulations built from the core modules: donut synthesis
//! through the hologram chain, focal extinction-ratio measurement, and the
//! closed aberration-compensation loop.

use gsd_core::aberration::{
    compensation_phase, interpolate_to_pixels, scan_phase_map, synthetic_aberration,
    unwrap_2d, PhaseMap, SensingConfig,
};
use gsd_core::error::Result;
use gsd_core::hologram::{first_order_field, lee_encode, BinaryHologram, LeeMode};
use gsd_core::optics::{
    focus, ideal_lg01, ComplexField, GridSpec, OpticalSystem,
};
use ndarray::Array2;
use num_complex::Complex64;

/// LG01 pupil waist that focuses to a donut with radius parameter `r0`.
///
/// The Fourier pair of an LG mode with amplitude waist `w_p` has waist
/// `lambda f / (pi w_p)`, and the donut intensity decay length is the focal
/// waist over sqrt(2).
pub fn pupil_waist_for_r0(sys: &OpticalSystem, r0: f64) -> f64 {
    let w_f = r0 * std::f64::consts::SQRT_2;
    sys.wavelength * sys.focal_length / (std::f64::consts::PI * w_f)
}

/// Target LG01 amplitude and phase maps over the hologram region.
pub fn lg01_target(
    region: usize,
    mirror_pitch: f64,
    waist: f64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let grid = GridSpec::centered(region, region, mirror_pitch)?;
    let lg = ideal_lg01(&grid, waist)?;
    Ok((lg.values.mapv(|v| v.norm()), lg.values.mapv(|v| v.arg())))
}

/// Encode a donut hologram, optionally with a compensation phase added.
pub fn donut_hologram(
    region: usize,
    period: usize,
    mirror_pitch: f64,
    waist: f64,
    compensation: Option<&PhaseMap>,
    mode: LeeMode,
) -> Result<BinaryHologram> {
    let (amp, mut phase) = lg01_target(region, mirror_pitch, waist)?;
    if let Some(comp) = compensation {
        phase = &phase + &comp.values;
    }
    lee_encode(&amp, &phase, period, mirror_pitch, mode)
}

/// Propagate a hologram through the aberrated system to the ion plane.
///
/// `hidden` is the pupil phase screen of the real optics (applied to the
/// incident beam), `focal_grid` the sampling window around the ion.
pub fn hologram_to_focus(
    holo: &BinaryHologram,
    hidden: Option<&PhaseMap>,
    sys: &OpticalSystem,
    iris_fraction: f64,
    focal_grid: &GridSpec,
) -> Result<ComplexField> {
    let grid = holo.grid();
    let values = match hidden {
        Some(h) => Array2::from_shape_fn((holo.height, holo.width), |(y, x)| {
            Complex64::from_polar(1.0, h.values[(y, x)])
        }),
        None => Array2::from_elem((holo.height, holo.width), Complex64::new(1.0, 0.0)),
    };
    let incident = ComplexField::new(grid, values)?;
    let pupil = first_order_field(holo, &incident, iris_fraction / holo.grating_period as f64)?;
    focus(&pupil, sys, focal_grid)
}

/// Extinction ratio of a focal donut with the ion at the origin:
/// peak intensity over the map divided by the intensity at the origin.
pub fn extinction_ratio_at_origin(focal: &ComplexField) -> Result<f64> {
    let peak = focal.values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    let centre = focal.intensity_at((0.0, 0.0))?;
    Ok(peak / centre.max(f64::MIN_POSITIVE))
}

/// Result of the closed aberration-compensation loop.
pub struct ClosedLoop {
    pub wrapped: PhaseMap,
    pub unwrapped: PhaseMap,
    pub per_pixel: PhaseMap,
    pub compensation: PhaseMap,
    pub residues: usize,
    /// Per-pixel recovery error RMS after piston/tip/tilt removal, rad.
    pub recovery_rms: f64,
    pub er_before: f64,
    pub er_after: f64,
}

/// Sense a hidden aberration, build the compensated donut, and measure the
/// focal extinction ratio before and after compensation.
pub fn closed_loop(
    hidden: &PhaseMap,
    cfg: &SensingConfig,
    sys: &OpticalSystem,
    waist: f64,
    iris_fraction: f64,
    lee_mode: LeeMode,
    focal_grid: &GridSpec,
) -> Result<ClosedLoop> {
    let wrapped = scan_phase_map(hidden, cfg)?;
    let (unwrapped, residues) = unwrap_2d(&wrapped)?;
    let per_pixel = interpolate_to_pixels(&unwrapped, cfg.patch, (cfg.region, cfg.region))?;
    let ideal = PhaseMap::new(Array2::zeros((cfg.region, cfg.region)), false)?;
    let compensation = compensation_phase(&per_pixel, &ideal)?;
    let recovery_rms = plane_removed_rms(&per_pixel.values, &hidden.values);

    let raw_holo =
        donut_hologram(cfg.region, cfg.period, cfg.mirror_pitch, waist, None, lee_mode)?;
    let comp_holo = donut_hologram(
        cfg.region,
        cfg.period,
        cfg.mirror_pitch,
        waist,
        Some(&compensation),
        lee_mode,
    )?;
    let before = hologram_to_focus(&raw_holo, Some(hidden), sys, iris_fraction, focal_grid)?;
    let after = hologram_to_focus(&comp_holo, Some(hidden), sys, iris_fraction, focal_grid)?;
    Ok(ClosedLoop {
        wrapped,
        unwrapped,
        per_pixel,
        compensation,
        residues,
        recovery_rms,
        er_before: extinction_ratio_at_origin(&before)?,
        er_after: extinction_ratio_at_origin(&after)?,
    })
}

/// RMS of `a - b` after removing the least-squares plane (piston, tip,
/// tilt).
pub fn plane_removed_rms(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    let (mut sx, mut sy, mut s1) = (0.0_f64, 0.0, 0.0);
    let (mut sxx, mut syy, mut sxy) = (0.0_f64, 0.0, 0.0);
    let (mut sxd, mut syd, mut sd) = (0.0_f64, 0.0, 0.0);
    for ((j, i), (&va, &vb)) in a.indexed_iter().map(|(idx, v)| (idx, (v, &b[idx]))) {
        let d = va - vb;
        let (x, y) = (i as f64, j as f64);
        sx += x;
        sy += y;
        s1 += 1.0;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
        sxd += x * d;
        syd += y * d;
        sd += d;
    }
    let det3 = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let m = [[sxx, sxy, sx], [sxy, syy, sy], [sx, sy, s1]];
    let rhs = [sxd, syd, sd];
    let d0 = det3(&m);
    let col = |c: usize| {
        let mut mm = m;
        for r in 0..3 {
            mm[r][c] = rhs[r];
        }
        det3(&mm) / d0
    };
    let (pa, pb, pc) = (col(0), col(1), col(2));
    let mut sq = 0.0;
    for ((j, i), (&va, &vb)) in a.indexed_iter().map(|(idx, v)| (idx, (v, &b[idx]))) {
        let r = va - vb - (pa * i as f64 + pb * j as f64 + pc);
        sq += r * r;
    }
    (sq / s1).sqrt()
}

/// Deterministic smooth test aberration over the configured region.
pub fn hidden_aberration(cfg: &SensingConfig, pv: f64, seed: u64) -> PhaseMap {
    synthetic_aberration(cfg.region, cfg.patch, pv, seed)
}
