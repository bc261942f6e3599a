//! Ideal donut and Gaussian beam profiles, the LG01 pupil mode, and
//! one-dimensional width measurement.

use ndarray::Array2;
use num_complex::Complex64;
use std::f64::consts::E;

use super::field::{ComplexField, GridSpec};
use crate::error::{Error, Result};

/// Normalized intensity profile of the focused donut spot.
///
/// The radial intensity is `s(x) = s0 + s_max (x/r0)^2 exp[1 - (x/r0)^2]`,
/// in saturation units. `r0` is the radius of maximum intensity; the half
/// width of the central valley is 0.963 r0 (both are reported because the
/// two conventions are easy to mix up).
#[derive(Debug, Clone, Copy)]
pub struct BeamProfile {
    /// Donut radius parameter, m.
    pub r0: f64,
    /// Peak normalized intensity (saturation units).
    pub s_max: f64,
    /// Residual normalized intensity at the centre.
    pub s0: f64,
    /// FWHM of the companion Gaussian spot, m.
    pub fwhm00: f64,
}

impl BeamProfile {
    pub fn new(r0: f64, s_max: f64, s0: f64, fwhm00: f64) -> Result<Self> {
        if !(r0 > 0.0) {
            return Err(Error::validation("donut r0 must be positive"));
        }
        if s_max < 0.0 || s0 < 0.0 {
            return Err(Error::validation("intensities must be nonnegative"));
        }
        Ok(BeamProfile { r0, s_max, s0, fwhm00 })
    }

    /// Build from an extinction ratio: `s0 = s_max / er`.
    pub fn with_extinction_ratio(r0: f64, s_max: f64, er: f64, fwhm00: f64) -> Result<Self> {
        if !(er > 0.0) {
            return Err(Error::validation("extinction ratio must be positive"));
        }
        Self::new(r0, s_max, s_max / er, fwhm00)
    }

    /// Ideal donut with zero residual centre intensity.
    pub fn ideal(r0: f64, s_max: f64) -> Self {
        BeamProfile { r0, s_max, s0: 0.0, fwhm00: crate::constants::GAUSSIAN_FWHM00 }
    }

    /// Extinction ratio `s_max / s0`; `None` for a perfect null.
    pub fn extinction_ratio(&self) -> Option<f64> {
        (self.s0 > 0.0).then(|| self.s_max / self.s0)
    }
}

/// Donut intensity at radial offset `x` m, in saturation units.
pub fn donut_intensity(x: f64, profile: &BeamProfile) -> f64 {
    let u = (x / profile.r0).powi(2);
    profile.s0 + profile.s_max * u * (1.0 - u).exp()
}

/// Parabolic expansion of the donut valley about the centre,
/// `s0 + e s_max (x/r0)^2`. Valid for |x| up to about r0/2.
pub fn parabolic_approx(x: f64, profile: &BeamProfile) -> f64 {
    let u = (x / profile.r0).powi(2);
    profile.s0 + E * profile.s_max * u
}

/// Ideal first-order Laguerre-Gaussian pupil mode (p = 0, l = 1).
///
/// Amplitude is `(r/w) exp(-r^2/w^2)` normalized to unit peak, and the phase
/// winds once around the optical axis (topological charge 1).
pub fn ideal_lg01(grid: &GridSpec, waist: f64) -> Result<ComplexField> {
    if !(waist > 0.0) {
        return Err(Error::validation("waist must be positive"));
    }
    if waist / grid.pitch < 8.0 {
        return Err(Error::configuration(
            "grid too coarse: fewer than 8 samples across the waist",
        ));
    }
    // Peak amplitude of (r/w) exp(-r^2/w^2) is at r = w/sqrt(2).
    let peak = (0.5_f64).sqrt() * (-0.5_f64).exp();
    let values = Array2::from_shape_fn((grid.ny, grid.nx), |(iy, ix)| {
        let x = grid.x(ix);
        let y = grid.y(iy);
        let r = x.hypot(y);
        let amp = (r / waist) * (-(r * r) / (waist * waist)).exp() / peak;
        let theta = y.atan2(x);
        Complex64::from_polar(amp, theta)
    });
    ComplexField::new(*grid, values)
}

/// What kind of feature [`fwhm_1d`] should measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileMode {
    /// Width of a single dominant peak at half height above the profile
    /// minimum.
    Peak,
    /// Width of a central dip at half depth below the profile maximum.
    Valley,
}

/// Full width at half maximum of a 1D sampled profile, m.
///
/// The half level is `min + (max - min)/2`; crossings are linearly
/// interpolated between samples. Fails with an analysis error when the
/// profile has no crossing on either side (flat or truncated data).
pub fn fwhm_1d(samples: &[(f64, f64)], mode: ProfileMode) -> Result<f64> {
    if samples.len() < 3 {
        return Err(Error::analysis("profile needs at least 3 samples"));
    }
    let vmax = samples.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let vmin = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    if !(vmax > vmin) {
        return Err(Error::analysis("profile is flat; no half-maximum crossing"));
    }
    let level = vmin + 0.5 * (vmax - vmin);
    let anchor = match mode {
        ProfileMode::Peak => {
            samples.iter().enumerate().max_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).unwrap().0
        }
        ProfileMode::Valley => {
            samples.iter().enumerate().min_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).unwrap().0
        }
    };
    // From the anchor, walk outward to the first crossing of the half level
    // on each side.
    let crossing = |mut i: usize, step: isize| -> Option<f64> {
        loop {
            let j = i as isize + step;
            if j < 0 || j >= samples.len() as isize {
                return None;
            }
            let (x0, v0) = samples[i];
            let (x1, v1) = samples[j as usize];
            let crossed = match mode {
                ProfileMode::Peak => (v0 >= level) != (v1 >= level),
                ProfileMode::Valley => (v0 <= level) != (v1 <= level),
            };
            if crossed {
                let t = (level - v0) / (v1 - v0);
                return Some(x0 + t * (x1 - x0));
            }
            i = j as usize;
        }
    };
    let left = crossing(anchor, -1)
        .ok_or_else(|| Error::analysis("no half-maximum crossing left of feature"))?;
    let right = crossing(anchor, 1)
        .ok_or_else(|| Error::analysis("no half-maximum crossing right of feature"))?;
    Ok((right - left).abs())
}
