//! Physical constants and the default operating parameters of the
//! trapped-Yb-ion setup.

use std::f64::consts::TAU;

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light, m/s.
pub const C_LIGHT: f64 = 2.997_924_58e8;
/// Atomic mass unit, kg.
pub const ATOMIC_MASS: f64 = 1.660_539_066_60e-27;

/// S1/2 - P1/2 transition wavelength of Yb+ (depletion line), m.
pub const YB_WAVELENGTH: f64 = 369.5e-9;
/// Spontaneous emission rate of the P1/2 level, rad/s.
pub const YB_GAMMA: f64 = TAU * 19.6e6;
/// Mass of the 171Yb+ ion, kg.
pub const YB_MASS: f64 = 171.0 * ATOMIC_MASS;
/// Branching ratio of P1/2 decay into the bright ground states.
pub const BRANCHING_BRIGHT: f64 = 2.0 / 3.0;

/// Imaging objective numerical aperture.
pub const OBJECTIVE_NA: f64 = 0.1;
/// Entrance pupil diameter at the objective, m.
pub const PUPIL_DIAMETER: f64 = 7.128e-3;
/// Focal length implied by the pupil radius and NA, m.
pub const FOCAL_LENGTH: f64 = PUPIL_DIAMETER / 2.0 / OBJECTIVE_NA;

/// Donut radius parameter of the focused LG01 spot, m. The intensity of the
/// ideal donut is s(x) = s0 + s_max (x/r0)^2 exp[1 - (x/r0)^2].
pub const DONUT_R0: f64 = 1.41e-6;
/// Full width at half maximum of the focused Gaussian spot, m.
pub const GAUSSIAN_FWHM00: f64 = 2.34e-6;
/// Empirical ratio FWHM00 / FWHM01 of the reshaped spots.
pub const FWHM_RATIO: f64 = 1.67;

/// Secular frequency of the driven y mode, rad/s.
pub const OMEGA_Y: f64 = TAU * 1.36e6;
/// Secular motion period of the y mode, s.
pub const MOTION_PERIOD: f64 = 735e-9;

/// Micromirror pitch of the DMD, m.
pub const MIRROR_PITCH: f64 = 10.8e-6;
/// Active micromirror region used for holograms, mirrors per side.
pub const DMD_REGION: usize = 660;
/// Carrier grating period, mirrors per fringe.
pub const GRATING_PERIOD: usize = 10;
/// Maximum hologram switching rate of the device, Hz.
pub const DMD_SWITCH_RATE: f64 = 17_857.0;
/// Hologram switch time (one pattern period at the maximum rate), s.
pub const DMD_SWITCH_TIME: f64 = 1.0 / DMD_SWITCH_RATE;

/// RMS size of the thermally occupied wave packet at the Doppler limit, m.
pub const THERMAL_RMS: f64 = 20e-9;
/// Single-shot dark-state readout error probability.
pub const READOUT_ERROR: f64 = 0.05;
