//! Simulation library for ground-state-depletion (GSD) microscopy of a
//! single trapped ion.
//!
//! The crate models the whole imaging chain on a desk-scale budget:
//!
//! * [`optics`] - sampled complex fields, Laguerre-Gaussian donut profiles,
//!   and scalar Fraunhofer focusing from the pupil to the ion plane.
//! * [`hologram`] - binary carrier-grating (Lee) holograms for a digital
//!   micromirror device, first-order diffraction with iris filtering.
//! * [`aberration`] - pupil-phase sensing by three-step phase-shifting
//!   interferometry with the ion as detector, Itoh unwrapping, patch-to-pixel
//!   interpolation, and compensation maps.
//! * [`atom`] - dark-state survival under the depletion beam: a five-level
//!   Lindblad master equation and its closed-form rate-equation limit.
//! * [`sequence`] - nested measurement loops: cooling/pump/deplete/detect
//!   cycles, donut scanning, Monte Carlo shot readout, driven secular motion
//!   and slow stage drift.
//! * [`analysis`] - 2D Gaussian and sinusoid fits, resolution laws and the
//!   extinction-ratio resolution limit.
//! * [`stabilizer`] - the sampled trap-voltage PID loop that keeps the
//!   secular frequency stable.
//!
//! Heavy inner loops (scan pixels, saturation sweeps, sensing patches) are
//! data-parallel and run through [`exec`], which uses rayon when the
//! `parallel` feature (default) is enabled and falls back to sequential
//! iteration otherwise. Parallel and sequential runs produce bit-identical
//! results: RNG streams are split per work item and all maps preserve order.

pub mod aberration;
pub mod analysis;
pub mod atom;
pub mod constants;
pub mod error;
pub mod exec;
pub mod hologram;
pub mod optics;
pub mod rng;
pub mod sequence;
pub mod stabilizer;

mod fft;

pub use error::{Error, Result};
