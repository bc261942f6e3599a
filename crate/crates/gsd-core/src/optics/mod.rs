//! Sampled complex optical fields, ideal beam profiles, and scalar
//! Fraunhofer focusing.

mod beam;
mod field;
mod focus;

pub use beam::{
    donut_intensity, fwhm_1d, ideal_lg01, parabolic_approx, BeamProfile, ProfileMode,
};
pub use field::{save_intensity_pgm, write_pgm16, ComplexField, GridSpec};
pub use focus::{focus, full_focal_grid, Aperture, OpticalSystem};

pub(crate) use field::parse_matrix as parse_matrix_cells;
