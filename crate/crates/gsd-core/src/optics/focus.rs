//! Scalar Fraunhofer propagation from the pupil to the ion plane.
//!
//! The focal field is the discrete Fourier transform of the aperture-masked
//! pupil field, evaluated directly on the requested focal grid:
//!
//! `E_f(x) = (pitch_p^2 / (lambda f)) sum E_p(xi) exp(-i 2 pi x.xi / (lambda f))`
//!
//! up to a global phase. Evaluating the kernel at the physical focal
//! coordinates (a separable matrix DFT) gives an exact, reproducible focal
//! pitch for any grid, and reduces to the unitary DFT when the focal grid
//! tiles the full band (see [`full_focal_grid`]), for which energy is
//! conserved to rounding.

use ndarray::Array2;
use num_complex::Complex64;

use super::field::{ComplexField, GridSpec};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};

/// Pupil stop model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Aperture {
    /// No stop: the sampled pupil extent is the aperture (square DMD area).
    None,
    /// Hard circular stop of radius `numerical_aperture * focal_length`.
    Disc,
}

/// Focusing objective: wavelength, NA and the pupil-to-focal scaling.
#[derive(Debug, Clone, Copy)]
pub struct OpticalSystem {
    /// Wavelength, m.
    pub wavelength: f64,
    /// Numerical aperture (0 < NA < 1).
    pub numerical_aperture: f64,
    /// Focal length relating pupil to focal coordinates, m.
    pub focal_length: f64,
    pub aperture: Aperture,
}

impl OpticalSystem {
    pub fn new(
        wavelength: f64,
        numerical_aperture: f64,
        focal_length: f64,
        aperture: Aperture,
    ) -> Result<Self> {
        if !(wavelength > 0.0) {
            return Err(Error::validation("wavelength must be positive"));
        }
        if !(numerical_aperture > 0.0 && numerical_aperture < 1.0) {
            return Err(Error::validation("NA must lie in (0, 1)"));
        }
        if !(focal_length > 0.0) {
            return Err(Error::validation("focal length must be positive"));
        }
        Ok(OpticalSystem { wavelength, numerical_aperture, focal_length, aperture })
    }

    /// The NA = 0.1 objective of the ion setup at 369.5 nm.
    pub fn objective() -> Self {
        OpticalSystem {
            wavelength: crate::constants::YB_WAVELENGTH,
            numerical_aperture: crate::constants::OBJECTIVE_NA,
            focal_length: crate::constants::FOCAL_LENGTH,
            aperture: Aperture::None,
        }
    }

    /// Radius of the circular stop, m.
    pub fn aperture_radius(&self) -> f64 {
        self.numerical_aperture * self.focal_length
    }

    /// Coarsest focal pitch that still Nyquist-samples the diffraction
    /// limit lambda / (2 NA), m.
    pub fn nyquist_focal_pitch(&self) -> f64 {
        self.wavelength / (4.0 * self.numerical_aperture)
    }
}

/// Focal grid that tiles the full spatial-frequency band of `pupil_grid`
/// with an integer zero-padding factor (>= 2 for comfortable sampling).
pub fn full_focal_grid(sys: &OpticalSystem, pupil_grid: &GridSpec, padding: usize) -> GridSpec {
    let m = pupil_grid.nx.max(pupil_grid.ny) * padding.max(1);
    let pitch = sys.wavelength * sys.focal_length / (m as f64 * pupil_grid.pitch);
    GridSpec::centered(m, m, pitch).expect("valid derived grid")
}

/// Propagate a pupil field to the focal plane of `sys` on `focal_grid`.
pub fn focus(
    pupil: &ComplexField,
    sys: &OpticalSystem,
    focal_grid: &GridSpec,
) -> Result<ComplexField> {
    // The focal bandwidth is set by whichever is smaller: the stop or the
    // sampled pupil extent.
    let half_extent = 0.5
        * (pupil.grid.nx.max(pupil.grid.ny) as f64)
        * pupil.grid.pitch;
    let na_eff = match sys.aperture {
        Aperture::Disc => sys.aperture_radius().min(half_extent) / sys.focal_length,
        Aperture::None => half_extent / sys.focal_length,
    };
    let nyquist = sys.wavelength / (4.0 * na_eff);
    if focal_grid.pitch > nyquist * (1.0 + 1e-9) {
        return Err(Error::configuration(format!(
            "focal grid pitch {:.3e} m undersamples the diffraction limit; need <= {:.3e} m",
            focal_grid.pitch, nyquist
        )));
    }

    let masked;
    let src = match sys.aperture {
        Aperture::None => pupil,
        Aperture::Disc => {
            let r = sys.aperture_radius();
            let (x0, x1, y0, y1) = pupil.grid.extent();
            if x0.abs().min(x1.abs()).min(y0.abs()).min(y1.abs()) < r {
                return Err(Error::configuration(
                    "pupil grid does not cover the aperture disc",
                ));
            }
            let mut values = pupil.values.clone();
            for iy in 0..pupil.grid.ny {
                let y = pupil.grid.y(iy);
                for ix in 0..pupil.grid.nx {
                    if pupil.grid.x(ix).hypot(y) > r {
                        values[(iy, ix)] = Complex64::default();
                    }
                }
            }
            masked = ComplexField { grid: pupil.grid, values };
            &masked
        }
    };

    let lf = sys.wavelength * sys.focal_length;
    let kernel = |focal: f64, pupil: f64| {
        Complex64::from_polar(1.0, -std::f64::consts::TAU * focal * pupil / lf)
    };

    // temp[iy, jx] = sum_ix P[iy, ix] Kx[jx, ix]
    let pg = src.grid;
    let temp_rows = exec::map_indexed(Exec::Auto, pg.ny, |iy| {
        let mut row = vec![Complex64::default(); focal_grid.nx];
        for ix in 0..pg.nx {
            let v = src.values[(iy, ix)];
            if v == Complex64::default() {
                continue;
            }
            let xp = pg.x(ix);
            for (jx, out) in row.iter_mut().enumerate() {
                *out += v * kernel(focal_grid.x(jx), xp);
            }
        }
        row
    });

    let scale = pg.pitch * pg.pitch / lf;
    let focal_rows = exec::map_indexed(Exec::Auto, focal_grid.ny, |jy| {
        let yf = focal_grid.y(jy);
        let col_kernel: Vec<Complex64> = (0..pg.ny).map(|iy| kernel(yf, pg.y(iy))).collect();
        let mut row = vec![Complex64::default(); focal_grid.nx];
        for (iy, k) in col_kernel.iter().enumerate() {
            let trow = &temp_rows[iy];
            for (jx, out) in row.iter_mut().enumerate() {
                *out += *k * trow[jx];
            }
        }
        for out in row.iter_mut() {
            *out *= scale;
        }
        row
    });

    let mut values = Array2::default((focal_grid.ny, focal_grid.nx));
    for (jy, row) in focal_rows.into_iter().enumerate() {
        for (jx, v) in row.into_iter().enumerate() {
            values[(jy, jx)] = v;
        }
    }
    ComplexField::new(*focal_grid, values)
}
