//! Sampling grids and complex field arrays, with the plain-text matrix and
//! 16-bit PGM interchange formats.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Uniform 2D sampling grid with physical coordinates.
///
/// Sample `(ix, iy)` sits at `origin + (ix, iy) * pitch`. Arrays over the
/// grid are indexed `[iy, ix]` (row-major, y first).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Samples along x.
    pub nx: usize,
    /// Samples along y.
    pub ny: usize,
    /// Metres per sample.
    pub pitch: f64,
    /// Physical coordinate of sample (0, 0), m.
    pub origin: (f64, f64),
}

impl GridSpec {
    /// Grid centred on the coordinate origin.
    pub fn centered(nx: usize, ny: usize, pitch: f64) -> Result<Self> {
        let origin = (
            -0.5 * (nx as f64 - 1.0) * pitch,
            -0.5 * (ny as f64 - 1.0) * pitch,
        );
        Self::with_origin(nx, ny, pitch, origin)
    }

    pub fn with_origin(nx: usize, ny: usize, pitch: f64, origin: (f64, f64)) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::validation("grid needs at least 2 samples per axis"));
        }
        if !(pitch > 0.0) || !pitch.is_finite() {
            return Err(Error::validation("grid pitch must be positive and finite"));
        }
        Ok(GridSpec { nx, ny, pitch, origin })
    }

    /// x coordinate of column `ix`, m.
    pub fn x(&self, ix: usize) -> f64 {
        self.origin.0 + ix as f64 * self.pitch
    }

    /// y coordinate of row `iy`, m.
    pub fn y(&self, iy: usize) -> f64 {
        self.origin.1 + iy as f64 * self.pitch
    }

    /// Physical extent covered by samples, m: `(x_min, x_max, y_min, y_max)`.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        (
            self.origin.0,
            self.x(self.nx - 1),
            self.origin.1,
            self.y(self.ny - 1),
        )
    }
}

/// Sampled 2D complex optical amplitude (units of sqrt(W/m^2) up to a
/// global scale).
#[derive(Debug, Clone)]
pub struct ComplexField {
    pub grid: GridSpec,
    /// Amplitudes indexed `[iy, ix]`.
    pub values: Array2<Complex64>,
}

impl ComplexField {
    pub fn new(grid: GridSpec, values: Array2<Complex64>) -> Result<Self> {
        if values.dim() != (grid.ny, grid.nx) {
            return Err(Error::validation(format!(
                "field dimensions {:?} do not match grid ({}, {})",
                values.dim(),
                grid.ny,
                grid.nx
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::validation("field contains non-finite values"));
        }
        Ok(ComplexField { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let values = Array2::default((grid.ny, grid.nx));
        ComplexField { grid, values }
    }

    /// Total power `sum |E|^2 pitch^2`, W up to the global amplitude scale.
    pub fn power(&self) -> f64 {
        let p2 = self.grid.pitch * self.grid.pitch;
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * p2
    }

    /// Intensity `|E|^2` at every sample.
    pub fn intensity(&self) -> Array2<f64> {
        self.values.mapv(|v| v.norm_sqr())
    }

    /// Bilinear interpolation of `|E|^2` at a physical point, m.
    ///
    /// The ion samples the focal intensity this way when it acts as the
    /// detector. Fails with a range error outside the grid extent.
    pub fn intensity_at(&self, point: (f64, f64)) -> Result<f64> {
        let fx = (point.0 - self.grid.origin.0) / self.grid.pitch;
        let fy = (point.1 - self.grid.origin.1) / self.grid.pitch;
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        if fx < 0.0 || fy < 0.0 || fx > (nx - 1) as f64 || fy > (ny - 1) as f64 {
            return Err(Error::range(format!(
                "point ({:.3e}, {:.3e}) outside grid extent",
                point.0, point.1
            )));
        }
        let ix = (fx.floor() as usize).min(nx - 2);
        let iy = (fy.floor() as usize).min(ny - 2);
        let tx = fx - ix as f64;
        let ty = fy - iy as f64;
        let i = |y: usize, x: usize| self.values[(y, x)].norm_sqr();
        Ok(i(iy, ix) * (1.0 - tx) * (1.0 - ty)
            + i(iy, ix + 1) * tx * (1.0 - ty)
            + i(iy + 1, ix) * (1.0 - tx) * ty
            + i(iy + 1, ix + 1) * tx * ty)
    }

    /// Serialize to the plain-text matrix format: a header line
    /// `nx ny pitch`, then `ny` rows of `re,im` pairs. Round-trips
    /// bit-exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {:e}", self.grid.nx, self.grid.ny, self.grid.pitch);
        for row in self.values.rows() {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(' ');
                }
                let _ = write!(out, "{:e},{:e}", v.re, v.im);
                first = false;
            }
            out.push('\n');
        }
        out
    }

    /// Parse the text-matrix format. The loaded grid is centred on the
    /// origin (the format does not carry an origin).
    pub fn from_text(text: &str) -> Result<Self> {
        let (grid, cells) = parse_matrix(text)?;
        let mut values = Array2::default((grid.ny, grid.nx));
        for (idx, cell) in cells.iter().enumerate() {
            let (re, im) = cell
                .split_once(',')
                .ok_or_else(|| Error::format(format!("cell {idx}: expected re,im pair")))?;
            let re: f64 = re
                .parse()
                .map_err(|_| Error::format(format!("cell {idx}: bad real part {re:?}")))?;
            let im: f64 = im
                .parse()
                .map_err(|_| Error::format(format!("cell {idx}: bad imag part {im:?}")))?;
            values[(idx / grid.nx, idx % grid.nx)] = Complex64::new(re, im);
        }
        ComplexField::new(grid, values)
    }

    pub fn save_text(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load_text(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }
}

/// Parse the shared `nx ny pitch` header plus whitespace-separated cells.
pub(crate) fn parse_matrix(text: &str) -> Result<(GridSpec, Vec<&str>)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::format("empty matrix file"))?;
    let mut parts = header.split_whitespace();
    let nx: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::format("header: bad nx"))?;
    let ny: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::format("header: bad ny"))?;
    let pitch: f64 = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::format("header: bad pitch"))?;
    if parts.next().is_some() {
        return Err(Error::format("header: trailing fields"));
    }
    let cells: Vec<&str> = lines.flat_map(|l| l.split_whitespace()).collect();
    if cells.len() != nx * ny {
        return Err(Error::format(format!(
            "expected {} cells, found {}",
            nx * ny,
            cells.len()
        )));
    }
    let grid = GridSpec::centered(nx, ny, pitch)?;
    Ok((grid, cells))
}

/// Write `|E|^2`, max-normalized, as a 16-bit binary PGM.
pub fn save_intensity_pgm(field: &ComplexField, path: &Path) -> Result<()> {
    write_pgm16(&field.intensity(), path)
}

/// Write a nonnegative map, max-normalized, as a 16-bit binary PGM.
pub fn write_pgm16(map: &Array2<f64>, path: &Path) -> Result<()> {
    let (ny, nx) = map.dim();
    let max = map.iter().cloned().fold(0.0_f64, f64::max);
    let mut bytes = format!("P5\n{nx} {ny}\n65535\n").into_bytes();
    for v in map.iter() {
        let scaled = if max > 0.0 {
            ((v / max) * 65535.0).round().clamp(0.0, 65535.0) as u16
        } else {
            0
        };
        bytes.extend_from_slice(&scaled.to_be_bytes());
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ramp_field() -> ComplexField {
        // |E|^2 = 1 + x index, linear in ix.
        let grid = GridSpec::centered(4, 3, 0.5e-6).unwrap();
        let values = Array2::from_shape_fn((3, 4), |(_, x)| {
            Complex64::new(((1 + x) as f64).sqrt(), 0.0)
        });
        ComplexField::new(grid, values).unwrap()
    }

    #[test]
    fn intensity_at_exact_sample() {
        let f = ramp_field();
        let p = (f.grid.x(2), f.grid.y(1));
        assert_relative_eq!(f.intensity_at(p).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn intensity_at_midpoint_of_equal_samples() {
        let grid = GridSpec::centered(2, 2, 1e-6).unwrap();
        let values = Array2::from_elem((2, 2), Complex64::new(1.5, 0.0));
        let f = ComplexField::new(grid, values).unwrap();
        assert_relative_eq!(f.intensity_at((0.0, 0.0)).unwrap(), 2.25, epsilon = 1e-12);
    }

    #[test]
    fn intensity_at_linear_ramp_midpoint() {
        // Bilinear weights reproduce the arithmetic mean on a linear ramp.
        let f = ramp_field();
        let x_mid = 0.5 * (f.grid.x(1) + f.grid.x(2));
        let got = f.intensity_at((x_mid, f.grid.y(1))).unwrap();
        assert_relative_eq!(got, 2.5, epsilon = 1e-12);
    }

    #[test]
    fn intensity_at_outside_grid_is_range_error() {
        let f = ramp_field();
        let (x0, x1, _, _) = f.grid.extent();
        assert!(f.intensity_at((x1 + 1e-9, 0.0)).is_err());
        assert!(f.intensity_at((x0 - 1e-9, 0.0)).is_err());
    }

    #[test]
    fn text_roundtrip_is_bit_exact() {
        let grid = GridSpec::centered(3, 2, 10.8e-6).unwrap();
        let values = Array2::from_shape_fn((2, 3), |(y, x)| {
            Complex64::new(
                (x as f64 + 0.1).sin() * 1e-7,
                -(y as f64 * 3.7 + 0.3).cos(),
            )
        });
        let f = ComplexField::new(grid, values).unwrap();
        let back = ComplexField::from_text(&f.to_text()).unwrap();
        assert_eq!(back.grid.nx, 3);
        assert_eq!(back.grid.pitch.to_bits(), f.grid.pitch.to_bits());
        for (a, b) in back.values.iter().zip(f.values.iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    proptest! {
        #[test]
        fn text_roundtrip_random_values(
            vals in proptest::collection::vec(-1e3_f64..1e3, 6),
            pitch in 1e-9_f64..1e-3,
        ) {
            let grid = GridSpec::centered(3, 2, pitch).unwrap();
            let values = Array2::from_shape_fn((2, 3), |(y, x)| {
                Complex64::new(vals[y * 3 + x], vals[(y * 3 + x + 1) % 6])
            });
            let f = ComplexField::new(grid, values).unwrap();
            let back = ComplexField::from_text(&f.to_text()).unwrap();
            for (a, b) in back.values.iter().zip(f.values.iter()) {
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
    }
}
