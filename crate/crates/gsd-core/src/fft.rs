//! Small 2D FFT helpers on top of rustfft.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;

/// In-place forward 2D FFT (unnormalized, matching the analytic DFT sum).
pub fn fft2(data: &mut Array2<Complex64>) {
    transform(data, rustfft::FftDirection::Forward);
    let _ = data;
}

/// In-place inverse 2D FFT, normalized by 1/(nx*ny).
pub fn ifft2(data: &mut Array2<Complex64>) {
    transform(data, rustfft::FftDirection::Inverse);
    let n = data.len() as f64;
    data.mapv_inplace(|v| v / n);
}

fn transform(data: &mut Array2<Complex64>, dir: rustfft::FftDirection) {
    let (ny, nx) = data.dim();
    let mut planner = FftPlanner::new();

    let fft_x = planner.plan_fft(nx, dir);
    let mut scratch = vec![Complex64::default(); fft_x.get_inplace_scratch_len()];
    for mut row in data.rows_mut() {
        let slice = row.as_slice_mut().expect("row-major layout");
        fft_x.process_with_scratch(slice, &mut scratch);
    }

    let fft_y = planner.plan_fft(ny, dir);
    let mut scratch = vec![Complex64::default(); fft_y.get_inplace_scratch_len()];
    let mut col = vec![Complex64::default(); ny];
    for ix in 0..nx {
        for iy in 0..ny {
            col[iy] = data[(iy, ix)];
        }
        fft_y.process_with_scratch(&mut col, &mut scratch);
        for iy in 0..ny {
            data[(iy, ix)] = col[iy];
        }
    }
}

/// Signed frequency index of bin `k` in an `n`-point DFT.
pub fn signed_bin(k: usize, n: usize) -> isize {
    if k <= (n - 1) / 2 {
        k as isize
    } else {
        k as isize - n as isize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn roundtrip() {
        let mut data = Array2::from_shape_fn((6, 10), |(y, x)| {
            Complex64::new((x * y) as f64, (x + 2 * y) as f64 * 0.1)
        });
        let orig = data.clone();
        fft2(&mut data);
        ifft2(&mut data);
        for (a, b) in data.iter().zip(orig.iter()) {
            assert_relative_eq!(a.re, b.re, epsilon = 1e-12);
            assert_relative_eq!(a.im, b.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_tone_lands_in_its_bin() {
        let n = 16;
        let mut data = Array2::from_shape_fn((n, n), |(_, x)| {
            Complex64::from_polar(1.0, std::f64::consts::TAU * 3.0 * x as f64 / n as f64)
        });
        fft2(&mut data);
        assert_relative_eq!(data[(0, 3)].re, (n * n) as f64, epsilon = 1e-9);
        assert!(data[(0, 5)].norm() < 1e-9);
    }
}
