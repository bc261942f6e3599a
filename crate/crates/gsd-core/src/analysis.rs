//! Quantitative extraction from simulated data: 2D Gaussian image fits,
//! resolution laws, and sinusoidal trajectory fits.

use crate::error::{Error, Result};
use crate::sequence::ScanImage;

const MAX_ITERATIONS: usize = 200;
const REL_STEP_TOL: f64 = 1e-8;

/// Damped (Levenberg-Marquardt) weighted least squares for a small number
/// of parameters. `eval` returns the model value and gradient at data
/// index `i`.
struct LmFit<const P: usize> {
    params: [f64; P],
    stderr: [f64; P],
    converged: bool,
    iterations: usize,
    chi2: f64,
}

fn lm_fit<const P: usize, F, C>(
    n: usize,
    eval: F,
    y: &[f64],
    w: &[f64],
    start: [f64; P],
    constrain: C,
) -> LmFit<P>
where
    F: Fn(usize, &[f64; P]) -> (f64, [f64; P]),
    C: Fn(&mut [f64; P]),
{
    let chi2_of = |p: &[f64; P]| -> f64 {
        (0..n).map(|i| {
            let (f, _) = eval(i, p);
            w[i] * (y[i] - f) * (y[i] - f)
        })
        .sum()
    };

    let mut params = start;
    constrain(&mut params);
    let mut chi2 = chi2_of(&params);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        // Normal equations J^T W J and J^T W r.
        let mut a = [[0.0_f64; P]; P];
        let mut b = [0.0_f64; P];
        for i in 0..n {
            let (f, g) = eval(i, &params);
            let r = y[i] - f;
            for j in 0..P {
                b[j] += w[i] * g[j] * r;
                for k in j..P {
                    a[j][k] += w[i] * g[j] * g[k];
                }
            }
        }
        for j in 0..P {
            for k in 0..j {
                a[j][k] = a[k][j];
            }
        }

        let mut accepted = false;
        for _ in 0..24 {
            let mut damped = a;
            for (j, row) in damped.iter_mut().enumerate() {
                row[j] += lambda * a[j][j].max(1e-300);
            }
            let Some(delta) = solve(damped, b) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = params;
            for j in 0..P {
                trial[j] += delta[j];
            }
            constrain(&mut trial);
            let trial_chi2 = chi2_of(&trial);
            if trial_chi2.is_finite() && trial_chi2 <= chi2 {
                let small = (0..P).all(|j| {
                    (trial[j] - params[j]).abs()
                        <= REL_STEP_TOL * (params[j].abs() + REL_STEP_TOL)
                });
                params = trial;
                chi2 = trial_chi2;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if small {
                    converged = true;
                }
                break;
            }
            lambda = (lambda * 5.0).min(1e14);
        }
        if converged || !accepted {
            break;
        }
    }

    // Standard errors from the unweighted-by-damping normal matrix and the
    // residual variance.
    let mut a = [[0.0_f64; P]; P];
    for i in 0..n {
        let (_, g) = eval(i, &params);
        for j in 0..P {
            for k in 0..P {
                a[j][k] += w[i] * g[j] * g[k];
            }
        }
    }
    let dof = n.saturating_sub(P).max(1) as f64;
    let s2 = chi2 / dof;
    let mut stderr = [0.0_f64; P];
    if let Some(inv) = invert(a) {
        for j in 0..P {
            stderr[j] = (inv[j][j].max(0.0) * s2).sqrt();
        }
    }
    LmFit { params, stderr, converged, iterations, chi2 }
}

/// Gaussian elimination with partial pivoting.
fn solve<const P: usize>(mut a: [[f64; P]; P], mut b: [f64; P]) -> Option<[f64; P]> {
    for col in 0..P {
        let pivot = (col..P).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..P {
            let f = a[row][col] / a[col][col];
            for k in col..P {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0_f64; P];
    for col in (0..P).rev() {
        let mut acc = b[col];
        for k in col + 1..P {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn invert<const P: usize>(a: [[f64; P]; P]) -> Option<[[f64; P]; P]> {
    let mut out = [[0.0_f64; P]; P];
    for col in 0..P {
        let mut e = [0.0_f64; P];
        e[col] = 1.0;
        let x = solve(a, e)?;
        for row in 0..P {
            out[row][col] = x[row];
        }
    }
    Some(out)
}

/// Whether the fitted feature is a bump or a dip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Peak,
    Dip,
}

/// Result of a 2D Gaussian fit to a scan image.
#[derive(Debug, Clone, Copy)]
pub struct GaussianFit {
    /// Fitted centre `(x, y)`, m.
    pub center: (f64, f64),
    /// Fitted widths `(FWHM_x, FWHM_y)`, m.
    pub fwhm: (f64, f64),
    pub amplitude: f64,
    pub offset: f64,
    /// Standard errors of the centre coordinates, m.
    pub center_err: (f64, f64),
    /// Standard errors of the widths, m.
    pub fwhm_err: (f64, f64),
    pub converged: bool,
    pub iterations: usize,
    /// Weighted residual norm (chi^2).
    pub residual_norm: f64,
}

const FOUR_LN2: f64 = 4.0 * std::f64::consts::LN_2;

fn gaussian2d_model(
    x: f64,
    y: f64,
    p: &[f64; 6], // [x0, y0, wx, wy, amp, offset]
) -> (f64, [f64; 6]) {
    let wx = p[2];
    let wy = p[3];
    let dx = x - p[0];
    let dy = y - p[1];
    let ex = (-FOUR_LN2 * (dx * dx / (wx * wx) + dy * dy / (wy * wy))).exp();
    let f = p[5] + p[4] * ex;
    let common = p[4] * ex * 2.0 * FOUR_LN2;
    let grad = [
        common * dx / (wx * wx),
        common * dy / (wy * wy),
        common * dx * dx / (wx * wx * wx),
        common * dy * dy / (wy * wy * wy),
        ex,
        1.0,
    ];
    (f, grad)
}

/// Fit `offset + amp exp(-4 ln2 [(x-x0)^2/w_x^2 + (y-y0)^2/w_y^2])` to a
/// scan image.
///
/// Initialization comes from the weighted centroid and second moments;
/// pixel weights are the inverse binomial variance
/// `1 / max(p(1-p)/shots, 1/shots^2)` when shot statistics are present.
/// Non-convergence is reported through the `converged` flag, never a crash.
pub fn fit_gaussian2d(img: &ScanImage, polarity: Polarity) -> Result<GaussianFit> {
    let n = img.probabilities.len();
    if n < 9 {
        return Err(Error::validation("image needs at least 9 pixels"));
    }
    if img.probabilities.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("image contains non-finite values"));
    }
    let vmax = img.probabilities.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let vmin = img.probabilities.iter().cloned().fold(f64::INFINITY, f64::min);
    if vmax == vmin {
        return Err(Error::analysis("all-constant image cannot be fitted"));
    }

    let grid = img.grid;
    let nx = grid.nx;
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut vals = Vec::with_capacity(n);
    for ((iy, ix), &v) in img.probabilities.indexed_iter() {
        xs.push(grid.x(ix));
        ys.push(grid.y(iy));
        vals.push(v);
    }
    let weights: Vec<f64> = if img.meta.exact || img.dark_counts.is_none() {
        vec![1.0; n]
    } else {
        let shots = f64::from(img.shots);
        let floor = 1.0 / (shots * shots);
        vals.iter().map(|&p| 1.0 / (p * (1.0 - p) / shots).max(floor)).collect()
    };

    // Initialization. Shot noise on low-contrast images drowns plain
    // moments, so moments are taken over the brighter half of a 3x3
    // box-smoothed map, and a second start point sits on the smoothed
    // extremum.
    let (offset0, amp0) = match polarity {
        Polarity::Peak => (vmin, vmax - vmin),
        Polarity::Dip => (vmax, vmin - vmax),
    };
    let ny = grid.ny;
    let smoothed = {
        let mut out = vec![0.0; n];
        for iy in 0..ny {
            for ix in 0..nx {
                let mut acc = 0.0;
                let mut cnt = 0.0;
                for jy in iy.saturating_sub(1)..(iy + 2).min(ny) {
                    for jx in ix.saturating_sub(1)..(ix + 2).min(nx) {
                        acc += img.probabilities[(jy, jx)];
                        cnt += 1.0;
                    }
                }
                out[iy * nx + ix] = acc / cnt;
            }
        }
        out
    };
    let signed = |v: f64| match polarity {
        Polarity::Peak => v,
        Polarity::Dip => -v,
    };
    let peak_idx = (0..n)
        .max_by(|&a, &b| signed(smoothed[a]).total_cmp(&signed(smoothed[b])))
        .unwrap();
    let s_lo = smoothed.iter().cloned().fold(f64::INFINITY, f64::min);
    let s_hi = smoothed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let threshold = 0.5 * (s_lo + s_hi);
    let mass: Vec<f64> = smoothed
        .iter()
        .map(|&v| match polarity {
            Polarity::Peak => (v - threshold).max(0.0),
            Polarity::Dip => (threshold - v).max(0.0),
        })
        .collect();
    let m_total: f64 = mass.iter().sum();
    let (mut x0, mut y0) = (xs[peak_idx], ys[peak_idx]);
    let span = grid.pitch * nx.max(ny) as f64;
    let sigma_to_fwhm = (8.0 * std::f64::consts::LN_2).sqrt();
    let (mut w0x, mut w0y) = (2.0 * grid.pitch, 2.0 * grid.pitch);
    if m_total > 0.0 {
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..n {
            cx += mass[i] * xs[i];
            cy += mass[i] * ys[i];
        }
        cx /= m_total;
        cy /= m_total;
        let (mut sx, mut sy) = (0.0, 0.0);
        for i in 0..n {
            sx += mass[i] * (xs[i] - cx).powi(2);
            sy += mass[i] * (ys[i] - cy).powi(2);
        }
        x0 = cx;
        y0 = cy;
        w0x = (sigma_to_fwhm * (sx / m_total).sqrt()).clamp(grid.pitch, span);
        w0y = (sigma_to_fwhm * (sy / m_total).sqrt()).clamp(grid.pitch, span);
    }

    let (ex0, ex1, ey0, ey1) = grid.extent();
    let constrain = move |p: &mut [f64; 6]| {
        p[0] = p[0].clamp(ex0 - grid.pitch, ex1 + grid.pitch);
        p[1] = p[1].clamp(ey0 - grid.pitch, ey1 + grid.pitch);
        p[2] = p[2].abs().clamp(0.25 * grid.pitch, 4.0 * span);
        p[3] = p[3].abs().clamp(0.25 * grid.pitch, 4.0 * span);
    };
    let eval = |i: usize, p: &[f64; 6]| gaussian2d_model(xs[i], ys[i], p);
    let starts = [
        [x0, y0, w0x, w0y, amp0, offset0],
        [xs[peak_idx], ys[peak_idx], 2.0 * grid.pitch, 2.0 * grid.pitch, amp0, offset0],
    ];
    let mut best: Option<LmFit<6>> = None;
    for start in starts {
        let mut fit = lm_fit(n, &eval, &vals, &weights, start, constrain);
        if !img.meta.exact && img.dark_counts.is_some() {
            // Reweight from the fitted model: binomial variance at the
            // model probabilities, not at the noisy estimates.
            let shots = f64::from(img.shots);
            let floor = 1.0 / (shots * shots);
            let w2: Vec<f64> = (0..n)
                .map(|i| {
                    let (f, _) = eval(i, &fit.params);
                    let p = f.clamp(0.0, 1.0);
                    1.0 / (p * (1.0 - p) / shots).max(floor)
                })
                .collect();
            fit = lm_fit(n, &eval, &vals, &w2, fit.params, constrain);
        }
        let better = match &best {
            None => true,
            Some(b) => {
                (fit.converged && !b.converged) || (fit.converged == b.converged && fit.chi2 < b.chi2)
            }
        };
        if better {
            best = Some(fit);
        }
    }
    let fit = best.expect("at least one start point");
    Ok(GaussianFit {
        center: (fit.params[0], fit.params[1]),
        fwhm: (fit.params[2].abs(), fit.params[3].abs()),
        amplitude: fit.params[4],
        offset: fit.params[5],
        center_err: (fit.stderr[0], fit.stderr[1]),
        fwhm_err: (fit.stderr[2], fit.stderr[3]),
        converged: fit.converged,
        iterations: fit.iterations,
        residual_norm: fit.chi2,
    })
}

/// Spatial resolution predicted by the depletion law,
/// `FWHM01 / sqrt(1 + k s_max t_D)`, m.
pub fn resolution_predicted(s_max: f64, t_d: f64, k: f64, fwhm01: f64) -> f64 {
    fwhm01 / (1.0 + k * s_max * t_d).sqrt()
}

/// Donut-valley width implied by the Gaussian spot width through the
/// empirical spot ratio.
pub fn fwhm01_from_fwhm00(fwhm00: f64) -> f64 {
    fwhm00 / crate::constants::FWHM_RATIO
}

/// Resolution floor set by the residual centre intensity:
/// `FWHM01 / sqrt(-ER ln(dp))`, m.
pub fn resolution_limit(er: f64, delta_p: f64, fwhm01: f64) -> Result<f64> {
    if !(er > 0.0) {
        return Err(Error::validation("extinction ratio must be positive"));
    }
    if !(delta_p > 0.0 && delta_p < 1.0) {
        return Err(Error::validation("measurement error must lie in (0, 1)"));
    }
    Ok(fwhm01 / (-er * delta_p.ln()).sqrt())
}

/// Resolution gain of depletion imaging over direct fluorescence.
pub fn improvement_ratio(fluorescence_fwhm: f64, gsd_fwhm: f64) -> f64 {
    fluorescence_fwhm / gsd_fwhm
}

/// Result of a sinusoidal trajectory fit `y0 + A cos(2 pi t / T + phi)`.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryFit {
    /// Oscillation amplitude, m.
    pub amplitude: f64,
    /// Fitted period, s.
    pub period: f64,
    /// Phase, rad in (-pi, pi].
    pub phase: f64,
    /// Centre offset, m.
    pub offset: f64,
    /// Standard errors of `[offset, amplitude, period, phase]`.
    pub stderr: [f64; 4],
    pub converged: bool,
}

/// Fit a sinusoid to fitted image centres `(t, y)`.
///
/// Period and phase are both free; `nominal_period` only seeds the start
/// point. Needs at least 5 points spanning half a nominal period.
pub fn fit_trajectory(points: &[(f64, f64)], nominal_period: f64) -> Result<TrajectoryFit> {
    if points.len() < 5 {
        return Err(Error::validation("trajectory fit needs at least 5 points"));
    }
    if !(nominal_period > 0.0) {
        return Err(Error::validation("nominal period must be positive"));
    }
    let t_min = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let t_max = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if t_max - t_min < 0.5 * nominal_period {
        return Err(Error::validation("trajectory points span less than half a period"));
    }

    let n = points.len();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let w = vec![1.0; n];
    let y0 = y.iter().sum::<f64>() / n as f64;
    let ymax = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ymin = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let a0 = 0.5 * (ymax - ymin).max(f64::MIN_POSITIVE);

    let model = |i: usize, p: &[f64; 4]| -> (f64, [f64; 4]) {
        let (t, _) = points[i];
        let theta = std::f64::consts::TAU * t / p[2] + p[3];
        let (sin, cos) = theta.sin_cos();
        let f = p[0] + p[1] * cos;
        let grad = [
            1.0,
            cos,
            p[1] * sin * std::f64::consts::TAU * t / (p[2] * p[2]),
            -p[1] * sin,
        ];
        (f, grad)
    };

    // Coarse phase scan for the start point.
    let mut best_phase = 0.0;
    let mut best_sse = f64::INFINITY;
    for k in 0..16 {
        let phi = k as f64 * std::f64::consts::TAU / 16.0;
        let p = [y0, a0, nominal_period, phi];
        let sse: f64 = (0..n).map(|i| (y[i] - model(i, &p).0).powi(2)).sum();
        if sse < best_sse {
            best_sse = sse;
            best_phase = phi;
        }
    }

    let fit = lm_fit(n, model, &y, &w, [y0, a0, nominal_period, best_phase], |_| {});
    let mut amplitude = fit.params[1];
    let mut phase = fit.params[3];
    if amplitude < 0.0 {
        amplitude = -amplitude;
        phase += std::f64::consts::PI;
    }
    phase = phase.rem_euclid(std::f64::consts::TAU);
    if phase > std::f64::consts::PI {
        phase -= std::f64::consts::TAU;
    }
    let period = fit.params[2].abs();
    if !(period > 0.0) {
        return Err(Error::analysis("trajectory fit collapsed to zero period"));
    }
    Ok(TrajectoryFit {
        amplitude,
        period,
        phase,
        offset: fit.params[0],
        stderr: fit.stderr,
        converged: fit.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Exec;
    use crate::optics::GridSpec;
    use crate::sequence::{ImageMeta, ScanImage};
    use approx::assert_relative_eq;
    use ndarray::Array2;

    fn synthetic_image(
        grid: GridSpec,
        center: (f64, f64),
        fwhm: (f64, f64),
        amp: f64,
        offset: f64,
    ) -> ScanImage {
        let values = Array2::from_shape_fn((grid.ny, grid.nx), |(iy, ix)| {
            let (f, _) = gaussian2d_model(
                grid.x(ix),
                grid.y(iy),
                &[center.0, center.1, fwhm.0, fwhm.1, amp, offset],
            );
            f
        });
        ScanImage {
            grid,
            probabilities: values,
            dark_counts: None,
            shots: 100,
            meta: ImageMeta {
                seed: 0,
                config_digest: 0,
                exec_mode: Exec::Auto.mode_name().to_string(),
                coverage_warning: false,
                exact: true,
            },
        }
    }

    #[test]
    fn noiseless_gaussian_is_recovered_exactly() {
        let grid = GridSpec::centered(10, 10, 1.25e-6 / 9.0).unwrap();
        let truth = ((31e-9, -52e-9), (373e-9, 401e-9));
        let img = synthetic_image(grid, truth.0, truth.1, 0.8, 0.1);
        let fit = fit_gaussian2d(&img, Polarity::Peak).unwrap();
        assert!(fit.converged);
        assert!((fit.center.0 - truth.0 .0).abs() < 1e-12);
        assert!((fit.center.1 - truth.0 .1).abs() < 1e-12);
        assert_relative_eq!(fit.fwhm.0, truth.1 .0, max_relative = 1e-9);
        assert_relative_eq!(fit.fwhm.1, truth.1 .1, max_relative = 1e-9);
    }

    #[test]
    fn dip_polarity_fits_inverted_features() {
        let grid = GridSpec::centered(12, 12, 100e-9).unwrap();
        let img = synthetic_image(grid, (40e-9, 10e-9), (300e-9, 300e-9), -0.6, 0.9);
        let fit = fit_gaussian2d(&img, Polarity::Dip).unwrap();
        assert!(fit.converged);
        assert!(fit.amplitude < 0.0);
        assert!((fit.center.0 - 40e-9).abs() < 1e-12);
    }

    #[test]
    fn fit_is_translation_equivariant() {
        let pitch = 120e-9;
        let g1 = GridSpec::centered(11, 11, pitch).unwrap();
        let shift = (3.5 * pitch, -1.25 * pitch);
        let g2 = GridSpec::with_origin(
            11,
            11,
            pitch,
            (g1.origin.0 + shift.0, g1.origin.1 + shift.1),
        )
        .unwrap();
        let f1 = fit_gaussian2d(
            &synthetic_image(g1, (25e-9, 40e-9), (350e-9, 420e-9), 1.0, 0.05),
            Polarity::Peak,
        )
        .unwrap();
        let f2 = fit_gaussian2d(
            &synthetic_image(
                g2,
                (25e-9 + shift.0, 40e-9 + shift.1),
                (350e-9, 420e-9),
                1.0,
                0.05,
            ),
            Polarity::Peak,
        )
        .unwrap();
        assert!((f2.center.0 - f1.center.0 - shift.0).abs() < 1e-12);
        assert!((f2.center.1 - f1.center.1 - shift.1).abs() < 1e-12);
    }

    #[test]
    fn fit_centre_and_width_are_scale_invariant() {
        let grid = GridSpec::centered(11, 11, 120e-9).unwrap();
        let base = synthetic_image(grid, (25e-9, -30e-9), (380e-9, 380e-9), 0.7, 0.1);
        let mut scaled = base.clone();
        scaled.probabilities.mapv_inplace(|v| 3.0 * v);
        let f1 = fit_gaussian2d(&base, Polarity::Peak).unwrap();
        let f2 = fit_gaussian2d(&scaled, Polarity::Peak).unwrap();
        assert!((f1.center.0 - f2.center.0).abs() < 1e-12);
        assert!((f1.fwhm.0 - f2.fwhm.0).abs() < 1e-12);
        assert_relative_eq!(f2.amplitude, 3.0 * f1.amplitude, max_relative = 1e-9);
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let p = [3.1e-8, -4.7e-8, 3.6e-7, 4.2e-7, 0.83, 0.07];
        for &(x, y) in &[(1e-7, -2e-7), (0.0, 0.0), (-3e-7, 1.4e-7), (2.2e-7, 2.2e-7)] {
            let (_, grad) = gaussian2d_model(x, y, &p);
            for j in 0..6 {
                let h = 1e-6 * p[j].abs().max(1e-9);
                let mut plus = p;
                plus[j] += h;
                let mut minus = p;
                minus[j] -= h;
                let fd = (gaussian2d_model(x, y, &plus).0 - gaussian2d_model(x, y, &minus).0)
                    / (2.0 * h);
                let scale = grad[j].abs().max(fd.abs()).max(1e-12);
                assert!(
                    (grad[j] - fd).abs() / scale < 1e-6,
                    "param {j}: analytic {} fd {}",
                    grad[j],
                    fd
                );
            }
        }
    }

    #[test]
    fn degenerate_images_are_rejected() {
        let grid = GridSpec::centered(5, 5, 100e-9).unwrap();
        let img = ScanImage {
            grid,
            probabilities: Array2::from_elem((5, 5), 0.25),
            dark_counts: None,
            shots: 100,
            meta: ImageMeta {
                seed: 0,
                config_digest: 0,
                exec_mode: "sequential".into(),
                coverage_warning: false,
                exact: true,
            },
        };
        assert!(fit_gaussian2d(&img, Polarity::Peak).is_err());
    }

    #[test]
    fn resolution_law_values_and_monotonicity() {
        let fwhm01 = 1.41e-6;
        assert_relative_eq!(resolution_predicted(0.0, 1e-6, 4.1e7, fwhm01), fwhm01);
        // k s t = 3 halves the width.
        let t = 3.0 / (4.1e7 * 20.0);
        assert_relative_eq!(
            resolution_predicted(20.0, t, 4.1e7, fwhm01),
            fwhm01 / 2.0,
            max_relative = 1e-12
        );
        let mut last = f64::INFINITY;
        for k in 1..20 {
            let r = resolution_predicted(20.0, k as f64 * 1e-8, 4.1e7, fwhm01);
            assert!(r < last);
            last = r;
        }
        assert_relative_eq!(fwhm01_from_fwhm00(2.34e-6), 2.34e-6 / 1.67, epsilon = 1e-18);
    }

    #[test]
    fn resolution_limit_values() {
        let limit = resolution_limit(26.0, 0.05, 1.41e-6).unwrap();
        assert!((limit - 159e-9).abs() < 2e-9, "limit = {limit:.4e}");
        // NA = 0.6 projection with improved readout lands at a few nm.
        let scaled_fwhm = 1.41e-6 * (0.1 / 0.6);
        let nm3 = resolution_limit(1000.0, 0.001, scaled_fwhm).unwrap();
        assert!((2.5e-9..=3.7e-9).contains(&nm3), "limit = {nm3:.3e}");
        // Quadrupling ER halves the limit exactly.
        let a = resolution_limit(26.0, 0.05, 1.41e-6).unwrap();
        let b = resolution_limit(104.0, 0.05, 1.41e-6).unwrap();
        assert_relative_eq!(a / b, 2.0, epsilon = 1e-12);
        assert!(resolution_limit(26.0, 1.0, 1.41e-6).is_err());
        assert!(resolution_limit(26.0, 0.0, 1.41e-6).is_err());
    }

    #[test]
    fn improvement_ratio_values() {
        assert_relative_eq!(improvement_ratio(2.34e-6, 175e-9), 13.37, epsilon = 0.01);
        assert_relative_eq!(improvement_ratio(1e-6, 1e-6), 1.0);
    }

    #[test]
    fn exact_sinusoid_is_recovered() {
        let period = 735e-9;
        let points: Vec<(f64, f64)> = (0..10)
            .map(|k| {
                let t = k as f64 * period / 10.0;
                (t, 12e-9 + 104.5e-9 * (std::f64::consts::TAU * t / period + 0.7).cos())
            })
            .collect();
        let fit = fit_trajectory(&points, period).unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.amplitude, 104.5e-9, max_relative = 1e-9);
        assert_relative_eq!(fit.period, period, max_relative = 1e-9);
        assert_relative_eq!(fit.phase, 0.7, max_relative = 1e-6);
        assert_relative_eq!(fit.offset, 12e-9, max_relative = 1e-6);
    }

    #[test]
    fn noisy_trajectory_period_error_bands() {
        use rand_distr::{Distribution, StandardNormal};
        let period = 735e-9;
        let amp = 104.5e-9;
        let noise = 15e-9;
        let mut errs1 = Vec::new();
        let mut errs2 = Vec::new();
        for seed in 0..40 {
            for (periods, errs) in [(1usize, &mut errs1), (2usize, &mut errs2)] {
                let mut rng = crate::rng::stream_rng(1000 + seed, periods as u64, 0);
                let n = 10 * periods;
                let points: Vec<(f64, f64)> = (0..n)
                    .map(|k| {
                        let t = k as f64 * period / 10.0;
                        let eps: f64 =
                            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
                        (
                            t,
                            amp * (std::f64::consts::TAU * t / period).cos() + noise * eps,
                        )
                    })
                    .collect();
                let fit = fit_trajectory(&points, period).unwrap();
                errs.push((fit.period - period).abs() / period);
            }
        }
        errs1.sort_by(f64::total_cmp);
        errs2.sort_by(f64::total_cmp);
        assert!(errs1[20] < 0.07, "one-period median {:.3}", errs1[20]);
        assert!(errs2[20] < 0.02, "two-period median {:.4}", errs2[20]);
    }

    #[test]
    fn trajectory_preconditions() {
        let period = 1e-6;
        let few: Vec<(f64, f64)> = (0..4).map(|k| (k as f64 * 1e-7, 0.0)).collect();
        assert!(fit_trajectory(&few, period).is_err());
        let narrow: Vec<(f64, f64)> = (0..8).map(|k| (k as f64 * 1e-8, 1e-9)).collect();
        assert!(fit_trajectory(&narrow, period).is_err());
    }
}
