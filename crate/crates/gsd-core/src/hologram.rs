//! Binary carrier-grating holograms for the digital micromirror device.
//!
//! Amplitude and phase of a target field are folded into an on/off mirror
//! pattern by the Lee method: mirror (x, y) is on iff
//! `cos(2 pi x / period + phase(x, y)) > cos(pi q(x, y))`, where `q` sets
//! the local duty cycle. The carrier runs along the device x axis. The
//! first diffraction order, selected by an iris in carrier space, carries
//! the encoded complex field.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{fft2, ifft2, signed_bin};
use crate::optics::{ComplexField, GridSpec};

/// Amplitude-to-duty-cycle mapping of the Lee encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeeMode {
    /// Duty cycle proportional to amplitude: `q = a / 2`. The on-state
    /// ratio then tracks the amplitude profile directly.
    Proportional,
    /// Duty cycle `q = asin(a) / pi`, which makes the first-order amplitude
    /// exactly proportional to `a`.
    Linearized,
}

/// Timing constants of the micromirror device.
#[derive(Debug, Clone, Copy)]
pub struct HologramTiming {
    /// Maximum pattern switching rate, Hz.
    pub max_switch_rate: f64,
    /// Pattern switch time, s.
    pub switch_time: f64,
}

impl Default for HologramTiming {
    fn default() -> Self {
        HologramTiming {
            max_switch_rate: crate::constants::DMD_SWITCH_RATE,
            switch_time: crate::constants::DMD_SWITCH_TIME,
        }
    }
}

/// On/off micromirror pattern with its carrier-grating parameters.
#[derive(Debug, Clone)]
pub struct BinaryHologram {
    pub width: usize,
    pub height: usize,
    /// Mirror states indexed `[y, x]`.
    pub bits: Array2<bool>,
    /// Micromirrors per carrier fringe.
    pub grating_period: usize,
    /// Mirror pitch, m.
    pub mirror_pitch: f64,
}

impl BinaryHologram {
    pub fn new(
        bits: Array2<bool>,
        grating_period: usize,
        mirror_pitch: f64,
    ) -> Result<Self> {
        if grating_period < 4 {
            return Err(Error::validation("grating period must be at least 4 mirrors"));
        }
        let (height, width) = bits.dim();
        Ok(BinaryHologram { width, height, bits, grating_period, mirror_pitch })
    }

    /// Fraction of mirrors in the on state.
    pub fn on_fraction(&self) -> f64 {
        let on = self.bits.iter().filter(|&&b| b).count();
        on as f64 / (self.width * self.height) as f64
    }

    /// Carrier frequency, cycles per mirror.
    pub fn carrier_frequency(&self) -> f64 {
        1.0 / self.grating_period as f64
    }

    /// Centred grid matching the mirror layout.
    pub fn grid(&self) -> GridSpec {
        GridSpec::centered(self.width, self.height, self.mirror_pitch)
            .expect("hologram dimensions form a valid grid")
    }

    /// Serialize to binary PBM (P4) plus a sidecar text header carrying the
    /// grating period and mirror pitch. Round-trips bit-exactly.
    pub fn save_pbm(&self, path: &Path) -> Result<()> {
        let mut bytes = format!("P4\n{} {}\n", self.width, self.height).into_bytes();
        for row in self.bits.rows() {
            let mut byte = 0u8;
            let mut used = 0;
            for &bit in row {
                byte = (byte << 1) | bit as u8;
                used += 1;
                if used == 8 {
                    bytes.push(byte);
                    byte = 0;
                    used = 0;
                }
            }
            if used > 0 {
                bytes.push(byte << (8 - used));
            }
        }
        std::fs::write(path, bytes)?;
        let mut sidecar = String::new();
        let _ = writeln!(sidecar, "grating_period = {}", self.grating_period);
        let _ = writeln!(sidecar, "mirror_pitch_m = {:e}", self.mirror_pitch);
        std::fs::write(sidecar_path(path), sidecar)?;
        Ok(())
    }

    pub fn load_pbm(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        // Header: three whitespace-separated ASCII tokens, then raw rows.
        let mut tokens: Vec<String> = Vec::new();
        let mut offset = 0;
        let mut current = String::new();
        for (i, &b) in bytes.iter().enumerate() {
            if b.is_ascii_whitespace() {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                if tokens.len() == 3 {
                    offset = i + 1;
                    break;
                }
            } else {
                current.push(b as char);
            }
        }
        if tokens.len() != 3 {
            return Err(Error::format("truncated PBM header"));
        }
        if tokens[0] != "P4" {
            return Err(Error::format("expected binary PBM (P4)"));
        }
        let width: usize =
            tokens[1].parse().map_err(|_| Error::format("bad PBM width"))?;
        let height: usize =
            tokens[2].parse().map_err(|_| Error::format("bad PBM height"))?;
        let row_bytes = width.div_ceil(8);
        if bytes.len() < offset + row_bytes * height {
            return Err(Error::format("PBM data truncated"));
        }
        let mut bits = Array2::from_elem((height, width), false);
        for y in 0..height {
            for x in 0..width {
                let byte = bytes[offset + y * row_bytes + x / 8];
                bits[(y, x)] = (byte >> (7 - x % 8)) & 1 == 1;
            }
        }
        let sidecar = std::fs::read_to_string(sidecar_path(path))?;
        let mut period = None;
        let mut pitch = None;
        for line in sidecar.lines() {
            if let Some((k, v)) = line.split_once('=') {
                match k.trim() {
                    "grating_period" => period = v.trim().parse::<usize>().ok(),
                    "mirror_pitch_m" => pitch = v.trim().parse::<f64>().ok(),
                    _ => {}
                }
            }
        }
        BinaryHologram::new(
            bits,
            period.ok_or_else(|| Error::format("sidecar missing grating_period"))?,
            pitch.ok_or_else(|| Error::format("sidecar missing mirror_pitch_m"))?,
        )
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".txt");
    std::path::PathBuf::from(p)
}

/// Rectangular patch of mirrors used for phase sensing.
#[derive(Debug, Clone, Copy)]
pub struct PatchSpec {
    /// Top-left mirror coordinate `(x, y)`.
    pub origin: (usize, usize),
    /// Patch size in mirrors `(width, height)`.
    pub size: (usize, usize),
    /// Carrier phase offset of the patch, rad.
    pub phase_offset: f64,
}

impl PatchSpec {
    pub fn new(origin: (usize, usize), size: (usize, usize), phase_offset: f64) -> Self {
        PatchSpec { origin, size, phase_offset }
    }

    fn x_range(&self) -> std::ops::Range<usize> {
        self.origin.0..self.origin.0 + self.size.0
    }

    fn y_range(&self) -> std::ops::Range<usize> {
        self.origin.1..self.origin.1 + self.size.1
    }

    fn overlaps(&self, other: &PatchSpec) -> bool {
        let x = self.x_range().start < other.x_range().end
            && other.x_range().start < self.x_range().end;
        let y = self.y_range().start < other.y_range().end
            && other.y_range().start < self.y_range().end;
        x && y
    }
}

/// Carrier bit at device column `x` for local phase `phase` and duty `q`.
#[inline]
pub(crate) fn carrier_bit(x: usize, period: usize, phase: f64, q: f64) -> bool {
    let arg = std::f64::consts::TAU * x as f64 / period as f64 + phase;
    arg.cos() > (std::f64::consts::PI * q).cos()
}

/// Encode amplitude (in [0, 1]) and phase maps into a binary hologram.
pub fn lee_encode(
    amplitude: &Array2<f64>,
    phase: &Array2<f64>,
    period: usize,
    mirror_pitch: f64,
    mode: LeeMode,
) -> Result<BinaryHologram> {
    if amplitude.dim() != phase.dim() {
        return Err(Error::validation("amplitude and phase dimensions differ"));
    }
    if amplitude.iter().any(|&a| !(0.0..=1.0).contains(&a)) {
        return Err(Error::validation("amplitude values must lie in [0, 1]"));
    }
    let (height, width) = amplitude.dim();
    let mut bits = Array2::from_elem((height, width), false);
    for y in 0..height {
        for x in 0..width {
            let a = amplitude[(y, x)];
            let q = match mode {
                LeeMode::Proportional => a / 2.0,
                LeeMode::Linearized => a.asin() / std::f64::consts::PI,
            };
            bits[(y, x)] = carrier_bit(x, period, phase[(y, x)], q);
        }
    }
    BinaryHologram::new(bits, period, mirror_pitch)
}

/// Hologram with full-duty carrier fringes only inside the reference and
/// sample patches; the sample patch carrier is advanced by `shift`.
pub fn sensing_pattern(
    reference: &PatchSpec,
    sample: &PatchSpec,
    shift: f64,
    width: usize,
    height: usize,
    period: usize,
    mirror_pitch: f64,
) -> Result<BinaryHologram> {
    for (name, p) in [("reference", reference), ("sample", sample)] {
        if p.x_range().end > width || p.y_range().end > height {
            return Err(Error::validation(format!("{name} patch outside active region")));
        }
        if p.size.0 < period {
            return Err(Error::validation(format!(
                "{name} patch narrower than one carrier fringe"
            )));
        }
    }
    if reference.overlaps(sample) {
        return Err(Error::validation("sensing patches overlap"));
    }
    let mut bits = Array2::from_elem((height, width), false);
    for (patch, extra) in [(reference, 0.0), (sample, shift)] {
        for y in patch.y_range() {
            for x in patch.x_range() {
                bits[(y, x)] = carrier_bit(x, period, patch.phase_offset + extra, 0.5);
            }
        }
    }
    BinaryHologram::new(bits, period, mirror_pitch)
}

/// Complex amplitude of the `+1` carrier order of `bits * incident`,
/// i.e. the DFT coefficient at the carrier frequency. The on-axis focal
/// amplitude after first-order filtering is proportional to this.
pub fn first_order_coefficient(
    holo: &BinaryHologram,
    incident: &ComplexField,
) -> Result<Complex64> {
    if incident.values.dim() != (holo.height, holo.width) {
        return Err(Error::validation("incident grid does not match hologram"));
    }
    let mut sum = Complex64::default();
    for y in 0..holo.height {
        for x in 0..holo.width {
            if holo.bits[(y, x)] {
                let arg = -std::f64::consts::TAU * x as f64 / holo.grating_period as f64;
                sum += incident.values[(y, x)] * Complex64::from_polar(1.0, arg);
            }
        }
    }
    Ok(sum / (holo.width * holo.height) as f64)
}

/// Simulate the first diffraction order: transform `bits * incident`, keep a
/// disc of `iris_radius` (cycles per mirror) around the `+1` carrier
/// frequency, re-centre it to zero frequency and transform back. The result
/// is the pupil-plane field encoding the target `a exp(i phi)` up to a
/// global scale.
pub fn first_order_field(
    holo: &BinaryHologram,
    incident: &ComplexField,
    iris_radius: f64,
) -> Result<ComplexField> {
    if incident.values.dim() != (holo.height, holo.width) {
        return Err(Error::validation("incident grid does not match hologram"));
    }
    let carrier = holo.carrier_frequency();
    if iris_radius >= carrier / 2.0 {
        return Err(Error::configuration(
            "iris radius reaches the neighbouring diffraction orders",
        ));
    }
    if !(iris_radius > 0.0) {
        return Err(Error::configuration("iris radius must be positive"));
    }
    let (ny, nx) = (holo.height, holo.width);
    let mut spectrum = Array2::from_shape_fn((ny, nx), |(y, x)| {
        if holo.bits[(y, x)] {
            incident.values[(y, x)]
        } else {
            Complex64::default()
        }
    });
    fft2(&mut spectrum);

    // Carrier bin along x; fractional part is zero when the period divides
    // the region width (the supported layout).
    let carrier_bin = (carrier * nx as f64).round() as isize;
    let mut cropped = Array2::default((ny, nx));
    let rx = iris_radius * nx as f64;
    let ry = iris_radius * ny as f64;
    for ky in 0..ny {
        let fy = signed_bin(ky, ny) as f64;
        for kx in 0..nx {
            let fx = signed_bin(kx, nx) as f64;
            if (fx / rx).powi(2) + (fy / ry).powi(2) <= 1.0 {
                // Source bin shifted by the carrier.
                let src = (signed_bin(kx, nx) + carrier_bin).rem_euclid(nx as isize) as usize;
                cropped[(ky, kx)] = spectrum[(ky, src)];
            }
        }
    }
    ifft2(&mut cropped);
    ComplexField::new(incident.grid, cropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{GRATING_PERIOD, MIRROR_PITCH};
    use approx::assert_relative_eq;

    fn uniform_incident(n: usize) -> ComplexField {
        let grid = GridSpec::centered(n, n, MIRROR_PITCH).unwrap();
        let values = Array2::from_elem((n, n), Complex64::new(1.0, 0.0));
        ComplexField::new(grid, values).unwrap()
    }

    #[test]
    fn zero_amplitude_gives_empty_hologram() {
        let a = Array2::zeros((40, 40));
        let p = Array2::zeros((40, 40));
        let h = lee_encode(&a, &p, GRATING_PERIOD, MIRROR_PITCH, LeeMode::Proportional).unwrap();
        assert_eq!(h.on_fraction(), 0.0);
        let c = first_order_coefficient(&h, &uniform_incident(40)).unwrap();
        assert_eq!(c.norm_sqr(), 0.0);
    }

    /// Exact first-order Fourier coefficient of the discrete 50%-duty
    /// square grating: (1/P) * sum of the carrier phasor over the on set.
    fn discrete_grating_c1(period: usize) -> f64 {
        let mut sum = Complex64::default();
        for x in 0..period {
            if carrier_bit(x, period, 0.0, 0.5) {
                sum += Complex64::from_polar(
                    1.0,
                    -std::f64::consts::TAU * x as f64 / period as f64,
                );
            }
        }
        (sum / period as f64).norm()
    }

    #[test]
    fn full_amplitude_grating_duty_and_power() {
        let n = 40;
        let a = Array2::from_elem((n, n), 1.0);
        let p = Array2::zeros((n, n));
        let h = lee_encode(&a, &p, GRATING_PERIOD, MIRROR_PITCH, LeeMode::Proportional).unwrap();
        assert_relative_eq!(h.on_fraction(), 0.5, epsilon = 1e-12);
        // The measured first-order power fraction equals the closed-form
        // coefficient of the sampled grating. At period 10 the sampled
        // grating carries 3.4% more first-order power than the continuous
        // 1/pi^2 limit; the limit is approached as the period grows.
        let c1 = first_order_coefficient(&h, &uniform_incident(n)).unwrap().norm();
        // Half the mirrors are off, so normalize to the incident power.
        let fraction = c1 * c1;
        let expected = discrete_grating_c1(GRATING_PERIOD).powi(2);
        assert_relative_eq!(fraction, expected, epsilon = 1e-12);
        let continuum = 1.0 / (std::f64::consts::PI * std::f64::consts::PI);
        assert_relative_eq!(fraction / continuum, 1.0335, epsilon = 1e-3);
    }

    #[test]
    fn grating_power_approaches_continuum_at_fine_period() {
        let period = 40;
        let n = 80;
        let a = Array2::from_elem((n, n), 1.0);
        let p = Array2::zeros((n, n));
        let h = lee_encode(&a, &p, period, MIRROR_PITCH, LeeMode::Proportional).unwrap();
        let c1 = first_order_coefficient(&h, &uniform_incident(n)).unwrap().norm();
        let continuum = 1.0 / (std::f64::consts::PI * std::f64::consts::PI);
        assert!((c1 * c1 - continuum).abs() / continuum < 0.02);
    }

    #[test]
    fn constant_phase_offset_rotates_first_order() {
        // A spatially varying phase map dithers the fringe quantization, so
        // the carrier-phase rotation shows up cleanly in the recovered
        // first-order field.
        let n = 120;
        let a = Array2::from_elem((n, n), 0.8);
        let ramp = Array2::from_shape_fn((n, n), |(y, x)| {
            0.021 * x as f64 + 0.013 * y as f64
        });
        let phi0 = 1.234;
        let shifted = ramp.mapv(|v| v + phi0);
        let inc = uniform_incident(n);
        let iris = 0.4 / GRATING_PERIOD as f64;
        let h0 = lee_encode(&a, &ramp, GRATING_PERIOD, MIRROR_PITCH, LeeMode::Proportional).unwrap();
        let h1 =
            lee_encode(&a, &shifted, GRATING_PERIOD, MIRROR_PITCH, LeeMode::Proportional).unwrap();
        let f0 = first_order_field(&h0, &inc, iris).unwrap();
        let f1 = first_order_field(&h1, &inc, iris).unwrap();
        let dot: Complex64 =
            f0.values.iter().zip(f1.values.iter()).map(|(a, b)| a.conj() * b).sum();
        let mut d = dot.arg() - phi0;
        while d > std::f64::consts::PI {
            d -= std::f64::consts::TAU;
        }
        while d < -std::f64::consts::PI {
            d += std::f64::consts::TAU;
        }
        assert!(d.abs() < 1e-2, "phase rotation error {d}");
        let n0 = f0.values.iter().map(|v| v.norm_sqr()).sum::<f64>();
        let n1 = f1.values.iter().map(|v| v.norm_sqr()).sum::<f64>();
        assert_relative_eq!(n0, n1, max_relative = 0.02);
    }

    #[test]
    fn lee_is_idempotent_in_phase_mod_2pi() {
        let n = 30;
        let a = Array2::from_shape_fn((n, n), |(y, x)| (x + y) as f64 / (2 * n) as f64);
        let p = Array2::from_shape_fn((n, n), |(y, x)| (x as f64 * 0.2 - y as f64 * 0.13));
        let p_wrapped = p.mapv(|v| v + std::f64::consts::TAU);
        let h0 = lee_encode(&a, &p, GRATING_PERIOD, MIRROR_PITCH, LeeMode::Linearized).unwrap();
        let h1 =
            lee_encode(&a, &p_wrapped, GRATING_PERIOD, MIRROR_PITCH, LeeMode::Linearized).unwrap();
        assert_eq!(h0.bits, h1.bits);
    }

    #[test]
    fn proportional_on_fraction_tracks_mean_amplitude() {
        // The duty cycle is quantized to one mirror per fringe, so the on
        // fraction tracks mean(a)/2 only after spatial dithering; a smooth
        // map over the full region stays within a few permille.
        let n = 330;
        let a = Array2::from_shape_fn((n, n), |(y, x)| {
            0.5 + 0.5 * ((x as f64 * 0.037).sin() * (y as f64 * 0.021).cos())
        });
        let p = Array2::from_shape_fn((n, n), |(y, x)| 0.011 * x as f64 - 0.007 * y as f64);
        let h = lee_encode(&a, &p, GRATING_PERIOD, MIRROR_PITCH, LeeMode::Proportional).unwrap();
        let mean_a = a.iter().sum::<f64>() / (n * n) as f64;
        assert!(
            (h.on_fraction() - mean_a / 2.0).abs() < 5e-3,
            "on fraction {} vs mean(a)/2 {}",
            h.on_fraction(),
            mean_a / 2.0
        );
    }

    #[test]
    fn linearized_first_order_is_linear_in_amplitude() {
        // A slight carrier tilt makes every fringe sample the duty cycle at
        // a different phase, which averages out the one-mirror quantization.
        let n = 660;
        let tilt_cycles = 7.0;
        let phase = Array2::from_shape_fn((n, n), |(_, x)| {
            std::f64::consts::TAU * tilt_cycles * x as f64 / n as f64
        });
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for k in 1..=10 {
            let a_val = k as f64 / 10.0;
            let a = Array2::from_elem((n, n), a_val);
            let h = lee_encode(&a, &phase, GRATING_PERIOD, MIRROR_PITCH, LeeMode::Linearized)
                .unwrap();
            // Demodulate at the tilted carrier frequency.
            let shifted_bin = n as f64 / GRATING_PERIOD as f64 + tilt_cycles;
            let mut sum = Complex64::default();
            for y in 0..n {
                for x in 0..n {
                    if h.bits[(y, x)] {
                        sum += Complex64::from_polar(
                            1.0,
                            -std::f64::consts::TAU * shifted_bin * x as f64 / n as f64,
                        );
                    }
                }
            }
            xs.push(a_val);
            ys.push(sum.norm() / (n * n) as f64);
        }
        // R^2 of the least-squares line through the (a, |c1|) points.
        let nf = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / nf;
        let my = ys.iter().sum::<f64>() / nf;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        let r2 = sxy * sxy / (sxx * syy);
        assert!(r2 >= 0.999, "R^2 = {r2}");
    }

    #[test]
    fn first_order_field_recovers_uniform_target() {
        let n = 60;
        let inc = uniform_incident(n);
        let a = Array2::from_elem((n, n), 1.0);
        let p = Array2::zeros((n, n));
        let h = lee_encode(&a, &p, GRATING_PERIOD, MIRROR_PITCH, LeeMode::Proportional).unwrap();
        let rec = first_order_field(&h, &inc, 0.4 / GRATING_PERIOD as f64).unwrap();
        // Normalized correlation with the constant target.
        let sum: Complex64 = rec.values.iter().sum();
        let norm = rec.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let corr = sum.norm() / (norm * (n as f64));
        assert!(corr >= 0.99, "correlation {corr}");
    }

    #[test]
    fn first_order_field_is_linear_in_incident() {
        let n = 40;
        let grid = GridSpec::centered(n, n, MIRROR_PITCH).unwrap();
        let inc1 = ComplexField::new(
            grid,
            Array2::from_shape_fn((n, n), |(y, x)| {
                Complex64::from_polar(1.0 + 0.1 * x as f64 / n as f64, 0.01 * y as f64)
            }),
        )
        .unwrap();
        let inc2 = ComplexField::new(
            grid,
            inc1.values.mapv(|v| v * Complex64::new(0.0, 2.0)),
        )
        .unwrap();
        let a = Array2::from_elem((n, n), 0.8);
        let p = Array2::zeros((n, n));
        let h = lee_encode(&a, &p, GRATING_PERIOD, MIRROR_PITCH, LeeMode::Proportional).unwrap();
        let iris = 0.4 / GRATING_PERIOD as f64;
        let f1 = first_order_field(&h, &inc1, iris).unwrap();
        let f2 = first_order_field(&h, &inc2, iris).unwrap();
        for (v1, v2) in f1.values.iter().zip(f2.values.iter()) {
            let expect = v1 * Complex64::new(0.0, 2.0);
            assert!((v2 - expect).norm() < 1e-9);
        }
    }

    #[test]
    fn iris_touching_adjacent_order_rejected() {
        let n = 40;
        let a = Array2::from_elem((n, n), 1.0);
        let p = Array2::zeros((n, n));
        let h = lee_encode(&a, &p, GRATING_PERIOD, MIRROR_PITCH, LeeMode::Proportional).unwrap();
        let inc = uniform_incident(n);
        assert!(first_order_field(&h, &inc, 0.5 / GRATING_PERIOD as f64).is_err());
    }

    #[test]
    fn sensing_pattern_geometry() {
        let refp = PatchSpec::new((320, 320), (20, 20), 0.0);
        let samp = PatchSpec::new((100, 200), (20, 20), 0.0);
        let h = sensing_pattern(&refp, &samp, 0.0, 660, 660, 10, MIRROR_PITCH).unwrap();
        // Mirrors outside the two patches stay off.
        assert_eq!(
            h.bits.iter().filter(|&&b| b).count(),
            2 * 10 * 20 // half duty inside each 20x20 patch
        );
        // shift = 0 with aligned origins: identical fringe phase.
        for dy in 0..20 {
            for dx in 0..20 {
                assert_eq!(h.bits[(320 + dy, 320 + dx)], h.bits[(200 + dy, 100 + dx)]);
            }
        }
        // shift = pi displaces the sample fringes by half a period.
        let h_pi =
            sensing_pattern(&refp, &samp, std::f64::consts::PI, 660, 660, 10, MIRROR_PITCH)
                .unwrap();
        for dx in 0..15 {
            assert_eq!(h_pi.bits[(205, 100 + dx + 5)], h.bits[(205, 100 + dx)]);
        }
    }

    #[test]
    fn overlapping_patches_rejected() {
        let a = PatchSpec::new((100, 100), (20, 20), 0.0);
        let b = PatchSpec::new((110, 110), (20, 20), 0.0);
        assert!(sensing_pattern(&a, &b, 0.0, 660, 660, 10, MIRROR_PITCH).is_err());
    }

    #[test]
    fn pbm_roundtrip_is_bit_exact() {
        let n = 37; // deliberately not a multiple of 8
        let a = Array2::from_shape_fn((n, n), |(y, x)| ((x * 7 + y * 3) % 10) as f64 / 10.0);
        let p = Array2::from_shape_fn((n, n), |(y, x)| (x as f64 - y as f64) * 0.11);
        let h = lee_encode(&a, &p, 10, MIRROR_PITCH, LeeMode::Linearized).unwrap();
        let dir = std::env::temp_dir().join("gsd_pbm_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("holo.pbm");
        h.save_pbm(&path).unwrap();
        let back = BinaryHologram::load_pbm(&path).unwrap();
        assert_eq!(back.bits, h.bits);
        assert_eq!(back.grating_period, h.grating_period);
        assert_eq!(back.mirror_pitch.to_bits(), h.mirror_pitch.to_bits());
    }
}
