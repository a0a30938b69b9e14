//! Symmetric uniform quantizer model of the DAC transcoder.
//!
//! Real and imaginary parts are quantized independently onto `2^Q` labels
//! `q_i = alpha * step * (i - (2^Q - 1)/2)` with thresholds
//! `tau_i = step * (i - 2^(Q-1))`; ties on a threshold fall into the upper
//! bin. The calibration constant `alpha` enforces the per-antenna power
//! constraint `E|Q(z)|^2 = 1/(B * OSR)` for a circularly symmetric Gaussian
//! input of the configured variance.

use crate::cmat::{cholesky_psd, CMat};
use crate::error::{Error, Result};
use crate::math::normal_cdf;
use crate::rng::standard_complex;
use crate::C64;
use rand::Rng;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerSpec {
    bits: u32,
    step: f64,
    alpha: f64,
    labels: Vec<f64>,
    /// Interior thresholds `tau_1 ... tau_{2^Q - 1}`; the outer thresholds
    /// are -inf / +inf.
    thresholds: Vec<f64>,
    target_power: f64,
    input_variance: f64,
}

impl QuantizerSpec {
    /// Builds the quantizer and sets `alpha` so the analytic output power for
    /// a complex Gaussian input of variance `input_variance` equals
    /// `1/(antennas * osr)`.
    pub fn calibrate(
        bits: u32,
        step: f64,
        input_variance: f64,
        antennas: usize,
        osr: f64,
    ) -> Result<Self> {
        let spec = Self::calibrate_mixture(bits, step, &[input_variance], antennas, osr)?;
        debug_assert!(
            (spec.output_power(input_variance) - spec.target_power).abs()
                <= 1e-10 * spec.target_power
        );
        Ok(spec)
    }

    /// Like [`calibrate`](Self::calibrate), but enforces the power constraint
    /// on a mixture of Gaussian inputs (one variance per antenna), matching
    /// the spread the zero-forcing precoder produces across antennas:
    /// `mean_b E|Q(z_b)|^2 = 1/(antennas * osr)`.
    pub fn calibrate_mixture(
        bits: u32,
        step: f64,
        input_variances: &[f64],
        antennas: usize,
        osr: f64,
    ) -> Result<Self> {
        if bits == 0 || bits > 16 {
            return Err(Error::Config(format!("resolution {bits} bits outside 1..=16")));
        }
        if !(step > 0.0) {
            return Err(Error::Config("step size must be positive".into()));
        }
        if input_variances.is_empty() || input_variances.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Config("input variances must be positive".into()));
        }
        if antennas == 0 || !(osr > 0.0) {
            return Err(Error::Config("antennas and OSR must be positive".into()));
        }
        let target_power = 1.0 / (antennas as f64 * osr);
        let levels = 1usize << bits;
        let thresholds: Vec<f64> = (1..levels)
            .map(|i| step * (i as f64 - (levels / 2) as f64))
            .collect();
        let mean_variance =
            input_variances.iter().sum::<f64>() / input_variances.len() as f64;
        let mut spec = Self {
            bits,
            step,
            alpha: 1.0,
            labels: (0..levels)
                .map(|i| step * (i as f64 - (levels as f64 - 1.0) / 2.0))
                .collect(),
            thresholds,
            target_power,
            input_variance: mean_variance,
        };
        // The thresholds do not scale with alpha, so the unit-alpha output
        // power fixes alpha in closed form.
        let unit_power = input_variances
            .iter()
            .map(|&v| spec.output_power(v))
            .sum::<f64>()
            / input_variances.len() as f64;
        if !(unit_power > 0.0) {
            return Err(Error::Numerical("degenerate quantizer output power".into()));
        }
        spec.alpha = (target_power / unit_power).sqrt();
        for q in spec.labels.iter_mut() {
            *q *= spec.alpha;
        }
        Ok(spec)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn target_power(&self) -> f64 {
        self.target_power
    }

    pub fn input_variance(&self) -> f64 {
        self.input_variance
    }

    fn quantize_real(&self, x: f64) -> f64 {
        debug_assert!(x.is_finite());
        let levels = self.labels.len();
        let half = (levels / 2) as f64;
        let idx = ((x / self.step).floor() + half).clamp(0.0, levels as f64 - 1.0) as usize;
        self.labels[idx]
    }

    /// Maps a complex sample to the nearest label pair (per-dimension bin
    /// lookup, half-open bins).
    pub fn quantize(&self, z: C64) -> C64 {
        C64::new(self.quantize_real(z.re), self.quantize_real(z.im))
    }

    /// Per-dimension probability masses of the quantizer bins for a complex
    /// Gaussian input of variance `sigma2` (the real part has variance
    /// `sigma2 / 2`).
    fn bin_probabilities(&self, sigma2: f64) -> Vec<f64> {
        let s = (sigma2 / 2.0).sqrt();
        let levels = self.labels.len();
        (0..levels)
            .map(|i| {
                let lo = if i == 0 {
                    0.0
                } else {
                    normal_cdf(self.thresholds[i - 1] / s)
                };
                let hi = if i == levels - 1 {
                    1.0
                } else {
                    normal_cdf(self.thresholds[i] / s)
                };
                hi - lo
            })
            .collect()
    }

    /// Analytic output power `E|Q(z)|^2` for a complex Gaussian input of
    /// variance `sigma2`.
    pub fn output_power(&self, sigma2: f64) -> f64 {
        let probs = self.bin_probabilities(sigma2);
        2.0 * self
            .labels
            .iter()
            .zip(&probs)
            .map(|(&q, &p)| q * q * p)
            .sum::<f64>()
    }

    /// Bussgang gain for one antenna with complex input variance `sigma2`:
    /// `(alpha * step / sqrt(pi)) * sigma^{-1} * sum_i exp(-step^2 (i - 2^(Q-1))^2 / sigma2)`.
    pub fn bussgang_gain(&self, sigma2: f64) -> Result<f64> {
        if !(sigma2 > 0.0) {
            return Err(Error::Config("input variance must be positive".into()));
        }
        let half = 1i64 << (self.bits - 1);
        let levels = 1i64 << self.bits;
        let sum: f64 = (1..levels)
            .map(|i| {
                let t = (i - half) as f64 * self.step;
                (-t * t / sigma2).exp()
            })
            .sum();
        Ok(self.alpha * self.step / (PI.sqrt() * sigma2.sqrt()) * sum)
    }

    /// Vectorized Bussgang gains from the diagonal of the per-sample input
    /// covariance.
    pub fn gain_vector(&self, input_variances: &[f64]) -> Result<Vec<f64>> {
        input_variances
            .iter()
            .map(|&v| self.bussgang_gain(v))
            .collect()
    }

    /// Per-antenna distortion power under the white-distortion approximation:
    /// analytic output power minus the linearized part `g^2 sigma2`.
    pub fn distortion_power(&self, sigma2: f64) -> Result<f64> {
        let g = self.bussgang_gain(sigma2)?;
        Ok((self.output_power(sigma2) - g * g * sigma2).max(0.0))
    }
}

/// Policy selecting the quantizer step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepPolicy {
    /// Minimum-MSE uniform step for a Gaussian input, scaled by the per-real-
    /// dimension standard deviation of the DAC input.
    MmseGaussian,
    /// Explicit step in amplitude units.
    Fixed(f64),
}

impl StepPolicy {
    pub fn resolve(&self, bits: u32, input_variance: f64) -> f64 {
        match *self {
            StepPolicy::MmseGaussian => {
                crate::math::mmse_uniform_step(bits) * (input_variance / 2.0).sqrt()
            }
            StepPolicy::Fixed(step) => step,
        }
    }
}

/// DAC resolution model: ideal (infinite-resolution) converters pass samples
/// through unchanged.
#[derive(Debug, Clone, PartialEq)]
pub enum DacModel {
    Infinite,
    Quantized(QuantizerSpec),
}

impl DacModel {
    pub fn quantize(&self, z: C64) -> C64 {
        match self {
            DacModel::Infinite => z,
            DacModel::Quantized(spec) => spec.quantize(z),
        }
    }

    pub fn bits(&self) -> Option<u32> {
        match self {
            DacModel::Infinite => None,
            DacModel::Quantized(spec) => Some(spec.bits()),
        }
    }
}

/// Exact covariance of the 1-bit quantizer output via the arcsine law:
/// `C = (2 S / (pi B N)) (asin(K_re) + j asin(K_im))` where `K_re/K_im` are
/// the diagonally normalized real/imaginary parts of `c_z`. The prefactor
/// equals `2 * target_power / pi` of the calibrated spec.
pub fn arcsine_covariance(c_z: &CMat, spec: &QuantizerSpec) -> Result<CMat> {
    if spec.bits() != 1 {
        return Err(Error::Config(format!(
            "arcsine law applies to 1-bit quantizers, got {} bits",
            spec.bits()
        )));
    }
    if c_z.rows() != c_z.cols() {
        return Err(Error::Dimension("covariance must be square".into()));
    }
    let n = c_z.rows();
    let mut scale = Vec::with_capacity(n);
    for i in 0..n {
        let d = c_z[(i, i)].re;
        if !(d > 0.0) {
            return Err(Error::Numerical(format!(
                "covariance diagonal entry {i} is not positive"
            )));
        }
        scale.push(d.sqrt());
    }
    let pref = 2.0 * spec.target_power() / PI;
    let mut out = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let norm = scale[i] * scale[j];
            let re = clamped_asin(c_z[(i, j)].re / norm)?;
            let im = clamped_asin(c_z[(i, j)].im / norm)?;
            out[(i, j)] = C64::new(pref * re, pref * im);
        }
    }
    Ok(out)
}

pub(crate) fn clamped_asin(x: f64) -> Result<f64> {
    if x.abs() > 1.0 + 1e-6 {
        return Err(Error::Numerical(format!(
            "normalized correlation {x} outside [-1, 1]"
        )));
    }
    Ok(x.clamp(-1.0, 1.0).asin())
}

/// Method for the quantized-output covariance when no exact law exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultibitMethod {
    /// `G C_z G + D` with diagonal `D` (distortion uncorrelated across
    /// antennas and samples).
    DiagonalDistortion,
    /// Seeded sample covariance of `Q(z)` for `z ~ CN(0, C_z)`.
    MonteCarlo { draws: usize },
}

/// Quantized-output covariance for multi-bit DACs.
pub fn multibit_output_covariance<R: Rng + ?Sized>(
    c_z: &CMat,
    spec: &QuantizerSpec,
    method: MultibitMethod,
    rng: &mut R,
) -> Result<CMat> {
    if spec.bits() < 2 {
        return Err(Error::Config(
            "multibit covariance requires at least 2 bits; use the arcsine law for 1-bit".into(),
        ));
    }
    if !c_z.is_hermitian(1e-9 * (1.0 + c_z.frobenius_norm())) {
        return Err(Error::Numerical("input covariance is not Hermitian".into()));
    }
    match method {
        MultibitMethod::DiagonalDistortion => diagonal_distortion_covariance(c_z, spec),
        MultibitMethod::MonteCarlo { draws } => {
            let n = c_z.rows();
            let tol = 1e-12 * (1.0 + c_z.trace().re / n as f64);
            let l = cholesky_psd(c_z, tol)?;
            let mut acc = CMat::zeros(n, n);
            let mut white = vec![C64::new(0.0, 0.0); n];
            let mut sample = vec![C64::new(0.0, 0.0); n];
            for _ in 0..draws {
                for w in white.iter_mut() {
                    *w = standard_complex(rng);
                }
                for i in 0..n {
                    let mut z = C64::new(0.0, 0.0);
                    for k in 0..=i {
                        z += l[(i, k)] * white[k];
                    }
                    sample[i] = spec.quantize(z);
                }
                acc.accumulate_outer(&sample, &sample, 1.0);
            }
            acc.scale(1.0 / draws as f64);
            Ok(acc)
        }
    }
}

fn diagonal_distortion_covariance(c_z: &CMat, spec: &QuantizerSpec) -> Result<CMat> {
    let n = c_z.rows();
    let mut gains = Vec::with_capacity(n);
    let mut floors = Vec::with_capacity(n);
    for i in 0..n {
        let sigma2 = c_z[(i, i)].re;
        gains.push(spec.bussgang_gain(sigma2)?);
        floors.push(spec.distortion_power(sigma2)?);
    }
    let mut out = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = c_z[(i, j)] * (gains[i] * gains[j]);
        }
        out[(i, i)] += floors[i];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, StreamDomain};

    const B: usize = 64;
    const OSR: f64 = 1024.0 / 300.0;

    fn target() -> f64 {
        1.0 / (B as f64 * OSR)
    }

    fn spec(bits: u32, sigma2: f64) -> QuantizerSpec {
        let step = crate::math::mmse_uniform_step(bits) * (sigma2 / 2.0).sqrt();
        QuantizerSpec::calibrate(bits, step, sigma2, B, OSR).unwrap()
    }

    #[test]
    fn one_bit_magnitude_is_closed_form() {
        let s = spec(1, 0.7);
        // alpha * step = sqrt(2 / (B * OSR)) regardless of the input variance.
        let expected = (2.0 * target()).sqrt();
        assert!((s.alpha() * s.step() - expected).abs() < 1e-12);
        let q = s.quantize(C64::new(0.3, -0.2));
        assert!((q.re - expected / 2.0).abs() < 1e-12);
        assert!((q.im + expected / 2.0).abs() < 1e-12);
    }

    #[test]
    fn calibration_scale_invariance() {
        let a = spec(3, 1.0);
        let b = {
            let step = crate::math::mmse_uniform_step(3) * (1.0f64 / 2.0).sqrt() * 2.0;
            QuantizerSpec::calibrate(3, step, 4.0, B, OSR).unwrap()
        };
        // Scaling sigma^2 by 4 and the step by 2 keeps bin probabilities, so
        // alpha halves to preserve the output power.
        assert!((b.alpha() - a.alpha() / 2.0).abs() < 1e-12 * a.alpha());
    }

    #[test]
    fn two_bit_label_table() {
        let s = QuantizerSpec {
            bits: 2,
            step: 1.0,
            alpha: 1.0,
            labels: vec![-1.5, -0.5, 0.5, 1.5],
            thresholds: vec![-1.0, 0.0, 1.0],
            target_power: 1.0,
            input_variance: 1.0,
        };
        let q = s.quantize(C64::new(0.4, 10.0));
        assert_eq!(q, C64::new(0.5, 1.5));
        // Threshold ties map to the upper bin.
        assert_eq!(s.quantize(C64::new(1.0, -1.0)), C64::new(1.5, -0.5));
        assert_eq!(s.quantize(C64::new(0.0, 0.0)), C64::new(0.5, 0.5));
    }

    #[test]
    fn label_symmetry_and_monotonicity() {
        let s = spec(3, 1.3);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..200 {
            let x = -4.0 + i as f64 * 0.04 + 1e-7; // keep off the thresholds
            let q = s.quantize(C64::new(x, 0.0));
            let qn = s.quantize(C64::new(-x, 0.0));
            assert!((q.re + qn.re).abs() < 1e-12, "symmetry at {x}");
            assert!(q.re >= prev, "monotone at {x}");
            prev = q.re;
        }
    }

    #[test]
    fn calibrated_power_matches_monte_carlo() {
        let sigma2 = 0.8;
        let s = spec(3, sigma2);
        let mut rng = substream(42, StreamDomain::McCovariance, 0, 1);
        let n = 10_000_000usize;
        let mut power = 0.0;
        for _ in 0..n {
            let z = standard_complex(&mut rng) * sigma2.sqrt();
            power += s.quantize(z).norm_sqr();
        }
        power /= n as f64;
        assert!(
            (power - target()).abs() < 1e-3 * target(),
            "mc power {power} vs target {}",
            target()
        );
    }

    #[test]
    fn one_bit_gain_closed_form() {
        let sigma2 = 0.5;
        let s = spec(1, sigma2);
        let g = s.bussgang_gain(sigma2).unwrap();
        let expected = s.alpha() * s.step() / (PI.sqrt() * sigma2.sqrt());
        assert!((g - expected).abs() < 1e-14);
    }

    #[test]
    fn bussgang_gain_matches_monte_carlo() {
        for bits in [1u32, 3] {
            let sigma2 = 1.1;
            let s = spec(bits, sigma2);
            let g = s.bussgang_gain(sigma2).unwrap();
            let mut rng = substream(7, StreamDomain::McCovariance, bits as u64, 0);
            let n = 2_000_000usize;
            let (mut num, mut den) = (C64::new(0.0, 0.0), 0.0);
            for _ in 0..n {
                let z = standard_complex(&mut rng) * sigma2.sqrt();
                num += s.quantize(z) * z.conj();
                den += z.norm_sqr();
            }
            let mc = num / den;
            assert!(
                (mc.re - g).abs() < 5e-3 * g,
                "bits={bits}: mc {} vs closed form {g}",
                mc.re
            );
            assert!(mc.im.abs() < 5e-3 * g);
        }
    }

    #[test]
    fn bussgang_distortion_is_uncorrelated_with_input() {
        let sigma2 = 0.9;
        let s = spec(2, sigma2);
        let g = s.bussgang_gain(sigma2).unwrap();
        let mut rng = substream(13, StreamDomain::McCovariance, 2, 0);
        let n = 2_000_000usize;
        let mut cross = C64::new(0.0, 0.0);
        let (mut pd, mut pz) = (0.0, 0.0);
        for _ in 0..n {
            let z = standard_complex(&mut rng) * sigma2.sqrt();
            let d = s.quantize(z) - z * g;
            cross += d * z.conj();
            pd += d.norm_sqr();
            pz += z.norm_sqr();
        }
        let rho = (cross / n as f64).norm() / ((pd / n as f64).sqrt() * (pz / n as f64).sqrt());
        assert!(rho < 0.01, "distortion-input correlation {rho}");
    }

    #[test]
    fn arcsine_diagonal_equals_power_budget() {
        let s = spec(1, 1.0);
        let c_z = CMat::from_fn(3, 3, |i, j| {
            if i == j {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let c_q = arcsine_covariance(&c_z, &s).unwrap();
        for i in 0..3 {
            assert!((c_q[(i, i)].re - target()).abs() < 1e-14);
            for j in 0..3 {
                if i != j {
                    assert_eq!(c_q[(i, j)], C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn arcsine_off_diagonal_matches_sign_quantizer() {
        let rho = 0.6;
        let s = spec(1, 1.0);
        let c_z = CMat::from_fn(2, 2, |i, j| {
            if i == j {
                C64::new(1.0, 0.0)
            } else {
                C64::new(rho, 0.0)
            }
        });
        let analytic = arcsine_covariance(&c_z, &s).unwrap();
        let l = cholesky_psd(&c_z, 1e-12).unwrap();
        let mut rng = substream(99, StreamDomain::McCovariance, 0, 3);
        let n = 2_000_000usize;
        let mut acc = C64::new(0.0, 0.0);
        for _ in 0..n {
            let w0 = standard_complex(&mut rng);
            let w1 = standard_complex(&mut rng);
            let z0 = l[(0, 0)] * w0;
            let z1 = l[(1, 0)] * w0 + l[(1, 1)] * w1;
            acc += s.quantize(z0) * s.quantize(z1).conj();
        }
        let mc = acc / n as f64;
        let err = (mc - analytic[(0, 1)]).norm() / analytic[(0, 1)].norm();
        assert!(err < 0.01, "relative error {err}");
    }

    #[test]
    fn arcsine_rejects_multibit_and_zero_diagonal() {
        let s1 = spec(1, 1.0);
        let s2 = spec(2, 1.0);
        let good = CMat::identity(2);
        assert!(arcsine_covariance(&good, &s2).is_err());
        let mut bad = CMat::identity(2);
        bad[(1, 1)] = C64::new(0.0, 0.0);
        assert!(arcsine_covariance(&bad, &s1).is_err());
    }

    #[test]
    fn multibit_methods_agree_on_diagonal_input() {
        let sigma2 = 0.6;
        let s = spec(3, sigma2);
        let c_z = CMat::from_fn(3, 3, |i, j| {
            if i == j {
                C64::new(sigma2, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let mut rng = substream(5, StreamDomain::McCovariance, 0, 4);
        let ana = multibit_output_covariance(&c_z, &s, MultibitMethod::DiagonalDistortion, &mut rng)
            .unwrap();
        let mc = multibit_output_covariance(
            &c_z,
            &s,
            MultibitMethod::MonteCarlo { draws: 400_000 },
            &mut rng,
        )
        .unwrap();
        for i in 0..3 {
            assert!((ana[(i, i)].re - s.output_power(sigma2)).abs() < 1e-12);
            assert!((mc[(i, i)].re - ana[(i, i)].re).abs() < 5e-3 * ana[(i, i)].re);
            for j in 0..3 {
                if i != j {
                    assert_eq!(ana[(i, j)], C64::new(0.0, 0.0));
                    assert!(mc[(i, j)].norm() < 5e-3 * ana[(i, i)].re);
                }
            }
        }
    }

    #[test]
    fn multibit_methods_agree_on_correlated_input() {
        let s = spec(3, 1.0);
        let base = CMat::from_fn(4, 4, |i, j| {
            C64::new(0.4 * ((i + 2 * j) as f64).cos(), 0.3 * (i as f64 - j as f64))
        });
        let mut c_z = base.mul(&base.conj_transpose());
        c_z.scale(1.0 / 4.0);
        let mut rng = substream(5, StreamDomain::McCovariance, 1, 4);
        let ana = multibit_output_covariance(&c_z, &s, MultibitMethod::DiagonalDistortion, &mut rng)
            .unwrap();
        let mc = multibit_output_covariance(
            &c_z,
            &s,
            MultibitMethod::MonteCarlo { draws: 1_000_000 },
            &mut rng,
        )
        .unwrap();
        for i in 0..4 {
            let rel = (mc[(i, i)].re - ana[(i, i)].re).abs() / ana[(i, i)].re;
            assert!(rel < 5e-3, "diagonal {i} disagrees by {rel}");
        }
    }

    #[test]
    fn high_resolution_covariance_approaches_input() {
        // Calibrated so the target power equals the unit input power: the
        // 12-bit quantizer is then transparent to within 1e-3.
        let step = crate::math::mmse_uniform_step(12) * (1.0f64 / 2.0).sqrt();
        let s = QuantizerSpec::calibrate(12, step, 1.0, 1, 1.0).unwrap();
        let base = CMat::from_fn(3, 3, |i, j| {
            C64::new(0.4 * ((i + 2 * j) as f64).cos(), 0.2 * (i as f64 - j as f64))
        });
        let gram = base.mul(&base.conj_transpose());
        let c_z = CMat::from_fn(3, 3, |i, j| {
            gram[(i, j)] / (gram[(i, i)].re * gram[(j, j)].re).sqrt()
        });
        let mut rng = substream(0, StreamDomain::McCovariance, 0, 0);
        let out = multibit_output_covariance(&c_z, &s, MultibitMethod::DiagonalDistortion, &mut rng)
            .unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let rel = (out[(i, j)] - c_z[(i, j)]).norm() / c_z[(i, j)].norm().max(1e-12);
                assert!(rel < 1e-3, "entry ({i},{j}) off by {rel}");
            }
        }
    }
}
