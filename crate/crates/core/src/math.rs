//! Scalar math helpers: sinc, Gaussian tail functions, dB conversion, and the
//! minimum-MSE step size of a uniform quantizer driven by a Gaussian input.

use std::f64::consts::PI;

/// Normalized sinc, `sin(pi x) / (pi x)` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal tail probability `Q(x) = 1 - Phi(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Power ratio to decibel, floored at -400 dB so that zero power stays finite.
pub fn to_db(p: f64) -> f64 {
    10.0 * p.max(1e-40).log10()
}

/// Decibel to linear power ratio.
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `int_a^b (x - c)^2 phi(x) dx` for the standard normal density; `a` and `b`
/// may be infinite.
fn gaussian_sq_moment(a: f64, b: f64, c: f64) -> f64 {
    let pa = if a.is_finite() { normal_pdf(a) } else { 0.0 };
    let pb = if b.is_finite() { normal_pdf(b) } else { 0.0 };
    let ca = if a == f64::NEG_INFINITY { 0.0 } else { normal_cdf(a) };
    let cb = if b == f64::INFINITY { 1.0 } else { normal_cdf(b) };
    let a_term = if a.is_finite() { a * pa } else { 0.0 };
    let b_term = if b.is_finite() { b * pb } else { 0.0 };
    (1.0 + c * c) * (cb - ca) + (a_term - b_term) - 2.0 * c * (pa - pb)
}

/// Mean-squared error of a symmetric uniform quantizer with `2^bits` levels
/// and step `step`, driven by a zero-mean unit-variance Gaussian.
///
/// Labels sit at `step * (i - (2^bits - 1)/2)` and thresholds at
/// `step * (i - 2^(bits-1))`, the same geometry used by the DAC transcoder.
pub fn uniform_quantizer_mse(bits: u32, step: f64) -> f64 {
    let levels = 1usize << bits;
    let half = (levels / 2) as f64;
    let mut mse = 0.0;
    for i in 0..levels {
        let label = step * (i as f64 - (levels as f64 - 1.0) / 2.0);
        let lo = if i == 0 {
            f64::NEG_INFINITY
        } else {
            step * (i as f64 - half)
        };
        let hi = if i == levels - 1 {
            f64::INFINITY
        } else {
            step * (i as f64 + 1.0 - half)
        };
        mse += gaussian_sq_moment(lo, hi, label);
    }
    mse
}

/// Step size minimizing [`uniform_quantizer_mse`] for a unit-variance Gaussian,
/// found by golden-section search (the MSE is unimodal in the step).
pub fn mmse_uniform_step(bits: u32) -> f64 {
    assert!((1..=16).contains(&bits), "supported resolutions: 1..=16 bits");
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (1e-4, 3.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = uniform_quantizer_mse(bits, c);
    let mut fd = uniform_quantizer_mse(bits, d);
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = uniform_quantizer_mse(bits, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = uniform_quantizer_mse(bits, d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinc_values() {
        assert_eq!(sinc(0.0), 1.0);
        assert!(sinc(1.0).abs() < 1e-15);
        assert!((sinc(0.5) - 2.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn normal_cdf_symmetry() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        for &x in &[0.3, 1.0, 2.5, 4.0] {
            assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-14);
            assert!((q_function(x) - (1.0 - normal_cdf(x))).abs() < 1e-14);
        }
    }

    #[test]
    fn mmse_steps_match_classic_table() {
        // Max's optimal uniform steps for a unit-variance Gaussian.
        let expected = [(1, 1.596), (2, 0.9957), (3, 0.5860), (4, 0.3352)];
        for (bits, step) in expected {
            let got = mmse_uniform_step(bits);
            assert!(
                (got - step).abs() < 2e-3,
                "bits={bits}: got {got}, expected {step}"
            );
        }
    }

    #[test]
    fn mse_decreases_with_resolution() {
        let mut prev = f64::INFINITY;
        for bits in 1..=8 {
            let mse = uniform_quantizer_mse(bits, mmse_uniform_step(bits));
            assert!(mse < prev);
            prev = mse;
        }
    }
}
