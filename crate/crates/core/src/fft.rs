//! Planned DFTs with explicit normalization conventions.
//!
//! All OFDM bookkeeping in this crate uses the unitary DFT, so Parseval holds
//! without correction factors. The raw (unnormalized) transforms are exposed
//! for covariance lag/spectrum conversions where the `1/N` factor belongs to
//! the inverse only.

use crate::C64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub struct Dft {
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Dft {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            len,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `X_k = sum_n x_n e^{-j 2 pi k n / N}` in place, no scaling.
    pub fn forward_raw(&self, buf: &mut [C64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.fwd.process(buf);
    }

    /// `x_n = sum_k X_k e^{+j 2 pi k n / N}` in place, no scaling.
    pub fn inverse_raw(&self, buf: &mut [C64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.inv.process(buf);
    }

    /// Unitary forward transform (scales by `1/sqrt(N)`).
    pub fn forward_unitary(&self, buf: &mut [C64]) {
        self.forward_raw(buf);
        let s = 1.0 / (self.len as f64).sqrt();
        for v in buf.iter_mut() {
            *v *= s;
        }
    }

    /// Unitary inverse transform (scales by `1/sqrt(N)`).
    pub fn inverse_unitary(&self, buf: &mut [C64]) {
        self.inverse_raw(buf);
        let s = 1.0 / (self.len as f64).sqrt();
        for v in buf.iter_mut() {
            *v *= s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unitary_roundtrip_preserves_energy() {
        let n = 48;
        let dft = Dft::new(n);
        let mut buf: Vec<C64> = (0..n)
            .map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let original = buf.clone();
        let energy: f64 = buf.iter().map(|z| z.norm_sqr()).sum();
        dft.forward_unitary(&mut buf);
        let spec_energy: f64 = buf.iter().map(|z| z.norm_sqr()).sum();
        assert!((energy - spec_energy).abs() < 1e-10 * energy);
        dft.inverse_unitary(&mut buf);
        for (a, b) in buf.iter().zip(&original) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn forward_matches_direct_sum() {
        let n = 8;
        let dft = Dft::new(n);
        let x: Vec<C64> = (0..n)
            .map(|i| C64::new(i as f64, -(i as f64) * 0.5))
            .collect();
        let mut buf = x.clone();
        dft.forward_raw(&mut buf);
        for k in 0..n {
            let direct: C64 = (0..n)
                .map(|m| {
                    x[m] * C64::cis(-2.0 * std::f64::consts::PI * (k * m) as f64 / n as f64)
                })
                .sum();
            assert!((buf[k] - direct).norm() < 1e-10);
        }
    }
}
