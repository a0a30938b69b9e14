//! Analog reconstruction model: zero-order hold and Butterworth frequency
//! responses, the sampled response vector applied per subcarrier, the
//! predistortion coefficients that invert it in-band, and the power rescale
//! factor compensating the predistortion boost.

use crate::error::{Error, Result};
use crate::grid::SystemGrid;
use crate::math::sinc;
use crate::C64;
use std::f64::consts::PI;

/// Reconstruction stage variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReconFilter {
    /// Ideal brick-wall low-pass at `f_s / 2` (reference mode): unity in the
    /// first Nyquist zone, zero outside.
    IdealLowpass,
    /// Practical chain: optional zero-order hold followed by a Butterworth
    /// low-pass of order `eta` (0 disables the low-pass).
    Chain { eta: u8, f_cut_hz: f64, zoh: bool },
}

/// ZOH frequency response `e^{-j pi f T_s} sinc(f T_s)`.
pub fn zoh_response(f_hz: f64, sample_period_s: f64) -> C64 {
    let ft = f_hz * sample_period_s;
    C64::cis(-PI * ft) * sinc(ft)
}

/// Butterworth low-pass response: `(1 + j f/f_cut)^{-1}` for order 1,
/// `(1 + j sqrt(2) f/f_cut - (f/f_cut)^2)^{-1}` for order 2, unity for
/// order 0.
pub fn butterworth_response(f_hz: f64, f_cut_hz: f64, eta: u8) -> Result<C64> {
    match eta {
        0 => Ok(C64::new(1.0, 0.0)),
        1 | 2 => {
            if !(f_cut_hz > 0.0) {
                return Err(Error::Config("cut-off frequency must be positive".into()));
            }
            let r = f_hz / f_cut_hz;
            let den = if eta == 1 {
                C64::new(1.0, r)
            } else {
                C64::new(1.0 - r * r, std::f64::consts::SQRT_2 * r)
            };
            Ok(den.finv())
        }
        _ => Err(Error::Config(format!(
            "unsupported Butterworth order {eta}; supported orders are 0, 1, 2"
        ))),
    }
}

/// Reconstruction chain sampled on the subcarrier grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterChain {
    pub mode: ReconFilter,
    pub sample_period_s: f64,
    /// `r_k` at the signed bin frequencies, `k = 0..N-1`.
    pub response: Vec<C64>,
}

impl FilterChain {
    /// Evaluates the chain at the bin frequencies `p(k) * delta_f`.
    pub fn sampled(grid: &SystemGrid, mode: ReconFilter) -> Result<Self> {
        let ts = 1.0 / grid.fs_hz;
        let response = match mode {
            ReconFilter::IdealLowpass => vec![C64::new(1.0, 0.0); grid.n],
            ReconFilter::Chain { eta, f_cut_hz, zoh } => {
                if eta == 0 && !zoh {
                    return Err(Error::Config(
                        "a chain with no hold and no low-pass is not a reconstruction \
                         stage; use the ideal low-pass mode"
                            .into(),
                    ));
                }
                (0..grid.n)
                    .map(|k| {
                        let f = grid.bin_freq_hz(k)?;
                        let lp = butterworth_response(f, f_cut_hz, eta)?;
                        let hold = if zoh { zoh_response(f, ts) } else { C64::new(1.0, 0.0) };
                        Ok(lp * hold)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        debug_assert!(response.iter().all(|r| r.norm() <= 1.0 + 1e-12));
        Ok(Self {
            mode,
            sample_period_s: ts,
            response,
        })
    }

    /// Predistortion coefficients: `r_k^{-1}` on occupied subcarriers, zero on
    /// guards. Signals a near-singular inversion when any occupied response
    /// magnitude falls below `1e-6`.
    pub fn dpd_coefficients(&self, grid: &SystemGrid) -> Result<Vec<C64>> {
        let mut coeff = vec![C64::new(0.0, 0.0); grid.n];
        for &k in grid.occupied() {
            let r = self.response[k];
            if r.norm() < 1e-6 {
                return Err(Error::Numerical(format!(
                    "reconstruction response nearly singular at bin {k} (|r| = {:.3e})",
                    r.norm()
                )));
            }
            coeff[k] = r.finv();
        }
        Ok(coeff)
    }

    /// Response of the reconstruction stage at a signed index `p` of the
    /// measurement grid, with the hold evaluated in its `meas_factor`-sample
    /// staircase form — exactly the response the time-domain simulator
    /// realizes, so analytical and empirical spectra share one convention.
    pub fn measured_response(&self, p: i64, grid: &SystemGrid) -> C64 {
        match self.mode {
            ReconFilter::IdealLowpass => {
                let half = grid.n as i64 / 2;
                if (-half..half).contains(&p) {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }
            ReconFilter::Chain { eta, f_cut_hz, zoh } => {
                let f = p as f64 * grid.delta_f_hz;
                let lp = butterworth_response(f, f_cut_hz, eta)
                    .expect("order validated at construction");
                let hold = if zoh {
                    staircase_zoh_response(p, grid.n, grid.meas_factor)
                } else {
                    C64::new(1.0, 0.0)
                };
                lp * hold
            }
        }
    }

    /// Effective reconstruction memory in samples at the DAC rate, used for
    /// the cyclic-prefix budget check. Covers six time constants of the
    /// low-pass pole plus one sample for the hold.
    pub fn effective_length_samples(&self, fs_hz: f64) -> usize {
        match self.mode {
            ReconFilter::IdealLowpass => 0,
            ReconFilter::Chain { eta, f_cut_hz, zoh } => {
                let lp = if eta > 0 {
                    (6.0 * fs_hz / (2.0 * PI * f_cut_hz)).ceil() as usize
                } else {
                    0
                };
                lp + usize::from(zoh)
            }
        }
    }
}

/// Frequency response of the `meas_factor`-sample staircase hold at signed
/// measurement bin `p`, normalized to unity at DC.
pub fn staircase_zoh_response(p: i64, n: usize, meas_factor: usize) -> C64 {
    let m = (n * meas_factor) as f64;
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..meas_factor {
        acc += C64::cis(-2.0 * PI * p as f64 * i as f64 / m);
    }
    acc / meas_factor as f64
}

/// Power rescale factor restoring the transmit budget after predistortion:
/// `xi = sqrt(sum_k t_k / sum_k t_k / |r_k|^2)` over occupied bins, where
/// `t_k` is the precoder trace on bin `k`. Always `<= 1`.
pub fn power_rescale_xi(precoder_powers: &[(usize, f64)], response: &[C64]) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for &(k, t) in precoder_powers {
        if k >= response.len() {
            return Err(Error::Dimension(format!(
                "precoder bin {k} outside the response grid"
            )));
        }
        num += t;
        den += t / response[k].norm_sqr();
    }
    if !(num > 0.0) {
        return Err(Error::Numerical("zero precoder energy".into()));
    }
    Ok((num / den).sqrt())
}
