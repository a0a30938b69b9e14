//! Physical-layer engine for a quantized massive MU-MIMO-OFDM downlink.
//!
//! The transmit chain modeled here is: per-subcarrier zero-forcing precoding,
//! frequency-domain predistortion of the reconstruction filters, low-resolution
//! DACs (symmetric uniform quantizers), a zero-order-hold plus Butterworth
//! reconstruction stage, and a frequency-selective line-of-sight channel to
//! single-antenna users.
//!
//! Two evaluation routes are provided and cross-validated:
//!
//! * [`bussgang`] — closed-form analysis after Bussgang linearization of the
//!   quantizer (exact arcsine-law covariance for 1-bit DACs), producing SINDR,
//!   BER, PSD, radiation patterns and ACLR.
//! * [`montecarlo`] — a time-domain simulator on an oversampled measurement
//!   grid producing empirical PSD, BER, ACLR and PAR estimates.

pub mod bussgang;
pub mod channel;
pub mod cmat;
pub mod error;
pub mod fft;
pub mod filters;
pub mod grid;
pub mod math;
pub mod montecarlo;
pub mod precoder;
pub mod quantizer;
pub mod rng;

pub use error::{Error, Result};
pub use grid::SystemGrid;

/// Complex double-precision sample, the base numeric type of the crate.
pub type C64 = num_complex::Complex64;
