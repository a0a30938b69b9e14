//! Per-subcarrier zero-forcing precoding, payload symbol generation, and
//! assembly of the predistorted time-domain DAC input.

use crate::channel::ChannelRealization;
use crate::cmat::{solve_lu, CMat};
use crate::error::{Error, Result};
use crate::fft::Dft;
use crate::grid::SystemGrid;
use crate::rng::standard_complex;
use crate::C64;
use rand::Rng;

/// Zero-forcing precoder set: `P_k = c * H_k^H (H_k H_k^H)^{-1}` on occupied
/// subcarriers with the common constant `c` chosen so the average
/// per-subcarrier transmit energy is one; zero matrices on guards.
#[derive(Debug, Clone)]
pub struct PrecoderSet {
    matrices: Vec<Option<CMat>>,
    /// The common scaling constant (array gain of the ZF inverse).
    pub norm_const: f64,
    /// `(k, tr(P_k P_k^H))` for each occupied subcarrier.
    pub powers: Vec<(usize, f64)>,
}

impl PrecoderSet {
    pub fn matrix(&self, k: usize) -> Option<&CMat> {
        self.matrices.get(k).and_then(|m| m.as_ref())
    }
}

/// Builds the ZF precoder from the per-subcarrier channel responses.
pub fn zf_precoder(channel: &ChannelRealization, grid: &SystemGrid) -> Result<PrecoderSet> {
    if channel.freq.len() != grid.n {
        return Err(Error::Dimension(format!(
            "channel has {} subcarriers, grid expects {}",
            channel.freq.len(),
            grid.n
        )));
    }
    let users = grid.users;
    let mut raw: Vec<Option<CMat>> = vec![None; grid.n];
    let mut inv_traces = Vec::with_capacity(grid.s);
    for &k in grid.occupied() {
        let h = &channel.freq[k];
        if h.rows() != users || h.cols() != grid.antennas {
            return Err(Error::Dimension(format!(
                "channel block at bin {k} is {}x{}",
                h.rows(),
                h.cols()
            )));
        }
        let gram = h.mul(&h.conj_transpose());
        let inv = solve_lu(&gram, &CMat::identity(users)).map_err(|e| {
            Error::Numerical(format!("zero-forcing failed at bin {k}: {e}"))
        })?;
        // tr(P_raw P_raw^H) = tr((H H^H)^{-1}) for P_raw = H^H (H H^H)^{-1}.
        inv_traces.push((k, inv.trace().re));
        raw[k] = Some(h.conj_transpose().mul(&inv));
    }
    let mean_trace: f64 =
        inv_traces.iter().map(|&(_, t)| t).sum::<f64>() / grid.s as f64;
    if !(mean_trace > 0.0) {
        return Err(Error::Numerical("degenerate zero-forcing normalization".into()));
    }
    let norm_const = 1.0 / mean_trace.sqrt();
    let mut powers = Vec::with_capacity(grid.s);
    for (k, t) in inv_traces {
        if let Some(m) = raw[k].as_mut() {
            m.scale(norm_const);
        }
        powers.push((k, norm_const * norm_const * t));
    }
    Ok(PrecoderSet {
        matrices: raw,
        norm_const,
        powers,
    })
}

/// Payload constellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constellation {
    /// Unit-energy QPSK points `(+-1 +- j)/sqrt(2)`.
    Qpsk,
    /// Circularly symmetric unit-variance Gaussian (the distribution assumed
    /// by the linearized analysis).
    Gaussian,
}

/// Frequency-domain payload for one OFDM symbol: a `U`-vector per subcarrier,
/// zero on guards.
#[derive(Debug, Clone)]
pub struct SymbolFrame {
    pub symbols: Vec<Vec<C64>>,
    pub constellation: Constellation,
}

impl SymbolFrame {
    /// All-zero frame (muted transmitter); marked Gaussian so no bit
    /// detection is attempted on it.
    pub fn zeros(grid: &SystemGrid) -> Self {
        Self {
            symbols: vec![vec![C64::new(0.0, 0.0); grid.users]; grid.n],
            constellation: Constellation::Gaussian,
        }
    }
}

/// Draws one frame of payload symbols on the occupied subcarriers.
pub fn draw_symbols<R: Rng + ?Sized>(
    grid: &SystemGrid,
    constellation: Constellation,
    rng: &mut R,
) -> SymbolFrame {
    let mut frame = SymbolFrame::zeros(grid);
    frame.constellation = constellation;
    for &k in grid.occupied() {
        for s in frame.symbols[k].iter_mut() {
            *s = match constellation {
                Constellation::Qpsk => {
                    let re = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    let im = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                }
                Constellation::Gaussian => standard_complex(rng),
            };
        }
    }
    frame
}

/// Precodes, predistorts, rescales and inverse-transforms one frame into the
/// time-domain DAC input `Z` (`antennas x N`), using the unitary DFT.
pub fn form_dac_input(
    frame: &SymbolFrame,
    precoder: &PrecoderSet,
    dpd: &[C64],
    xi: f64,
    grid: &SystemGrid,
    dft: &Dft,
) -> Result<Vec<Vec<C64>>> {
    if frame.symbols.len() != grid.n || dpd.len() != grid.n || dft.len() != grid.n {
        return Err(Error::Dimension(
            "frame, predistortion vector and transform must all match the grid".into(),
        ));
    }
    let mut spectra = vec![vec![C64::new(0.0, 0.0); grid.n]; grid.antennas];
    for &k in grid.occupied() {
        let p = precoder
            .matrix(k)
            .ok_or_else(|| Error::Dimension(format!("missing precoder at bin {k}")))?;
        let w = p.mul_vec(&frame.symbols[k]);
        let scale = dpd[k] * xi;
        for (b, wb) in w.into_iter().enumerate() {
            spectra[b][k] = wb * scale;
        }
    }
    for row in spectra.iter_mut() {
        dft.inverse_unitary(row);
    }
    Ok(spectra)
}

/// Per-sample covariance of the DAC input,
/// `C_zn = (xi^2 / N) sum_k (r_k^{-1} P_k)(r_k^{-1} P_k)^H`.
pub fn dac_input_covariance(
    precoder: &PrecoderSet,
    dpd: &[C64],
    xi: f64,
    grid: &SystemGrid,
) -> Result<CMat> {
    let mut c = CMat::zeros(grid.antennas, grid.antennas);
    for &k in grid.occupied() {
        let p = precoder
            .matrix(k)
            .ok_or_else(|| Error::Dimension(format!("missing precoder at bin {k}")))?;
        let block = p.mul(&p.conj_transpose());
        let w = dpd[k].norm_sqr();
        for r in 0..grid.antennas {
            for cc in 0..grid.antennas {
                c[(r, cc)] += block[(r, cc)] * w;
            }
        }
    }
    c.scale(xi * xi / grid.n as f64);
    Ok(c)
}
