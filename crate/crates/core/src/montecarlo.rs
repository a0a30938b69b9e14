//! Time-domain end-to-end simulation on the oversampled measurement grid.
//!
//! One OFDM symbol travels the full chain: symbol draw, precoding with
//! predistortion, inverse transform, samplewise quantization, staircase hold
//! onto the measurement grid, low-pass reconstruction, brick-wall decimation
//! back to the DAC rate (the users' anti-alias filter), cyclic-prefixed
//! channel convolution, noise, demodulation and QPSK detection. The cyclic
//! prefix absorbs both the channel memory and the reconstruction tail, so the
//! low-pass filter acts circularly on the symbol.

use crate::channel::ChannelRealization;
use crate::cmat::CMat;
use crate::error::{Error, Result};
use crate::fft::Dft;
use crate::filters::{butterworth_response, power_rescale_xi, FilterChain, ReconFilter};
use crate::grid::{signed_bin_extended, SystemGrid};
use crate::precoder::{draw_symbols, form_dac_input, Constellation, PrecoderSet, SymbolFrame};
use crate::quantizer::DacModel;
use crate::rng::standard_complex;
use crate::C64;
use rand::Rng;

/// Everything produced by one simulated OFDM symbol.
#[derive(Debug, Clone)]
pub struct TrialResult {
    /// Reconstructed waveform on the measurement grid including the cyclic
    /// prefix, `B x meas_factor * (N + cp_len)`.
    pub tx_waveform: Vec<Vec<C64>>,
    /// Predistorted DAC input at the DAC rate, `B x N`.
    pub dac_input: Vec<Vec<C64>>,
    /// Transmit signal after reconstruction and anti-alias decimation,
    /// `B x N`.
    pub dac_rate_tx: Vec<Vec<C64>>,
    /// Frequency-domain receive values, `U x N`.
    pub rx_symbols: Vec<Vec<C64>>,
    pub bit_errors: u64,
    pub bits: u64,
    /// Per-antenna peak-to-average power ratio of the symbol in dB.
    pub par_db: Vec<f64>,
}

/// Peak-to-average power ratio `2 N max(||Re||_inf^2, ||Im||_inf^2) / ||x||_2^2`
/// in dB.
pub fn par_db(samples: &[C64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Dimension("empty waveform".into()));
    }
    let mut peak = 0.0f64;
    let mut energy = 0.0f64;
    for s in samples {
        peak = peak.max(s.re * s.re).max(s.im * s.im);
        energy += s.norm_sqr();
    }
    if !(energy > 0.0) {
        return Err(Error::Numerical("zero-energy waveform".into()));
    }
    Ok(10.0 * (2.0 * samples.len() as f64 * peak / energy).log10())
}

/// Fixed transmit-chain context reused across symbols and realizations.
pub struct Simulator {
    grid: SystemGrid,
    chain: FilterChain,
    dpd: Vec<C64>,
    dft_n: Dft,
    dft_fine: Dft,
}

impl Simulator {
    /// Validates the cyclic-prefix budget against the channel and filter
    /// memory and precomputes the predistortion coefficients.
    pub fn new(grid: SystemGrid, chain: FilterChain, channel_taps: usize) -> Result<Self> {
        let filter_len = chain.effective_length_samples(grid.fs_hz);
        let needed = channel_taps.saturating_sub(1) + filter_len;
        if grid.cp_len < needed {
            return Err(Error::Config(format!(
                "cyclic prefix of {} samples cannot absorb {} channel taps plus a \
                 reconstruction memory of {} samples",
                grid.cp_len, channel_taps, filter_len
            )));
        }
        let dpd = chain.dpd_coefficients(&grid)?;
        let dft_n = Dft::new(grid.n);
        let dft_fine = Dft::new(grid.meas_len());
        Ok(Self {
            grid,
            chain,
            dpd,
            dft_n,
            dft_fine,
        })
    }

    pub fn grid(&self) -> &SystemGrid {
        &self.grid
    }

    pub fn chain(&self) -> &FilterChain {
        &self.chain
    }

    /// Reconstruction stage: quantized DAC-rate samples to the measurement
    /// grid. The hold is realized as a `meas_factor`-sample staircase; the
    /// low-pass acts in the frequency domain on the circular symbol. The
    /// ideal mode band-limits to the first Nyquist zone instead.
    pub fn reconstruct_fine(&self, q: &[C64]) -> Vec<C64> {
        let mf = self.grid.meas_factor;
        let n = self.grid.n;
        let m = self.grid.meas_len();
        match self.chain.mode {
            ReconFilter::Chain { eta, f_cut_hz, zoh: true } => {
                let mut fine = Vec::with_capacity(m);
                for &s in q {
                    fine.extend(std::iter::repeat(s).take(mf));
                }
                if eta > 0 {
                    self.dft_fine.forward_raw(&mut fine);
                    for (idx, v) in fine.iter_mut().enumerate() {
                        let p = signed_bin_extended(idx, m).expect("meas grid is even");
                        let f = p as f64 * self.grid.delta_f_hz;
                        *v *= butterworth_response(f, f_cut_hz, eta)
                            .expect("order validated at construction");
                    }
                    self.dft_fine.inverse_raw(&mut fine);
                    let scale = 1.0 / m as f64;
                    for v in fine.iter_mut() {
                        *v *= scale;
                    }
                }
                fine
            }
            mode => {
                // No hold: band-limited interpolation by zero-padding the
                // DAC-rate spectrum, with the low-pass applied when present.
                let lp = match mode {
                    ReconFilter::Chain {
                        eta,
                        f_cut_hz,
                        zoh: false,
                    } if eta > 0 => Some((eta, f_cut_hz)),
                    _ => None,
                };
                let mut base = q.to_vec();
                self.dft_n.forward_raw(&mut base);
                let mut fine = vec![C64::new(0.0, 0.0); m];
                for (k, &v) in base.iter().enumerate() {
                    let p = self.grid.signed_bin(k).expect("validated grid");
                    let idx = p.rem_euclid(m as i64) as usize;
                    fine[idx] = match lp {
                        Some((eta, f_cut_hz)) => {
                            v * butterworth_response(p as f64 * self.grid.delta_f_hz, f_cut_hz, eta)
                                .expect("order validated at construction")
                        }
                        None => v,
                    };
                }
                self.dft_fine.inverse_raw(&mut fine);
                let scale = 1.0 / n as f64;
                for v in fine.iter_mut() {
                    *v *= scale;
                }
                fine
            }
        }
    }

    /// The users' ideal anti-alias front end: brick-wall at `f_s/2` and
    /// resampling at the DAC rate.
    fn decimate(&self, fine: &[C64]) -> Vec<C64> {
        let n = self.grid.n;
        let m = self.grid.meas_len();
        let mut spec = fine.to_vec();
        self.dft_fine.forward_raw(&mut spec);
        let mut base = vec![C64::new(0.0, 0.0); n];
        let scale = 1.0 / m as f64;
        for (k, v) in base.iter_mut().enumerate() {
            let p = self.grid.signed_bin(k).expect("validated grid");
            let idx = p.rem_euclid(m as i64) as usize;
            *v = spec[idx] * scale;
        }
        self.dft_n.inverse_raw(&mut base);
        base
    }

    /// Runs one OFDM symbol for a frame supplied by the caller.
    pub fn simulate_frame<R: Rng + ?Sized>(
        &self,
        dac: &DacModel,
        frame: &SymbolFrame,
        channel: &ChannelRealization,
        precoder: &PrecoderSet,
        n0: f64,
        noise_rng: &mut R,
    ) -> Result<TrialResult> {
        let grid = &self.grid;
        let (b_ant, users, n) = (grid.antennas, grid.users, grid.n);
        if channel.taps.is_empty() || channel.freq.len() != n {
            return Err(Error::Dimension("channel does not match the grid".into()));
        }
        let xi = power_rescale_xi(&precoder.powers, &self.chain.response)?;
        let z = form_dac_input(frame, precoder, &self.dpd, xi, grid, &self.dft_n)?;

        let mf = grid.meas_factor;
        let cp_fine = mf * grid.cp_len;
        let mut tx_waveform = Vec::with_capacity(b_ant);
        let mut dac_rate_tx = Vec::with_capacity(b_ant);
        let mut par = Vec::with_capacity(b_ant);
        for zb in &z {
            let q: Vec<C64> = zb.iter().map(|&v| dac.quantize(v)).collect();
            let fine = self.reconstruct_fine(&q);
            let stride: Vec<C64> = (0..n).map(|i| fine[i * mf]).collect();
            // A muted antenna has no defined PAR.
            par.push(par_db(&stride).unwrap_or(f64::NAN));
            dac_rate_tx.push(self.decimate(&fine));
            let mut with_cp = Vec::with_capacity(fine.len() + cp_fine);
            with_cp.extend_from_slice(&fine[fine.len() - cp_fine..]);
            with_cp.extend_from_slice(&fine);
            tx_waveform.push(with_cp);
        }

        // Cyclic-prefixed linear convolution with the channel taps at the DAC
        // rate, then prefix removal.
        let cp = grid.cp_len;
        let ext: Vec<Vec<C64>> = dac_rate_tx
            .iter()
            .map(|x| {
                let mut e = Vec::with_capacity(cp + n);
                e.extend_from_slice(&x[n - cp..]);
                e.extend_from_slice(x);
                e
            })
            .collect();
        let mut rx_time = vec![vec![C64::new(0.0, 0.0); n]; users];
        for (l, tap) in channel.taps.iter().enumerate() {
            for sample in 0..n {
                let idx = cp + sample - l;
                for u in 0..users {
                    let mut acc = C64::new(0.0, 0.0);
                    for b in 0..b_ant {
                        acc += tap[(u, b)] * ext[b][idx];
                    }
                    rx_time[u][sample] += acc;
                }
            }
        }
        if n0 > 0.0 {
            let amp = n0.sqrt();
            for row in rx_time.iter_mut() {
                for v in row.iter_mut() {
                    *v += standard_complex(noise_rng) * amp;
                }
            }
        }
        let mut rx_symbols = rx_time;
        for row in rx_symbols.iter_mut() {
            self.dft_n.forward_unitary(row);
        }

        let (bit_errors, bits) = match frame.constellation {
            Constellation::Qpsk => detect_qpsk_errors(&rx_symbols, frame, grid),
            Constellation::Gaussian => (0, 0),
        };

        Ok(TrialResult {
            tx_waveform,
            dac_input: z,
            dac_rate_tx,
            rx_symbols,
            bit_errors,
            bits,
            par_db: par,
        })
    }

    /// Draws a fresh frame and runs one OFDM symbol through the chain.
    #[allow(clippy::too_many_arguments)]
    pub fn simulate_symbol<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &self,
        dac: &DacModel,
        channel: &ChannelRealization,
        precoder: &PrecoderSet,
        constellation: Constellation,
        n0: f64,
        symbol_rng: &mut R1,
        noise_rng: &mut R2,
    ) -> Result<TrialResult> {
        let frame = draw_symbols(&self.grid, constellation, symbol_rng);
        self.simulate_frame(dac, &frame, channel, precoder, n0, noise_rng)
    }
}

/// Per-subcarrier sign detection of QPSK bits (the zero-forcing chain leaves
/// a positive real scalar, so no equalization is needed).
pub fn detect_qpsk_errors(
    rx_symbols: &[Vec<C64>],
    frame: &SymbolFrame,
    grid: &SystemGrid,
) -> (u64, u64) {
    let mut errors = 0u64;
    let mut bits = 0u64;
    for &k in grid.occupied() {
        for u in 0..grid.users {
            let tx = frame.symbols[k][u];
            let rx = rx_symbols[u][k];
            if (tx.re > 0.0) != (rx.re > 0.0) {
                errors += 1;
            }
            if (tx.im > 0.0) != (rx.im > 0.0) {
                errors += 1;
            }
            bits += 2;
        }
    }
    (errors, bits)
}

/// Averaged periodogram of the reconstructed transmit waveform on the
/// measurement grid, normalized so in-range bins match the per-subcarrier
/// power of the DAC-rate signal.
pub struct PsdAccumulator {
    meas_len: usize,
    meas_factor: usize,
    sums: Vec<Vec<f64>>,
    symbols: u64,
    dft: Dft,
}

impl PsdAccumulator {
    pub fn new(grid: &SystemGrid) -> Self {
        Self {
            meas_len: grid.meas_len(),
            meas_factor: grid.meas_factor,
            sums: vec![vec![0.0; grid.meas_len()]; grid.antennas],
            symbols: 0,
            dft: Dft::new(grid.meas_len()),
        }
    }

    /// Adds the prefix-free portion of a simulated symbol.
    pub fn add(&mut self, trial: &TrialResult) {
        for (b, wave) in trial.tx_waveform.iter().enumerate() {
            let mut buf = wave[wave.len() - self.meas_len..].to_vec();
            self.dft.forward_unitary(&mut buf);
            let inv_mf = 1.0 / self.meas_factor as f64;
            for (s, v) in self.sums[b].iter_mut().zip(&buf) {
                *s += v.norm_sqr() * inv_mf;
            }
        }
        self.symbols += 1;
    }

    pub fn symbols(&self) -> u64 {
        self.symbols
    }

    /// Mean PSD over antennas and accumulated symbols (DFT bin order).
    pub fn mean_psd(&self) -> Vec<f64> {
        let count = (self.symbols.max(1) as f64) * self.sums.len() as f64;
        let mut out = vec![0.0; self.meas_len];
        for row in &self.sums {
            for (o, &v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        for o in out.iter_mut() {
            *o /= count;
        }
        out
    }

    /// Per-antenna PSD averaged over the accumulated symbols.
    pub fn per_antenna_psd(&self) -> Vec<Vec<f64>> {
        let count = self.symbols.max(1) as f64;
        self.sums
            .iter()
            .map(|row| row.iter().map(|&v| v / count).collect())
            .collect()
    }
}

/// Averaged periodogram of the digital DAC input, extended periodically onto
/// the measurement grid.
pub struct InputPsdAccumulator {
    sums: Vec<f64>,
    count: u64,
    dft: Dft,
}

impl InputPsdAccumulator {
    pub fn new(grid: &SystemGrid) -> Self {
        Self {
            sums: vec![0.0; grid.n],
            count: 0,
            dft: Dft::new(grid.n),
        }
    }

    pub fn add(&mut self, trial: &TrialResult) {
        for zb in &trial.dac_input {
            let mut buf = zb.clone();
            self.dft.forward_unitary(&mut buf);
            for (s, v) in self.sums.iter_mut().zip(&buf) {
                *s += v.norm_sqr();
            }
        }
        self.count += trial.dac_input.len() as u64;
    }

    /// Mean input PSD replicated onto the measurement grid.
    pub fn extended_psd(&self, grid: &SystemGrid) -> Result<Vec<f64>> {
        let m = grid.meas_len();
        let count = self.count.max(1) as f64;
        let mut out = vec![0.0; m];
        for (idx, o) in out.iter_mut().enumerate() {
            let p = signed_bin_extended(idx, m)?;
            *o = self.sums[grid.bin_of_signed(p)] / count;
        }
        Ok(out)
    }
}

/// Convenience wrapper: averaged transmit PSD of a batch of trials.
pub fn empirical_psd(trials: &[TrialResult], grid: &SystemGrid) -> Result<Vec<f64>> {
    if trials.is_empty() {
        return Err(Error::Dimension("no trials to average".into()));
    }
    let mut acc = PsdAccumulator::new(grid);
    for t in trials {
        acc.add(t);
    }
    Ok(acc.mean_psd())
}

/// Adjacent-channel leakage ratio from per-antenna empirical PSDs on the
/// measurement grid: same bin sets as the analytical route, worse adjacent
/// channel over in-band power, averaged over antennas.
pub fn empirical_aclr(per_antenna_psd: &[Vec<f64>], grid: &SystemGrid) -> Result<f64> {
    if per_antenna_psd.is_empty() {
        return Err(Error::Dimension("no PSDs supplied".into()));
    }
    let m = grid.meas_len();
    let to_ext = |k: usize| -> Result<usize> {
        let p = grid.signed_bin(k)?;
        Ok(p.rem_euclid(m as i64) as usize)
    };
    let (lower, upper) = grid.adjacent_bin_sets()?;
    let inband = grid.inband_psd_bins();
    let mut acc = 0.0;
    for psd in per_antenna_psd {
        if psd.len() != m {
            return Err(Error::Dimension("PSD grid mismatch".into()));
        }
        let band = |bins: &[usize]| -> Result<f64> {
            bins.iter().map(|&k| Ok(psd[to_ext(k)?])).sum()
        };
        let inband_power = band(&inband)?;
        if !(inband_power > 0.0) {
            return Err(Error::Numerical("zero in-band power in ACLR".into()));
        }
        acc += band(&lower)?.max(band(&upper)?) / inband_power;
    }
    Ok(acc / per_antenna_psd.len() as f64)
}

/// Accumulates in-band and adjacent-channel covariances of the DAC-rate
/// transmit spectrum, the empirical counterparts of the analytical band
/// covariances used for radiation patterns.
pub struct BandCovAccumulator {
    inband: CMat,
    adjacent: CMat,
    pub inband_bins: usize,
    pub adjacent_bins: usize,
    inband_set: Vec<usize>,
    adjacent_set: Vec<usize>,
    symbols: u64,
    dft: Dft,
}

impl BandCovAccumulator {
    pub fn new(grid: &SystemGrid) -> Result<Self> {
        let (lower, upper) = grid.adjacent_bin_sets()?;
        let mut adjacent_set = lower;
        adjacent_set.extend(upper);
        Ok(Self {
            inband: CMat::zeros(grid.antennas, grid.antennas),
            adjacent: CMat::zeros(grid.antennas, grid.antennas),
            inband_bins: grid.s + 1,
            adjacent_bins: 2 * grid.s + 2,
            inband_set: grid.inband_psd_bins(),
            adjacent_set,
            symbols: 0,
            dft: Dft::new(grid.n),
        })
    }

    pub fn add(&mut self, trial: &TrialResult) {
        let b = trial.dac_rate_tx.len();
        let n = self.dft.len();
        let mut spectra = vec![vec![C64::new(0.0, 0.0); n]; b];
        for (row, x) in spectra.iter_mut().zip(&trial.dac_rate_tx) {
            row.copy_from_slice(x);
            self.dft.forward_unitary(row);
        }
        let mut col = vec![C64::new(0.0, 0.0); b];
        for &k in &self.inband_set {
            for (c, row) in col.iter_mut().zip(&spectra) {
                *c = row[k];
            }
            self.inband.accumulate_outer(&col, &col, 1.0);
        }
        for &k in &self.adjacent_set {
            for (c, row) in col.iter_mut().zip(&spectra) {
                *c = row[k];
            }
            self.adjacent.accumulate_outer(&col, &col, 1.0);
        }
        self.symbols += 1;
    }

    /// `(in-band, adjacent)` covariances averaged per symbol.
    pub fn band_covariances(&self) -> (CMat, CMat) {
        let s = 1.0 / self.symbols.max(1) as f64;
        (self.inband.scaled(s), self.adjacent.scaled(s))
    }
}
