//! Closed-form evaluation of the quantized downlink after Bussgang
//! linearization.
//!
//! The stacked space-time covariance of the DAC input is block-circulant over
//! the time index, so every quantity here reduces to per-subcarrier
//! `B x B` blocks connected to time-lag blocks by length-`N` DFTs. The
//! quantized-output covariance is obtained per antenna pair from the lag
//! blocks: exactly via the arcsine law for 1-bit DACs, via a white-distortion
//! approximation or a seeded Monte-Carlo estimate for multi-bit DACs. Dense
//! stacked matrices are only ever materialized by the desk-scale reference
//! helpers.

use crate::channel::ChannelRealization;
use crate::cmat::CMat;
use crate::error::{Error, Result};
use crate::fft::Dft;
use crate::filters::{power_rescale_xi, FilterChain};
use crate::grid::{signed_bin_extended, SystemGrid};
use crate::math::q_function;
use crate::precoder::PrecoderSet;
use crate::quantizer::{clamped_asin, multibit_output_covariance, DacModel, MultibitMethod};
use crate::rng::{substream, StreamDomain};
use crate::C64;
use std::f64::consts::PI;

/// How the quantized-output covariance is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceMethod {
    /// Arcsine law for 1-bit, white-distortion approximation for multi-bit,
    /// identity for infinite resolution.
    Auto,
    /// Exact arcsine law (1-bit only).
    Arcsine,
    /// `G C_z G + D` with diagonal distortion (2 bits and up).
    DiagonalDistortion,
    /// Seeded Monte-Carlo estimate over the dense stacked covariance; a
    /// desk-scale validation mode.
    MonteCarlo { draws: usize, seed: u64 },
}

/// Bussgang-linearized transmitter model for one channel realization.
#[derive(Debug, Clone)]
pub struct LinearizedModel {
    /// Per-antenna Bussgang gains (all ones for infinite resolution).
    pub gain: Vec<f64>,
    /// Predistortion power rescale.
    pub xi: f64,
    /// Zero-forcing normalization constant of the underlying precoder.
    pub norm_const: f64,
    /// Per-sample DAC-input covariance `C_zn` (`B x B`).
    pub input_cov_sample: CMat,
    /// Per-subcarrier input covariance blocks `xi^2 |r_k|^{-2} P_k P_k^H` on
    /// occupied bins.
    pub input_freq_blocks: Vec<Option<CMat>>,
    /// Diagonal of the quantized-output covariance per subcarrier
    /// (`N x B`), before reconstruction filtering.
    pub quant_psd: Vec<Vec<f64>>,
    /// Distortion covariance blocks `C_k - diag(g) S_k diag(g)` on occupied
    /// bins.
    pub distortion_blocks: Vec<Option<CMat>>,
    /// `sum_{k in S u {0}} |r_k|^2 C_k` and its bin count.
    pub inband_cov: CMat,
    pub inband_bins: usize,
    /// Adjacent-channel analog of `inband_cov`, when the adjacent bands fit
    /// inside the Nyquist range.
    pub adjacent_cov: Option<CMat>,
    pub adjacent_bins: usize,
    /// Sampled reconstruction response `r_k` used by the model.
    pub response: Vec<C64>,
}

/// Builds the linearized model for one precoded channel realization.
pub fn build_linearized_model(
    grid: &SystemGrid,
    chain: &FilterChain,
    precoder: &PrecoderSet,
    dac: &DacModel,
    method: CovarianceMethod,
) -> Result<LinearizedModel> {
    let b = grid.antennas;
    let dpd = chain.dpd_coefficients(grid)?;
    let xi = power_rescale_xi(&precoder.powers, &chain.response)?;

    // Per-subcarrier input blocks S_k = xi^2 |r_k|^{-2} P_k P_k^H.
    let mut blocks: Vec<Option<CMat>> = vec![None; grid.n];
    for &k in grid.occupied() {
        let p = precoder
            .matrix(k)
            .ok_or_else(|| Error::Dimension(format!("missing precoder at bin {k}")))?;
        let mut block = p.mul(&p.conj_transpose());
        block.scale(xi * xi * dpd[k].norm_sqr());
        blocks[k] = Some(block);
    }

    // Per-sample covariance and its diagonal.
    let mut c_zn = CMat::zeros(b, b);
    for block in blocks.iter().flatten() {
        c_zn.add_assign(block);
    }
    c_zn.scale(1.0 / grid.n as f64);
    let variances: Vec<f64> = (0..b).map(|i| c_zn[(i, i)].re).collect();

    let gain: Vec<f64> = match dac {
        DacModel::Infinite => vec![1.0; b],
        DacModel::Quantized(spec) => spec.gain_vector(&variances)?,
    };

    let mut quant_psd = vec![vec![0.0; b]; grid.n];
    let mut distortion_blocks: Vec<Option<CMat>> = vec![None; grid.n];
    for &k in grid.occupied() {
        distortion_blocks[k] = Some(CMat::zeros(b, b));
    }
    let inband_set = grid.inband_psd_bins();
    let adjacent_set = grid.adjacent_bin_sets().ok().map(|(lower, upper)| {
        let mut set = lower;
        set.extend(upper);
        set
    });
    let weights: Vec<f64> = chain.response.iter().map(|r| r.norm_sqr()).collect();
    let mut inband_cov = CMat::zeros(b, b);
    let mut adjacent_cov = adjacent_set.as_ref().map(|_| CMat::zeros(b, b));

    visit_quantized_pair_spectra(grid, &blocks, &variances, dac, method, |i, j, spectrum| {
        if i == j {
            for (k, v) in spectrum.iter().enumerate() {
                quant_psd[k][i] = v.re.max(0.0);
            }
        }
        for &k in grid.occupied() {
            let lin = blocks[k]
                .as_ref()
                .map(|s| s[(i, j)] * (gain[i] * gain[j]))
                .unwrap_or_default();
            let d = spectrum[k] - lin;
            let block = distortion_blocks[k].as_mut().expect("allocated above");
            block[(i, j)] = d;
            if i != j {
                block[(j, i)] = d.conj();
            }
        }
        let accumulate = |cov: &mut CMat, bins: &[usize]| {
            for &k in bins {
                let w = weights[k];
                let v = spectrum[k] * w;
                cov[(i, j)] += v;
                if i != j {
                    cov[(j, i)] += v.conj();
                }
            }
        };
        accumulate(&mut inband_cov, &inband_set);
        if let (Some(cov), Some(set)) = (adjacent_cov.as_mut(), adjacent_set.as_ref()) {
            accumulate(cov, set);
        }
        Ok(())
    })?;

    Ok(LinearizedModel {
        gain,
        xi,
        norm_const: precoder.norm_const,
        input_cov_sample: c_zn,
        input_freq_blocks: blocks,
        quant_psd,
        distortion_blocks,
        inband_cov,
        inband_bins: grid.s + 1,
        adjacent_cov,
        adjacent_bins: 2 * grid.s + 2,
        response: chain.response.clone(),
    })
}

/// Streams the quantized-output covariance spectrum `C_k[i, j]` for every
/// antenna pair `i <= j` without materializing `B N x B N` matrices.
fn visit_quantized_pair_spectra<F>(
    grid: &SystemGrid,
    blocks: &[Option<CMat>],
    variances: &[f64],
    dac: &DacModel,
    method: CovarianceMethod,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(usize, usize, &[C64]) -> Result<()>,
{
    let b = grid.antennas;
    let n = grid.n;
    let spectrum_of = |i: usize, j: usize| -> Vec<C64> {
        (0..n)
            .map(|k| blocks[k].as_ref().map(|s| s[(i, j)]).unwrap_or_default())
            .collect()
    };
    let method = match (method, dac) {
        (CovarianceMethod::Auto, DacModel::Infinite) => CovarianceMethod::Auto,
        (CovarianceMethod::Auto, DacModel::Quantized(spec)) => {
            if spec.bits() == 1 {
                CovarianceMethod::Arcsine
            } else {
                CovarianceMethod::DiagonalDistortion
            }
        }
        (m, _) => m,
    };
    match (dac, method) {
        (DacModel::Infinite, _) => {
            for i in 0..b {
                for j in i..b {
                    visit(i, j, &spectrum_of(i, j))?;
                }
            }
        }
        (DacModel::Quantized(spec), CovarianceMethod::Arcsine) => {
            if spec.bits() != 1 {
                return Err(Error::Config(format!(
                    "arcsine covariance requires 1-bit DACs, got {} bits",
                    spec.bits()
                )));
            }
            let scale: Vec<f64> = variances
                .iter()
                .map(|&v| {
                    if v > 0.0 {
                        Ok(v.sqrt())
                    } else {
                        Err(Error::Numerical(
                            "zero DAC-input variance; arcsine normalization undefined".into(),
                        ))
                    }
                })
                .collect::<Result<_>>()?;
            let pref = 2.0 * spec.target_power() / PI;
            let dft = Dft::new(n);
            for i in 0..b {
                for j in i..b {
                    let mut buf = spectrum_of(i, j);
                    dft.inverse_raw(&mut buf);
                    let norm = 1.0 / (n as f64 * scale[i] * scale[j]);
                    for (t, v) in buf.iter_mut().enumerate() {
                        if t == 0 && i == j {
                            // Unit self-correlation by definition; evaluating
                            // it through the transform would put rounding on
                            // the infinite-slope edge of asin.
                            *v = C64::new(pref * PI / 2.0, 0.0);
                            continue;
                        }
                        *v = C64::new(
                            pref * clamped_asin(v.re * norm)?,
                            pref * clamped_asin(v.im * norm)?,
                        );
                    }
                    dft.forward_raw(&mut buf);
                    visit(i, j, &buf)?;
                }
            }
        }
        (DacModel::Quantized(spec), CovarianceMethod::DiagonalDistortion) => {
            if spec.bits() < 2 {
                return Err(Error::Config(
                    "the white-distortion approximation is a multi-bit mode; 1-bit has the \
                     exact arcsine law"
                        .into(),
                ));
            }
            let gains = spec.gain_vector(variances)?;
            let floors: Vec<f64> = variances
                .iter()
                .map(|&v| spec.distortion_power(v))
                .collect::<Result<_>>()?;
            for i in 0..b {
                for j in i..b {
                    let mut buf = spectrum_of(i, j);
                    let g = gains[i] * gains[j];
                    for v in buf.iter_mut() {
                        *v *= g;
                    }
                    if i == j {
                        for v in buf.iter_mut() {
                            *v += floors[i];
                        }
                    }
                    visit(i, j, &buf)?;
                }
            }
        }
        (DacModel::Quantized(spec), CovarianceMethod::MonteCarlo { draws, seed }) => {
            if b * n > 4096 {
                return Err(Error::Config(format!(
                    "monte-carlo covariance materializes a {0}x{0} matrix; desk scale only",
                    b * n
                )));
            }
            let dense_in = dense_covariance_from_blocks(blocks, b, n)?;
            let mut rng = substream(seed, StreamDomain::McCovariance, 0, 0);
            let dense_out = if spec.bits() == 1 {
                // The multi-bit entry point rejects 1-bit; sample it directly.
                sample_covariance_1bit(&dense_in, spec, draws, &mut rng)?
            } else {
                multibit_output_covariance(
                    &dense_in,
                    spec,
                    MultibitMethod::MonteCarlo { draws },
                    &mut rng,
                )?
            };
            let lags = circulant_projection(&dense_out, b, n);
            let dft = Dft::new(n);
            for i in 0..b {
                for j in i..b {
                    let mut buf: Vec<C64> = (0..n).map(|t| lags[t][(i, j)]).collect();
                    dft.forward_raw(&mut buf);
                    visit(i, j, &buf)?;
                }
            }
        }
        (DacModel::Quantized(_), CovarianceMethod::Auto) => unreachable!("resolved above"),
    }
    Ok(())
}

fn sample_covariance_1bit(
    c_z: &CMat,
    spec: &crate::quantizer::QuantizerSpec,
    draws: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<CMat> {
    let n = c_z.rows();
    let tol = 1e-12 * (1.0 + c_z.trace().re / n as f64);
    let l = crate::cmat::cholesky_psd(c_z, tol)?;
    let mut acc = CMat::zeros(n, n);
    let mut white = vec![C64::new(0.0, 0.0); n];
    let mut sample = vec![C64::new(0.0, 0.0); n];
    for _ in 0..draws {
        for w in white.iter_mut() {
            *w = crate::rng::standard_complex(rng);
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

/// Expands per-subcarrier blocks into the dense stacked covariance
/// (`(n b) x (n b)`, time-major); desk-scale reference path.
pub fn dense_covariance_from_blocks(
    blocks: &[Option<CMat>],
    b: usize,
    n: usize,
) -> Result<CMat> {
    if blocks.len() != n {
        return Err(Error::Dimension("expected one block per subcarrier".into()));
    }
    // Lag blocks c_t = (1/N) sum_k S_k e^{+j 2 pi k t / N}.
    let dft = Dft::new(n);
    let mut lags = vec![CMat::zeros(b, b); n];
    for i in 0..b {
        for j in 0..b {
            let mut buf: Vec<C64> = (0..n)
                .map(|k| blocks[k].as_ref().map(|s| s[(i, j)]).unwrap_or_default())
                .collect();
            dft.inverse_raw(&mut buf);
            for (t, v) in buf.iter().enumerate() {
                lags[t][(i, j)] = v / n as f64;
            }
        }
    }
    let mut dense = CMat::zeros(n * b, n * b);
    for row_t in 0..n {
        for col_t in 0..n {
            let lag = (row_t + n - col_t) % n;
            for i in 0..b {
                for j in 0..b {
                    dense[(row_t * b + i, col_t * b + j)] = lags[lag][(i, j)];
                }
            }
        }
    }
    Ok(dense)
}

/// Averages the block diagonals of a dense stacked covariance back onto the
/// circulant lag structure.
fn circulant_projection(dense: &CMat, b: usize, n: usize) -> Vec<CMat> {
    let mut lags = vec![CMat::zeros(b, b); n];
    for t in 0..n {
        let lag = &mut lags[t];
        for shift in 0..n {
            let row_t = (shift + t) % n;
            for i in 0..b {
                for j in 0..b {
                    lag[(i, j)] += dense[(row_t * b + i, shift * b + j)];
                }
            }
        }
        lag.scale(1.0 / n as f64);
    }
    lags
}

/// Materializes the quantized-output covariance blocks `C_k` for every
/// subcarrier; desk-scale diagnostics and tests.
pub fn quantized_freq_blocks(
    grid: &SystemGrid,
    chain: &FilterChain,
    precoder: &PrecoderSet,
    dac: &DacModel,
    method: CovarianceMethod,
) -> Result<Vec<CMat>> {
    let b = grid.antennas;
    let dpd = chain.dpd_coefficients(grid)?;
    let xi = power_rescale_xi(&precoder.powers, &chain.response)?;
    let mut blocks: Vec<Option<CMat>> = vec![None; grid.n];
    for &k in grid.occupied() {
        let p = precoder.matrix(k).expect("occupied bins are precoded");
        let mut block = p.mul(&p.conj_transpose());
        block.scale(xi * xi * dpd[k].norm_sqr());
        blocks[k] = Some(block);
    }
    let mut c_zn = CMat::zeros(b, b);
    for block in blocks.iter().flatten() {
        c_zn.add_assign(block);
    }
    c_zn.scale(1.0 / grid.n as f64);
    let variances: Vec<f64> = (0..b).map(|i| c_zn[(i, i)].re).collect();
    let mut out = vec![CMat::zeros(b, b); grid.n];
    visit_quantized_pair_spectra(grid, &blocks, &variances, dac, method, |i, j, spectrum| {
        for (k, &v) in spectrum.iter().enumerate() {
            out[k][(i, j)] = v;
            if i != j {
                out[k][(j, i)] = v.conj();
            }
        }
        Ok(())
    })?;
    Ok(out)
}

/// Builds the DAC model for one precoded realization: the step follows the
/// policy at the average input power `1/(B * OSR)` and the calibration
/// constant enforces the power constraint over the realization's per-antenna
/// variance profile.
pub fn calibrated_dac(
    bits: Option<u32>,
    policy: crate::quantizer::StepPolicy,
    grid: &SystemGrid,
    chain: &FilterChain,
    precoder: &PrecoderSet,
) -> Result<DacModel> {
    let bits = match bits {
        None => return Ok(DacModel::Infinite),
        Some(b) => b,
    };
    let dpd = chain.dpd_coefficients(grid)?;
    let xi = power_rescale_xi(&precoder.powers, &chain.response)?;
    let cov = crate::precoder::dac_input_covariance(precoder, &dpd, xi, grid)?;
    let variances: Vec<f64> = (0..grid.antennas).map(|i| cov[(i, i)].re).collect();
    let step = policy.resolve(bits, grid.target_power());
    Ok(DacModel::Quantized(
        crate::quantizer::QuantizerSpec::calibrate_mixture(
            bits,
            step,
            &variances,
            grid.antennas,
            grid.osr,
        )?,
    ))
}

/// SINDR values on the occupied subcarriers, `values[bin_index][user]`.
#[derive(Debug, Clone)]
pub struct SindrTable {
    pub bins: Vec<usize>,
    pub values: Vec<Vec<f64>>,
}

impl SindrTable {
    pub fn iter_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flatten().copied()
    }

    /// Linear mean over users and subcarriers.
    pub fn mean_linear(&self) -> f64 {
        let mut acc = 0.0;
        let mut count = 0usize;
        for v in self.iter_values() {
            acc += v;
            count += 1;
        }
        acc / count.max(1) as f64
    }
}

/// Noise-independent pieces of the SINDR: per user and occupied subcarrier,
/// the useful signal power, the residual multi-user interference, and the
/// filtered distortion power. Evaluating a noise sweep reuses them.
#[derive(Debug, Clone)]
pub struct SindrComponents {
    pub bins: Vec<usize>,
    signal: Vec<Vec<f64>>,
    interference: Vec<Vec<f64>>,
    distortion: Vec<Vec<f64>>,
}

impl SindrComponents {
    pub fn table(&self, n0: f64) -> SindrTable {
        let values = self
            .signal
            .iter()
            .zip(&self.interference)
            .zip(&self.distortion)
            .map(|((sig, intf), dist)| {
                sig.iter()
                    .zip(intf)
                    .zip(dist)
                    .map(|((&s, &i), &d)| {
                        let den = i + d + n0;
                        if den > 0.0 {
                            s / den
                        } else if s > 0.0 {
                            f64::INFINITY
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        SindrTable {
            bins: self.bins.clone(),
            values,
        }
    }
}

/// Computes the noise-independent SINDR components for every user and
/// occupied subcarrier.
pub fn sindr_components(
    model: &LinearizedModel,
    channel: &ChannelRealization,
    precoder: &PrecoderSet,
    grid: &SystemGrid,
) -> Result<SindrComponents> {
    let mut bins = Vec::with_capacity(grid.s);
    let mut signal = Vec::with_capacity(grid.s);
    let mut interference = Vec::with_capacity(grid.s);
    let mut distortion = Vec::with_capacity(grid.s);
    for &k in grid.occupied() {
        let (sig_k, intf_k, dist_k) = components_at_bin(model, channel, precoder, grid, k)?;
        bins.push(k);
        signal.push(sig_k);
        interference.push(intf_k);
        distortion.push(dist_k);
    }
    Ok(SindrComponents {
        bins,
        signal,
        interference,
        distortion,
    })
}

fn components_at_bin(
    model: &LinearizedModel,
    channel: &ChannelRealization,
    precoder: &PrecoderSet,
    grid: &SystemGrid,
    k: usize,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if !grid.is_occupied(k) {
        return Err(Error::Config(format!("subcarrier {k} is not occupied")));
    }
    let xi2 = model.xi * model.xi;
    let h = &channel.freq[k];
    let p = precoder
        .matrix(k)
        .ok_or_else(|| Error::Dimension(format!("missing precoder at bin {k}")))?;
    let mut gp = p.clone();
    for row in 0..grid.antennas {
        let g = model.gain[row];
        for col in 0..grid.users {
            gp[(row, col)] *= g;
        }
    }
    let m = h.mul(&gp);
    let dist = model.distortion_blocks[k]
        .as_ref()
        .ok_or_else(|| Error::Dimension(format!("missing distortion block at bin {k}")))?;
    let w = model.response[k].norm_sqr();
    let mut sig_k = Vec::with_capacity(grid.users);
    let mut intf_k = Vec::with_capacity(grid.users);
    let mut dist_k = Vec::with_capacity(grid.users);
    for u in 0..grid.users {
        sig_k.push(xi2 * m[(u, u)].norm_sqr());
        intf_k.push(
            (0..grid.users)
                .filter(|&v| v != u)
                .map(|v| m[(u, v)].norm_sqr())
                .sum::<f64>()
                * xi2,
        );
        dist_k.push(w * dist.quadratic_form_transpose(h.row(u)).max(0.0));
    }
    Ok((sig_k, intf_k, dist_k))
}

/// SINDR for every user and occupied subcarrier at noise level `n0`.
pub fn sindr_table(
    model: &LinearizedModel,
    channel: &ChannelRealization,
    precoder: &PrecoderSet,
    grid: &SystemGrid,
    n0: f64,
) -> Result<SindrTable> {
    Ok(sindr_components(model, channel, precoder, grid)?.table(n0))
}

/// SINDR of one user on one occupied subcarrier.
pub fn sindr(
    model: &LinearizedModel,
    channel: &ChannelRealization,
    precoder: &PrecoderSet,
    grid: &SystemGrid,
    user: usize,
    k: usize,
    n0: f64,
) -> Result<f64> {
    if user >= grid.users {
        return Err(Error::Dimension(format!("user {user} outside 0..{}", grid.users)));
    }
    Ok(sindr_at_bin(model, channel, precoder, grid, k, n0)?[user])
}

fn sindr_at_bin(
    model: &LinearizedModel,
    channel: &ChannelRealization,
    precoder: &PrecoderSet,
    grid: &SystemGrid,
    k: usize,
    n0: f64,
) -> Result<Vec<f64>> {
    let (sig, intf, dist) = components_at_bin(model, channel, precoder, grid, k)?;
    Ok(sig
        .into_iter()
        .zip(intf)
        .zip(dist)
        .map(|((s, i), d)| {
            let den = i + d + n0;
            if den > 0.0 {
                s / den
            } else if s > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .collect())
}

/// Uncoded QPSK bit-error rate from SINDR values:
/// `1 - mean(Phi(sqrt(SINDR)))`; infinite SINDR contributes zero errors.
pub fn analytical_ber(sindr_values: &[f64]) -> f64 {
    if sindr_values.is_empty() {
        return 0.0;
    }
    sindr_values
        .iter()
        .map(|&s| {
            if s.is_infinite() {
                0.0
            } else {
                q_function(s.max(0.0).sqrt())
            }
        })
        .sum::<f64>()
        / sindr_values.len() as f64
}

/// Analytical PSD of the reconstructed transmit signal on one antenna over
/// the measurement grid (`meas_factor * N` bins in DFT order).
///
/// In-range bins read the diagonal of the filtered covariance; beyond the
/// first Nyquist zone the quantized-signal PSD is extended periodically and
/// weighted by the reconstruction response at the true frequency.
pub fn analytical_psd_antenna(
    model: &LinearizedModel,
    chain: &FilterChain,
    grid: &SystemGrid,
    antenna: usize,
) -> Result<Vec<f64>> {
    if antenna >= grid.antennas {
        return Err(Error::Dimension(format!(
            "antenna {antenna} outside 0..{}",
            grid.antennas
        )));
    }
    let m = grid.meas_len();
    let mut psd = vec![0.0; m];
    for (idx, out) in psd.iter_mut().enumerate() {
        let p = signed_bin_extended(idx, m)?;
        let k = grid.bin_of_signed(p);
        let w = chain.measured_response(p, grid).norm_sqr();
        *out = model.quant_psd[k][antenna] * w;
    }
    Ok(psd)
}

/// Antenna-averaged analytical PSD (the quantity the spectrum figures show).
pub fn analytical_psd(
    model: &LinearizedModel,
    chain: &FilterChain,
    grid: &SystemGrid,
) -> Result<Vec<f64>> {
    let m = grid.meas_len();
    let b = grid.antennas as f64;
    let mut psd = vec![0.0; m];
    for (idx, out) in psd.iter_mut().enumerate() {
        let p = signed_bin_extended(idx, m)?;
        let k = grid.bin_of_signed(p);
        let base: f64 = model.quant_psd[k].iter().sum::<f64>() / b;
        let w = chain.measured_response(p, grid).norm_sqr();
        *out = base * w;
    }
    Ok(psd)
}

/// Analytical PSD of the predistorted DAC input on the measurement grid
/// (periodic extension of the digital spectrum, no reconstruction filters).
pub fn analytical_input_psd(model: &LinearizedModel, grid: &SystemGrid) -> Result<Vec<f64>> {
    let m = grid.meas_len();
    let b = grid.antennas as f64;
    let mut base = vec![0.0; grid.n];
    for (k, entry) in base.iter_mut().enumerate() {
        if let Some(block) = model.input_freq_blocks[k].as_ref() {
            *entry = (0..grid.antennas).map(|i| block[(i, i)].re).sum::<f64>() / b;
        }
    }
    let mut psd = vec![0.0; m];
    for (idx, out) in psd.iter_mut().enumerate() {
        let p = signed_bin_extended(idx, m)?;
        *out = base[grid.bin_of_signed(p)];
    }
    Ok(psd)
}

/// Adjacent-channel leakage ratio from the analytical covariance model:
/// per antenna, the worse of the two adjacent-channel powers over the in-band
/// power, then averaged over antennas.
pub fn analytical_aclr(model: &LinearizedModel, grid: &SystemGrid) -> Result<f64> {
    let (lower, upper) = grid.adjacent_bin_sets()?;
    let weights: Vec<f64> = model.response.iter().map(|r| r.norm_sqr()).collect();
    let inband_bins = grid.inband_psd_bins();
    let mut acc = 0.0;
    for b in 0..grid.antennas {
        let band_power = |bins: &[usize]| -> f64 {
            bins.iter().map(|&k| weights[k] * model.quant_psd[k][b]).sum()
        };
        let inband = band_power(&inband_bins);
        if !(inband > 0.0) {
            return Err(Error::Numerical("zero in-band power in ACLR".into()));
        }
        acc += band_power(&lower).max(band_power(&upper)) / inband;
    }
    Ok(acc / grid.antennas as f64)
}

/// Radiated power along `phi` for a band covariance (quadratic form in the
/// steering vector, normalized by the number of bins summed into `cov`).
pub fn radiation_pattern(cov: &CMat, bins: usize, phi_deg: f64) -> f64 {
    let v = crate::channel::steering_vector(phi_deg, cov.rows());
    cov.quadratic_form_transpose(&v) / bins as f64
}

impl LinearizedModel {
    /// In-band radiated power along `phi`.
    pub fn inband_radiation(&self, phi_deg: f64) -> f64 {
        radiation_pattern(&self.inband_cov, self.inband_bins, phi_deg)
    }

    /// Adjacent-channel radiated power along `phi`.
    pub fn adjacent_radiation(&self, phi_deg: f64) -> Result<f64> {
        let cov = self.adjacent_cov.as_ref().ok_or_else(|| {
            Error::Config("adjacent channels do not fit inside the Nyquist range".into())
        })?;
        Ok(radiation_pattern(cov, self.adjacent_bins, phi_deg))
    }

    /// Trace of the quantized-output covariance per sample,
    /// `(1/N) sum_k tr(C_k)`; equals `B / (B * OSR)` under the power
    /// constraint.
    pub fn quantized_power_per_sample(&self) -> f64 {
        let total: f64 = self.quant_psd.iter().map(|row| row.iter().sum::<f64>()).sum();
        total / self.quant_psd.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::draw_channel;
    use crate::filters::ReconFilter;
    use crate::grid::GridConfig;
    use crate::precoder::zf_precoder;
    use crate::quantizer::QuantizerSpec;

    fn desk_grid() -> SystemGrid {
        SystemGrid::derive(GridConfig {
            n: 64,
            s: 16,
            delta_f_hz: 15e3,
            cp_len: 16,
            antennas: 8,
            users: 2,
            meas_factor: 10,
        })
        .unwrap()
    }

    fn desk_setup(
        seed: u64,
        mode: ReconFilter,
        dac_bits: Option<u32>,
    ) -> (
        SystemGrid,
        FilterChain,
        ChannelRealization,
        PrecoderSet,
        DacModel,
    ) {
        let grid = desk_grid();
        let chain = FilterChain::sampled(&grid, mode).unwrap();
        let mut rng = substream(seed, StreamDomain::Channel, 0, 0);
        let ch = draw_channel(&grid, &[25.0, 100.0], &[90.0, 150.0], 4, &mut rng).unwrap();
        let pre = zf_precoder(&ch, &grid).unwrap();
        let dac = match dac_bits {
            None => DacModel::Infinite,
            Some(bits) => {
                let step =
                    crate::math::mmse_uniform_step(bits) * (grid.target_power() / 2.0).sqrt();
                DacModel::Quantized(
                    QuantizerSpec::calibrate(
                        bits,
                        step,
                        grid.target_power(),
                        grid.antennas,
                        grid.osr,
                    )
                    .unwrap(),
                )
            }
        };
        (grid, chain, ch, pre, dac)
    }

    #[test]
    fn infinite_resolution_has_unit_gain_and_no_distortion() {
        let (grid, chain, _ch, pre, dac) = desk_setup(1, ReconFilter::IdealLowpass, None);
        let model = build_linearized_model(&grid, &chain, &pre, &dac, CovarianceMethod::Auto)
            .unwrap();
        assert!(model.gain.iter().all(|&g| g == 1.0));
        assert_eq!(model.xi, 1.0);
        for &k in grid.occupied() {
            let d = model.distortion_blocks[k].as_ref().unwrap();
            assert!(d.frobenius_norm() < 1e-14);
        }
    }

    #[test]
    fn one_bit_gain_follows_closed_form_per_antenna() {
        let (grid, chain, _ch, pre, dac) = desk_setup(2, ReconFilter::IdealLowpass, Some(1));
        let model =
            build_linearized_model(&grid, &chain, &pre, &dac, CovarianceMethod::Auto).unwrap();
        let spec = match &dac {
            DacModel::Quantized(s) => s,
            _ => unreachable!(),
        };
        for (b, &g) in model.gain.iter().enumerate() {
            let sigma2 = model.input_cov_sample[(b, b)].re;
            let expect = spec.alpha() * spec.step() / (PI.sqrt() * sigma2.sqrt());
            assert!((g - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn one_bit_quantized_power_is_exact() {
        let (grid, chain, _ch, pre, dac) = desk_setup(3, ReconFilter::IdealLowpass, Some(1));
        let model =
            build_linearized_model(&grid, &chain, &pre, &dac, CovarianceMethod::Auto).unwrap();
        // Arcsine diagonal: every antenna and sample carries 1/(B OSR).
        let per_sample = model.quantized_power_per_sample();
        let expect = grid.antennas as f64 * grid.target_power();
        assert!((per_sample - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn filtering_only_attenuates_total_power() {
        let (grid, chain, _ch, pre, dac) = desk_setup(
            4,
            ReconFilter::Chain {
                eta: 2,
                f_cut_hz: 90e3,
                zoh: true,
            },
            Some(1),
        );
        let model =
            build_linearized_model(&grid, &chain, &pre, &dac, CovarianceMethod::Auto).unwrap();
        let before: f64 = model
            .quant_psd
            .iter()
            .map(|row| row.iter().sum::<f64>())
            .sum();
        let after: f64 = (0..grid.n)
            .map(|k| {
                model.response[k].norm_sqr() * model.quant_psd[k].iter().sum::<f64>()
            })
            .sum();
        assert!(after <= before);
    }

    #[test]
    fn sindr_with_noise_only_is_flat_over_users_and_bins() {
        let (grid, chain, ch, pre, dac) = desk_setup(5, ReconFilter::IdealLowpass, None);
        let model =
            build_linearized_model(&grid, &chain, &pre, &dac, CovarianceMethod::Auto).unwrap();
        let n0 = 0.05;
        let table = sindr_table(&model, &ch, &pre, &grid, n0).unwrap();
        let expect = model.norm_const * model.norm_const / n0;
        for v in table.iter_values() {
            assert!((v - expect).abs() < 1e-9 * expect, "{v} vs {expect}");
        }
        // Noiseless: perfect zero forcing diverges up to solver roundoff.
        let clean = sindr_table(&model, &ch, &pre, &grid, 0.0).unwrap();
        assert!(clean.iter_values().all(|v| v.is_infinite() || v > 1e15));
    }

    #[test]
    fn sindr_rejects_guard_bins_and_is_monotone_in_noise() {
        let (grid, chain, ch, pre, dac) = desk_setup(6, ReconFilter::IdealLowpass, Some(1));
        let model =
            build_linearized_model(&grid, &chain, &pre, &dac, CovarianceMethod::Auto).unwrap();
        assert!(sindr(&model, &ch, &pre, &grid, 0, 0, 0.1).is_err());
        let k = grid.occupied()[3];
        let mut prev = f64::INFINITY;
        for &n0 in &[1e-3, 1e-2, 1e-1, 1.0] {
            let v = sindr(&model, &ch, &pre, &grid, 0, k, n0).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn ber_limits() {
        assert!((analytical_ber(&[0.0, 0.0]) - 0.5).abs() < 1e-12);
        assert_eq!(analytical_ber(&[f64::INFINITY]), 0.0);
        let b = analytical_ber(&[9.09]);
        assert!((b - 1.28e-3).abs() < 2e-5, "{b}");
    }

    #[test]
    fn infinite_resolution_psd_is_flat_in_band_after_dpd() {
        let grid = desk_grid();
        let chain = FilterChain::sampled(
            &grid,
            ReconFilter::Chain {
                eta: 2,
                f_cut_hz: 90e3,
                zoh: true,
            },
        )
        .unwrap();
        // Average the analytical PSD over channel realizations.
        let mut acc = vec![0.0; grid.meas_len()];
        let realizations = 200;
        for r in 0..realizations {
            let mut rng = substream(77, StreamDomain::Channel, r, 0);
            let ch = draw_channel(&grid, &[25.0, 100.0], &[90.0, 150.0], 4, &mut rng).unwrap();
            let pre = zf_precoder(&ch, &grid).unwrap();
            let model = build_linearized_model(
                &grid,
                &chain,
                &pre,
                &DacModel::Infinite,
                CovarianceMethod::Auto,
            )
            .unwrap();
            for (a, p) in acc.iter_mut().zip(analytical_psd(&model, &chain, &grid).unwrap()) {
                *a += p;
            }
        }
        let m = grid.meas_len();
        let mut in_band = Vec::new();
        for (idx, &p) in acc.iter().enumerate() {
            let signed = signed_bin_extended(idx, m).unwrap();
            if signed != 0 && signed.unsigned_abs() as usize <= grid.s / 2 {
                in_band.push(p / realizations as f64);
            }
        }
        let mean: f64 = in_band.iter().sum::<f64>() / in_band.len() as f64;
        for p in in_band {
            let db = 10.0 * (p / mean).log10();
            assert!(db.abs() < 0.75, "in-band ripple {db} dB");
        }
    }

    #[test]
    fn per_antenna_psd_averages_to_the_reported_psd() {
        let (grid, chain, _ch, pre, dac) = desk_setup(
            12,
            ReconFilter::Chain {
                eta: 2,
                f_cut_hz: 90e3,
                zoh: true,
            },
            Some(1),
        );
        let model =
            build_linearized_model(&grid, &chain, &pre, &dac, CovarianceMethod::Auto).unwrap();
        let mean = analytical_psd(&model, &chain, &grid).unwrap();
        let mut acc = vec![0.0; grid.meas_len()];
        for b in 0..grid.antennas {
            for (a, p) in acc
                .iter_mut()
                .zip(analytical_psd_antenna(&model, &chain, &grid, b).unwrap())
            {
                *a += p / grid.antennas as f64;
            }
        }
        for (a, m) in acc.iter().zip(&mean) {
            assert!((a - m).abs() <= 1e-12 * m.max(1e-30));
        }
        assert!(analytical_psd_antenna(&model, &chain, &grid, grid.antennas).is_err());
    }

    #[test]
    fn single_antenna_radiation_is_isotropic() {
        let grid = SystemGrid::derive(GridConfig {
            n: 64,
            s: 16,
            delta_f_hz: 15e3,
            cp_len: 16,
            antennas: 1,
            users: 1,
            meas_factor: 10,
        })
        .unwrap();
        let chain = FilterChain::sampled(&grid, ReconFilter::IdealLowpass).unwrap();
        let mut rng = substream(9, StreamDomain::Channel, 0, 0);
        let ch = draw_channel(&grid, &[60.0], &[100.0], 3, &mut rng).unwrap();
        let pre = zf_precoder(&ch, &grid).unwrap();
        let dac = DacModel::Quantized(
            QuantizerSpec::calibrate(
                1,
                crate::math::mmse_uniform_step(1),
                grid.target_power(),
                grid.antennas,
                grid.osr,
            )
            .unwrap(),
        );
        let model =
            build_linearized_model(&grid, &chain, &pre, &dac, CovarianceMethod::Auto).unwrap();
        let base = model.inband_radiation(0.0);
        for phi in [30.0, 90.0, 147.0] {
            assert!((model.inband_radiation(phi) - base).abs() < 1e-12 * base);
        }
    }

    #[test]
    fn distortion_blocks_are_positive_semidefinite() {
        let (grid, chain, _ch, pre, dac) = desk_setup(
            10,
            ReconFilter::Chain {
                eta: 2,
                f_cut_hz: 90e3,
                zoh: true,
            },
            Some(1),
        );
        let model =
            build_linearized_model(&grid, &chain, &pre, &dac, CovarianceMethod::Auto).unwrap();
        for &k in grid.occupied() {
            let d = model.distortion_blocks[k].as_ref().unwrap();
            assert!(d.is_hermitian(1e-10));
            // Smallest eigenvalue above -1e-8 * scale: shifted Cholesky succeeds.
            let scale = d.trace().re.max(1e-30);
            let mut shifted = d.clone();
            for i in 0..shifted.rows() {
                shifted[(i, i)] += 1e-8 * scale;
            }
            assert!(
                crate::cmat::cholesky_psd(&shifted, 1e-14 * scale).is_ok(),
                "bin {k}"
            );
        }
    }

    #[test]
    fn arcsine_blocks_match_monte_carlo_covariance_method() {
        // Same model through the exact arcsine route and the seeded MC route.
        let grid = SystemGrid::derive(GridConfig {
            n: 8,
            s: 4,
            delta_f_hz: 15e3,
            cp_len: 2,
            antennas: 2,
            users: 2,
            meas_factor: 4,
        })
        .unwrap();
        let chain = FilterChain::sampled(&grid, ReconFilter::IdealLowpass).unwrap();
        let mut rng = substream(31, StreamDomain::Channel, 0, 0);
        let ch = draw_channel(&grid, &[40.0, 120.0], &[100.0, 100.0], 2, &mut rng).unwrap();
        let pre = zf_precoder(&ch, &grid).unwrap();
        let spec = QuantizerSpec::calibrate(
            1,
            crate::math::mmse_uniform_step(1) * (grid.target_power() / 2.0).sqrt(),
            grid.target_power(),
            grid.antennas,
            grid.osr,
        )
        .unwrap();
        let dac = DacModel::Quantized(spec);
        let exact =
            quantized_freq_blocks(&grid, &chain, &pre, &dac, CovarianceMethod::Arcsine).unwrap();
        let mc = quantized_freq_blocks(
            &grid,
            &chain,
            &pre,
            &dac,
            CovarianceMethod::MonteCarlo {
                draws: 200_000,
                seed: 5,
            },
        )
        .unwrap();
        let norm: f64 = exact.iter().map(|m| m.frobenius_norm().powi(2)).sum::<f64>().sqrt();
        let err: f64 = exact
            .iter()
            .zip(&mc)
            .map(|(a, b)| a.sub(b).frobenius_norm().powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err / norm < 0.02, "relative error {}", err / norm);
    }
}
