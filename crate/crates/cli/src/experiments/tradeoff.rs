//! ACLR / SINDR / PAR tradeoff sweep over the low-pass cut-off frequency for
//! 1-bit and 3-bit DACs and both filter orders, plus the unfiltered
//! (hold-only) reference points.

use super::{dump_channels_if_requested, parallel_realizations, write_summary, ChannelSource};
use crate::config::ExperimentConfig;
use crate::csvout::{float, CsvFile};
use anyhow::Result;
use oobmimo_core::bussgang::{
    analytical_aclr, build_linearized_model, calibrated_dac, sindr_components, CovarianceMethod,
};
use oobmimo_core::filters::{FilterChain, ReconFilter};
use oobmimo_core::grid::SystemGrid;
use oobmimo_core::math::{from_db, to_db};
use oobmimo_core::montecarlo::Simulator;
use oobmimo_core::precoder::Constellation;
use oobmimo_core::rng::{substream, StreamDomain};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize)]
pub struct TradeoffPoint {
    pub bits: u32,
    pub eta: u8,
    /// `None` marks the hold-only (no low-pass) reference point.
    pub f_cut_hz: Option<f64>,
    pub sindr_db: f64,
    pub aclr_analytical_db: f64,
    pub aclr_empirical_db: Option<f64>,
    pub par_db: Option<f64>,
}

#[derive(Serialize)]
pub struct TradeoffSummary {
    pub points: Vec<TradeoffPoint>,
    pub file: PathBuf,
    pub realizations_file: PathBuf,
    pub config: ExperimentConfig,
}

struct Partial {
    sindr_sum: f64,
    aclr_sum: f64,
    /// Per antenna: in-band, lower-adjacent, upper-adjacent PSD bin sums.
    band_sums: Vec<[f64; 3]>,
    par_sum: f64,
    par_count: u64,
    per_realization: Vec<(u64, f64, f64)>, // (realization, sindr, aclr)
}

fn point_list(cfg: &ExperimentConfig, _grid: &SystemGrid) -> Vec<(u32, u8, Option<f64>)> {
    // No sweep: a single-point run at the configured cut-off.
    let cutoffs: Vec<f64> = match &cfg.sweep {
        Some(sweep) => sweep.values(),
        None => vec![cfg.filter.cutoff_hz],
    };
    let mut points = Vec::new();
    for &bits in &[1u32, 3] {
        points.push((bits, 0u8, None)); // hold-only reference
        for &eta in &[1u8, 2] {
            for &fc in &cutoffs {
                points.push((bits, eta, Some(fc)));
            }
        }
    }
    points
}

pub fn run_tradeoff_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<TradeoffSummary> {
    let grid = cfg.derive_grid()?;
    let n0 = from_db(-cfg.snr.tradeoff_snr_db);
    let symbols = cfg.trials.symbols_per_realization;
    let points = point_list(cfg, &grid);
    let source = ChannelSource::open(cfg)?;

    // Measurement-grid indices of the ACLR bin sets.
    let m = grid.meas_len();
    let to_ext = |k: usize| -> usize {
        let p = grid.signed_bin(k).expect("validated grid");
        p.rem_euclid(m as i64) as usize
    };
    let (lower, upper) = grid.adjacent_bin_sets()?;
    let inband: Vec<usize> = grid.inband_psd_bins().iter().map(|&k| to_ext(k)).collect();
    let lower: Vec<usize> = lower.iter().map(|&k| to_ext(k)).collect();
    let upper: Vec<usize> = upper.iter().map(|&k| to_ext(k)).collect();

    let path = out_dir.join("tradeoff.csv");
    let mut csv = CsvFile::create(
        &path,
        &[
            "bits",
            "eta",
            "f_cut_hz",
            "sindr_db",
            "aclr_analytical_db",
            "aclr_empirical_db",
            "par_db",
        ],
    )?;
    let real_path = out_dir.join("tradeoff_realizations.csv");
    let mut real_csv = CsvFile::create(
        &real_path,
        &["realization", "bits", "eta", "f_cut_hz", "sindr_db", "aclr_analytical_db"],
    )?;

    let mut out_points = Vec::new();
    for (point_idx, &(bits, eta, f_cut)) in points.iter().enumerate() {
        let recon = match f_cut {
            None => ReconFilter::Chain {
                eta: 0,
                f_cut_hz: 0.0,
                zoh: true,
            },
            Some(fc) => ReconFilter::Chain {
                eta,
                f_cut_hz: fc,
                zoh: true,
            },
        };
        let chain = FilterChain::sampled(&grid, recon)?;
        let sim = Simulator::new(grid.clone(), chain.clone(), cfg.scenario.taps)?;
        let dft_fine = oobmimo_core::fft::Dft::new(m);

        let mut total = Partial {
            sindr_sum: 0.0,
            aclr_sum: 0.0,
            band_sums: vec![[0.0; 3]; grid.antennas],
            par_sum: 0.0,
            par_count: 0,
            per_realization: Vec::new(),
        };
        parallel_realizations(
            cfg.trials.realizations,
            |r| -> Result<Partial> {
                let real = source.realize(cfg, &grid, r, 0)?;
                let dac = calibrated_dac(
                    Some(bits),
                    cfg.dac.step_policy(),
                    &grid,
                    &chain,
                    &real.precoder,
                )?;
                let model = build_linearized_model(
                    &grid,
                    &chain,
                    &real.precoder,
                    &dac,
                    CovarianceMethod::Auto,
                )?;
                let sindr = sindr_components(&model, &real.channel, &real.precoder, &grid)?
                    .table(n0)
                    .mean_linear();
                let aclr = analytical_aclr(&model, &grid)?;
                let mut part = Partial {
                    sindr_sum: sindr,
                    aclr_sum: aclr,
                    band_sums: vec![[0.0; 3]; grid.antennas],
                    par_sum: 0.0,
                    par_count: 0,
                    per_realization: vec![(r, sindr, aclr)],
                };
                for s in 0..symbols {
                    let inner = ((point_idx as u64) << 32) | s;
                    let mut sym_rng = substream(cfg.seed, StreamDomain::Symbols, r, inner);
                    let mut noise_rng = substream(cfg.seed, StreamDomain::Noise, r, inner);
                    let trial = sim.simulate_symbol(
                        &dac,
                        &real.channel,
                        &real.precoder,
                        Constellation::Qpsk,
                        0.0,
                        &mut sym_rng,
                        &mut noise_rng,
                    )?;
                    for (b, wave) in trial.tx_waveform.iter().enumerate() {
                        let mut buf = wave[wave.len() - m..].to_vec();
                        dft_fine.forward_unitary(&mut buf);
                        let inv_mf = 1.0 / grid.meas_factor as f64;
                        let mut sums = [0.0f64; 3];
                        for (set_idx, set) in [&inband, &lower, &upper].iter().enumerate() {
                            sums[set_idx] =
                                set.iter().map(|&i| buf[i].norm_sqr() * inv_mf).sum();
                        }
                        for (acc, v) in part.band_sums[b].iter_mut().zip(sums) {
                            *acc += v;
                        }
                    }
                    for &p in &trial.par_db {
                        if p.is_finite() {
                            part.par_sum += p;
                            part.par_count += 1;
                        }
                    }
                }
                Ok(part)
            },
            |p| {
                total.sindr_sum += p.sindr_sum;
                total.aclr_sum += p.aclr_sum;
                for (acc, v) in total.band_sums.iter_mut().zip(&p.band_sums) {
                    for (a, b) in acc.iter_mut().zip(v) {
                        *a += b;
                    }
                }
                total.par_sum += p.par_sum;
                total.par_count += p.par_count;
                total.per_realization.extend(p.per_realization);
                Ok(())
            },
        )?;

        let realizations = cfg.trials.realizations as f64;
        let sindr_db = to_db(total.sindr_sum / realizations);
        let aclr_db = to_db(total.aclr_sum / realizations);
        let aclr_emp_db = if symbols > 0 {
            let mut acc = 0.0;
            for sums in &total.band_sums {
                acc += sums[1].max(sums[2]) / sums[0];
            }
            Some(to_db(acc / grid.antennas as f64))
        } else {
            None
        };
        let par_db = if total.par_count > 0 {
            Some(total.par_sum / total.par_count as f64)
        } else {
            None
        };

        csv.row(&[
            format!("{bits}"),
            format!("{eta}"),
            f_cut.map(|f| format!("{f:.3}")).unwrap_or_default(),
            float(sindr_db),
            float(aclr_db),
            aclr_emp_db.map(float).unwrap_or_default(),
            par_db.map(float).unwrap_or_default(),
        ])?;
        for (r, sindr, aclr) in &total.per_realization {
            real_csv.row(&[
                format!("{r}"),
                format!("{bits}"),
                format!("{eta}"),
                f_cut.map(|f| format!("{f:.3}")).unwrap_or_default(),
                float(to_db(*sindr)),
                float(to_db(*aclr)),
            ])?;
        }
        out_points.push(TradeoffPoint {
            bits,
            eta,
            f_cut_hz: f_cut,
            sindr_db,
            aclr_analytical_db: aclr_db,
            aclr_empirical_db: aclr_emp_db,
            par_db,
        });
    }
    csv.finish()?;
    real_csv.finish()?;

    dump_channels_if_requested(cfg, &grid, out_dir, 0)?;
    let summary = TradeoffSummary {
        points: out_points,
        file: path,
        realizations_file: real_path,
        config: cfg.clone(),
    };
    write_summary(out_dir, &summary)?;
    Ok(summary)
}
