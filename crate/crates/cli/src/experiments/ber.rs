//! Uncoded BER versus SNR for the standard set of DAC/filter combinations,
//! analytical curves with optional simulated markers.

use super::{
    dump_channels_if_requested, parallel_realizations, snr_at_ber, write_summary, ChannelSource,
};
use crate::config::ExperimentConfig;
use crate::csvout::{float, CsvFile};
use anyhow::Result;
use oobmimo_core::bussgang::{
    analytical_ber, build_linearized_model, calibrated_dac, sindr_components, CovarianceMethod,
};
use oobmimo_core::filters::{FilterChain, ReconFilter};
use oobmimo_core::math::from_db;
use oobmimo_core::montecarlo::Simulator;
use oobmimo_core::precoder::{draw_symbols, Constellation};
use oobmimo_core::rng::{substream, StreamDomain};
use serde::Serialize;
use std::path::{Path, PathBuf};

/// DAC/filter operating points of the BER figure. Cut-offs follow the
/// occupied bandwidth: `f_BW / 2` for the first-order filter and
/// `0.375 f_BW` for the second-order one.
pub fn ber_settings(f_bw_hz: f64) -> Vec<(String, Option<u32>, ReconFilter)> {
    let order1 = ReconFilter::Chain {
        eta: 1,
        f_cut_hz: 0.5 * f_bw_hz,
        zoh: true,
    };
    let order2 = ReconFilter::Chain {
        eta: 2,
        f_cut_hz: 0.375 * f_bw_hz,
        zoh: true,
    };
    vec![
        ("inf_ideal".into(), None, ReconFilter::IdealLowpass),
        ("1bit_ideal".into(), Some(1), ReconFilter::IdealLowpass),
        ("3bit_ideal".into(), Some(3), ReconFilter::IdealLowpass),
        ("1bit_eta1".into(), Some(1), order1),
        ("3bit_eta1".into(), Some(3), order1),
        ("1bit_eta2".into(), Some(1), order2),
        ("3bit_eta2".into(), Some(3), order2),
    ]
}

#[derive(Serialize)]
pub struct BerCurve {
    pub setting: String,
    pub snr_db: Vec<f64>,
    pub analytical_ber: Vec<f64>,
    /// SNR where the analytical curve crosses 1e-3, when it does.
    pub snr_at_1e3_db: Option<f64>,
}

#[derive(Serialize)]
pub struct BerSummary {
    pub curves: Vec<BerCurve>,
    /// Horizontal SNR loss of the 3-bit order-1 filter against the 3-bit
    /// ideal reconstruction at BER 1e-3, dB.
    pub loss_3bit_eta1_vs_ideal_db: Option<f64>,
    pub file: PathBuf,
    pub config: ExperimentConfig,
}

struct Partial {
    /// `[setting][snr]` analytical BER.
    analytic: Vec<Vec<f64>>,
    /// `[setting][marker]` bit errors and bits.
    errors: Vec<Vec<u64>>,
    bits: Vec<Vec<u64>>,
}

pub fn run_ber_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<BerSummary> {
    let grid = cfg.derive_grid()?;
    let settings = ber_settings(grid.f_bw_hz);
    let snr_db = cfg.snr.grid_db();
    let n0: Vec<f64> = snr_db.iter().map(|&s| from_db(-s)).collect();
    let marker_idx: Vec<usize> = (0..snr_db.len())
        .step_by(cfg.snr.empirical_stride)
        .collect();
    let symbols = cfg.trials.symbols_per_realization;

    let chains: Vec<FilterChain> = settings
        .iter()
        .map(|(_, _, recon)| FilterChain::sampled(&grid, *recon))
        .collect::<oobmimo_core::Result<_>>()?;
    let source = ChannelSource::open(cfg)?;
    let sims: Vec<Simulator> = chains
        .iter()
        .map(|c| Simulator::new(grid.clone(), c.clone(), cfg.scenario.taps))
        .collect::<oobmimo_core::Result<_>>()?;

    let mut analytic_sum = vec![vec![0.0; snr_db.len()]; settings.len()];
    let mut errors = vec![vec![0u64; marker_idx.len()]; settings.len()];
    let mut bits = vec![vec![0u64; marker_idx.len()]; settings.len()];

    parallel_realizations(
        cfg.trials.realizations,
        |r| -> Result<Partial> {
            let real = source.realize(cfg, &grid, r, 0)?;
            let mut part = Partial {
                analytic: vec![vec![0.0; snr_db.len()]; settings.len()],
                errors: vec![vec![0u64; marker_idx.len()]; settings.len()],
                bits: vec![vec![0u64; marker_idx.len()]; settings.len()],
            };
            let mut dacs = Vec::with_capacity(settings.len());
            for (idx, (_, bits_cfg, _)) in settings.iter().enumerate() {
                let dac = calibrated_dac(
                    *bits_cfg,
                    cfg.dac.step_policy(),
                    &grid,
                    &chains[idx],
                    &real.precoder,
                )?;
                let model = build_linearized_model(
                    &grid,
                    &chains[idx],
                    &real.precoder,
                    &dac,
                    CovarianceMethod::Auto,
                )?;
                let components =
                    sindr_components(&model, &real.channel, &real.precoder, &grid)?;
                for (j, &n) in n0.iter().enumerate() {
                    let values: Vec<f64> = components.table(n).iter_values().collect();
                    part.analytic[idx][j] = analytical_ber(&values);
                }
                dacs.push(dac);
            }
            if symbols > 0 {
                for (mi, &snr_i) in marker_idx.iter().enumerate() {
                    for s in 0..symbols {
                        let inner = ((snr_i as u64) << 32) | s;
                        let mut sym_rng =
                            substream(cfg.seed, StreamDomain::Symbols, r, inner);
                        let frame = draw_symbols(&grid, Constellation::Qpsk, &mut sym_rng);
                        for (idx, dac) in dacs.iter().enumerate() {
                            let inner_noise = ((idx as u64) << 48) | inner;
                            let mut noise_rng =
                                substream(cfg.seed, StreamDomain::Noise, r, inner_noise);
                            let trial = sims[idx].simulate_frame(
                                dac,
                                &frame,
                                &real.channel,
                                &real.precoder,
                                n0[snr_i],
                                &mut noise_rng,
                            )?;
                            part.errors[idx][mi] += trial.bit_errors;
                            part.bits[idx][mi] += trial.bits;
                        }
                    }
                }
            }
            Ok(part)
        },
        |p| {
            for idx in 0..settings.len() {
                for j in 0..snr_db.len() {
                    analytic_sum[idx][j] += p.analytic[idx][j];
                }
                for mi in 0..marker_idx.len() {
                    errors[idx][mi] += p.errors[idx][mi];
                    bits[idx][mi] += p.bits[idx][mi];
                }
            }
            Ok(())
        },
    )?;

    let scale = 1.0 / cfg.trials.realizations as f64;
    for row in analytic_sum.iter_mut() {
        for v in row.iter_mut() {
            *v *= scale;
        }
    }

    let path = out_dir.join("ber.csv");
    let mut csv = CsvFile::create(
        &path,
        &["snr_db", "setting", "analytical_ber", "empirical_ber", "bit_errors", "bits"],
    )?;
    for (idx, (name, _, _)) in settings.iter().enumerate() {
        for (j, &snr) in snr_db.iter().enumerate() {
            let marker = marker_idx.iter().position(|&mi| mi == j);
            let (emp, err, bit) = match marker {
                Some(mi) if bits[idx][mi] > 0 => (
                    float(errors[idx][mi] as f64 / bits[idx][mi] as f64),
                    format!("{}", errors[idx][mi]),
                    format!("{}", bits[idx][mi]),
                ),
                _ => (String::new(), String::new(), String::new()),
            };
            csv.row(&[
                format!("{snr:.3}"),
                name.clone(),
                float(analytic_sum[idx][j]),
                emp,
                err,
                bit,
            ])?;
        }
    }
    csv.finish()?;

    let curves: Vec<BerCurve> = settings
        .iter()
        .enumerate()
        .map(|(idx, (name, _, _))| BerCurve {
            setting: name.clone(),
            snr_db: snr_db.clone(),
            analytical_ber: analytic_sum[idx].clone(),
            snr_at_1e3_db: snr_at_ber(&snr_db, &analytic_sum[idx], 1e-3),
        })
        .collect();
    let find = |name: &str| curves.iter().find(|c| c.setting == name);
    let loss = match (find("3bit_eta1"), find("3bit_ideal")) {
        (Some(a), Some(b)) => match (a.snr_at_1e3_db, b.snr_at_1e3_db) {
            (Some(x), Some(y)) => Some(x - y),
            _ => None,
        },
        _ => None,
    };
    dump_channels_if_requested(cfg, &grid, out_dir, 0)?;
    let summary = BerSummary {
        curves,
        loss_3bit_eta1_vs_ideal_db: loss,
        file: path,
        config: cfg.clone(),
    };
    write_summary(out_dir, &summary)?;
    Ok(summary)
}
