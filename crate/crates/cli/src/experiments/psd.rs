//! Transmit-spectrum experiment: analytical and simulated PSD of the
//! predistorted DAC input and of the 1-bit and 3-bit DAC outputs.

use super::{
    dump_channels_if_requested, frequency_ordered_bins, parallel_realizations, write_summary,
    ChannelSource,
};
use crate::config::ExperimentConfig;
use crate::csvout::{power_db, CsvFile};
use anyhow::{Context, Result};
use oobmimo_core::bussgang::{
    analytical_input_psd, analytical_psd, build_linearized_model, calibrated_dac,
    CovarianceMethod,
};
use oobmimo_core::filters::FilterChain;
use oobmimo_core::montecarlo::{InputPsdAccumulator, PsdAccumulator, Simulator};
use oobmimo_core::precoder::{draw_symbols, Constellation};
use oobmimo_core::rng::{substream, StreamDomain};
use serde::Serialize;
use std::path::{Path, PathBuf};

struct Partial {
    ana: [Vec<f64>; 3], // input, 1-bit, 3-bit
    emp: [Vec<f64>; 3],
}

#[derive(Serialize)]
pub struct PsdSummary {
    pub realizations: u64,
    pub symbols_per_realization: u64,
    pub files: Vec<PathBuf>,
    /// Analytical PSD gap at the DC bin between 1-bit and 3-bit DACs, dB.
    pub dc_gap_1bit_over_3bit_db: f64,
    pub config: ExperimentConfig,
}

pub fn run_psd_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<PsdSummary> {
    let grid = cfg.derive_grid()?;
    let chain = FilterChain::sampled(&grid, cfg.filter.recon_filter()?)?;
    let sim = Simulator::new(grid.clone(), chain.clone(), cfg.scenario.taps)?;
    let source = ChannelSource::open(cfg)?;
    let m = grid.meas_len();
    let symbols = cfg.trials.symbols_per_realization;
    let bit_settings: [Option<u32>; 2] = [Some(1), Some(3)];

    let mut ana_sum = [vec![0.0; m], vec![0.0; m], vec![0.0; m]];
    let mut emp_sum = [vec![0.0; m], vec![0.0; m], vec![0.0; m]];

    parallel_realizations(
        cfg.trials.realizations,
        |r| -> Result<Partial> {
            let real = source.realize(cfg, &grid, r, 0)?;
            let mut ana: [Vec<f64>; 3] = Default::default();
            let mut emp: [Vec<f64>; 3] = Default::default();
            let mut input_acc = InputPsdAccumulator::new(&grid);
            for (idx, bits) in bit_settings.iter().enumerate() {
                let dac = calibrated_dac(
                    *bits,
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
                if idx == 0 {
                    ana[0] = analytical_input_psd(&model, &grid)?;
                }
                ana[idx + 1] = analytical_psd(&model, &chain, &grid)?;
                let mut psd_acc = PsdAccumulator::new(&grid);
                for s in 0..symbols {
                    let mut sym_rng = substream(cfg.seed, StreamDomain::Symbols, r, s);
                    let frame = draw_symbols(&grid, Constellation::Qpsk, &mut sym_rng);
                    let mut noise_rng = substream(cfg.seed, StreamDomain::Noise, r, s);
                    let trial = sim.simulate_frame(
                        &dac,
                        &frame,
                        &real.channel,
                        &real.precoder,
                        0.0,
                        &mut noise_rng,
                    )?;
                    psd_acc.add(&trial);
                    if idx == 0 {
                        input_acc.add(&trial);
                    }
                }
                emp[idx + 1] = if symbols > 0 {
                    psd_acc.mean_psd()
                } else {
                    vec![0.0; m]
                };
            }
            emp[0] = if symbols > 0 {
                input_acc.extended_psd(&grid)?
            } else {
                vec![0.0; m]
            };
            Ok(Partial { ana, emp })
        },
        |p| {
            for i in 0..3 {
                for (a, v) in ana_sum[i].iter_mut().zip(&p.ana[i]) {
                    *a += v;
                }
                for (e, v) in emp_sum[i].iter_mut().zip(&p.emp[i]) {
                    *e += v;
                }
            }
            Ok(())
        },
    )?;

    let scale = 1.0 / cfg.trials.realizations as f64;
    for i in 0..3 {
        for v in ana_sum[i].iter_mut() {
            *v *= scale;
        }
        for v in emp_sum[i].iter_mut() {
            *v *= scale;
        }
    }

    let names = ["input", "1bit", "3bit"];
    let bins = frequency_ordered_bins(&grid);
    let mut files = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let path = out_dir.join(format!("psd_{name}.csv"));
        let mut csv = CsvFile::create(&path, &["frequency_hz", "analytical_db", "empirical_db", "setting"])
            .with_context(|| format!("writing {}", path.display()))?;
        for &(freq, idx) in &bins {
            csv.row(&[
                format!("{freq:.3}"),
                power_db(ana_sum[i][idx]),
                power_db(emp_sum[i][idx]),
                (*name).to_string(),
            ])?;
        }
        csv.finish()?;
        files.push(path);
    }

    dump_channels_if_requested(cfg, &grid, out_dir, 0)?;
    if cfg.dump.waveforms {
        dump_waveforms(cfg, &grid, &chain, &sim, &source, out_dir)?;
    }

    let dc = bins
        .iter()
        .find(|&&(f, _)| f == 0.0)
        .map(|&(_, idx)| idx)
        .expect("DC bin exists");
    let summary = PsdSummary {
        realizations: cfg.trials.realizations,
        symbols_per_realization: symbols,
        files,
        dc_gap_1bit_over_3bit_db: 10.0 * (ana_sum[1][dc] / ana_sum[2][dc]).log10(),
        config: cfg.clone(),
    };
    write_summary(out_dir, &summary)?;
    Ok(summary)
}

/// Raw transmit waveforms of the first realization's first symbol, one file
/// per DAC setting, for external spectrum tooling.
fn dump_waveforms(
    cfg: &ExperimentConfig,
    grid: &oobmimo_core::SystemGrid,
    chain: &FilterChain,
    sim: &Simulator,
    source: &ChannelSource,
    out_dir: &Path,
) -> Result<()> {
    use super::dumps;
    let real = source.realize(cfg, grid, 0, 0)?;
    let mut files = Vec::new();
    for bits in [1u32, 3] {
        let dac = calibrated_dac(
            Some(bits),
            cfg.dac.step_policy(),
            grid,
            chain,
            &real.precoder,
        )?;
        let mut sym_rng = substream(cfg.seed, StreamDomain::Symbols, 0, 0);
        let frame = draw_symbols(grid, Constellation::Qpsk, &mut sym_rng);
        let mut noise_rng = substream(cfg.seed, StreamDomain::Noise, 0, 0);
        let trial = sim.simulate_frame(&dac, &frame, &real.channel, &real.precoder, 0.0, &mut noise_rng)?;
        let name = format!("waveform_{bits}bit.c64");
        dumps::write_waveform(&out_dir.join(&name), &trial.tx_waveform)?;
        files.push(name);
    }
    dumps::write_sidecar(
        &out_dir.join("waveforms.json"),
        &dumps::WaveformSidecar {
            dtype: "complex64 (little-endian f32 pairs)".into(),
            layout: "antenna-major, cyclic prefix included".into(),
            antennas: grid.antennas,
            samples_per_antenna: grid.meas_factor * (grid.n + grid.cp_len),
            sample_rate_hz: grid.fs_hz * grid.meas_factor as f64,
            n: grid.n,
            cp_len: grid.cp_len,
            meas_factor: grid.meas_factor,
            files,
        },
    )?;
    Ok(())
}
