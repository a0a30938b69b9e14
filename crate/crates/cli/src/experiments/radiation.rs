//! Radiation-pattern experiment: in-band and adjacent-channel power versus
//! direction for two array sizes, 1-bit DACs.

use super::{dump_channels_if_requested, parallel_realizations, write_summary, ChannelSource};
use crate::config::ExperimentConfig;
use crate::csvout::{power_db, CsvFile};
use anyhow::Result;
use oobmimo_core::bussgang::{
    build_linearized_model, calibrated_dac, radiation_pattern, CovarianceMethod,
};
use oobmimo_core::cmat::CMat;
use oobmimo_core::filters::FilterChain;
use oobmimo_core::montecarlo::{BandCovAccumulator, Simulator};
use oobmimo_core::precoder::Constellation;
use oobmimo_core::rng::{substream, StreamDomain};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Serialize)]
pub struct RadiationSummary {
    pub antenna_counts: Vec<usize>,
    pub realizations: u64,
    pub file: PathBuf,
    /// Whether the larger array radiated no more adjacent-channel power than
    /// the smaller one at every sampled angle.
    pub adjacent_power_monotone_in_antennas: bool,
    pub config: ExperimentConfig,
}

struct BandSums {
    inband: CMat,
    adjacent: CMat,
    inband_emp: CMat,
    adjacent_emp: CMat,
    symbols: u64,
}

/// Patterns over a 1 degree grid for the configured array plus a quarter-size
/// reference, both under the common `1/(B * OSR)` power constraint.
///
/// Reported patterns are additionally normalized per antenna (divided by
/// `B`), which puts arrays of different sizes on a common scale: main lobes
/// of equal height, with the larger array showing narrower beams and less
/// power everywhere else.
pub fn run_radiation_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RadiationSummary> {
    let full = cfg.scenario.antennas;
    let quarter = (full / 4).max(cfg.scenario.users);
    let mut antenna_counts = vec![quarter, full];
    antenna_counts.dedup();
    let symbols = cfg.trials.symbols_per_realization;

    let path = out_dir.join("radiation.csv");
    let mut csv = CsvFile::create(
        &path,
        &["phi_deg", "band", "antennas", "analytical_db", "empirical_db"],
    )?;

    let source = ChannelSource::open(cfg)?;
    let mut patterns: Vec<(usize, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = Vec::new();
    for (b_idx, &antennas) in antenna_counts.iter().enumerate() {
        let grid = cfg.derive_grid_with_antennas(antennas)?;
        let chain = FilterChain::sampled(&grid, cfg.filter.recon_filter()?)?;
        let sim = Simulator::new(grid.clone(), chain.clone(), cfg.scenario.taps)?;
        let mut sums = BandSums {
            inband: CMat::zeros(antennas, antennas),
            adjacent: CMat::zeros(antennas, antennas),
            inband_emp: CMat::zeros(antennas, antennas),
            adjacent_emp: CMat::zeros(antennas, antennas),
            symbols: 0,
        };
        parallel_realizations(
            cfg.trials.realizations,
            |r| -> Result<BandSums> {
                let real = source.realize(cfg, &grid, r, antennas as u64)?;
                let dac = calibrated_dac(
                    Some(1),
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
                let mut band_acc = BandCovAccumulator::new(&grid)?;
                for s in 0..symbols {
                    let inner = ((b_idx as u64) << 32) | s;
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
                    band_acc.add(&trial);
                }
                let (inband_emp, adjacent_emp) = band_acc.band_covariances();
                let adjacent = model
                    .adjacent_cov
                    .clone()
                    .ok_or_else(|| anyhow::anyhow!("adjacent band outside Nyquist range"))?;
                Ok(BandSums {
                    inband: model.inband_cov,
                    adjacent,
                    inband_emp,
                    adjacent_emp,
                    symbols,
                })
            },
            |p| {
                sums.inband.add_assign(&p.inband);
                sums.adjacent.add_assign(&p.adjacent);
                sums.inband_emp.add_assign(&p.inband_emp);
                sums.adjacent_emp.add_assign(&p.adjacent_emp);
                sums.symbols += p.symbols;
                Ok(())
            },
        )?;
        let scale = 1.0 / cfg.trials.realizations as f64;
        sums.inband.scale(scale);
        sums.adjacent.scale(scale);
        sums.inband_emp.scale(scale);
        sums.adjacent_emp.scale(scale);

        let (inband_bins, adjacent_bins) = (grid.s + 1, 2 * grid.s + 2);
        let per_antenna = 1.0 / antennas as f64;
        let mut rows = (
            antennas,
            Vec::new(), // in-band analytical
            Vec::new(), // in-band empirical
            Vec::new(), // adjacent analytical
            Vec::new(), // adjacent empirical
        );
        for phi_deg in 0..=180 {
            let phi = phi_deg as f64;
            rows.1
                .push(per_antenna * radiation_pattern(&sums.inband, inband_bins, phi));
            rows.2
                .push(per_antenna * radiation_pattern(&sums.inband_emp, inband_bins, phi));
            rows.3
                .push(per_antenna * radiation_pattern(&sums.adjacent, adjacent_bins, phi));
            rows.4
                .push(per_antenna * radiation_pattern(&sums.adjacent_emp, adjacent_bins, phi));
        }
        patterns.push(rows);
    }

    for (antennas, inband, inband_emp, adjacent, adjacent_emp) in &patterns {
        for phi_deg in 0..=180usize {
            csv.row(&[
                format!("{phi_deg}"),
                "inband".into(),
                format!("{antennas}"),
                power_db(inband[phi_deg]),
                power_db(inband_emp[phi_deg]),
            ])?;
        }
        for phi_deg in 0..=180usize {
            csv.row(&[
                format!("{phi_deg}"),
                "adjacent".into(),
                format!("{antennas}"),
                power_db(adjacent[phi_deg]),
                power_db(adjacent_emp[phi_deg]),
            ])?;
        }
    }
    csv.finish()?;

    dump_channels_if_requested(cfg, &cfg.derive_grid()?, out_dir, cfg.scenario.antennas as u64)?;
    let monotone = if patterns.len() == 2 {
        patterns[0]
            .3
            .iter()
            .zip(&patterns[1].3)
            .all(|(&small, &large)| large <= small)
    } else {
        true
    };
    let summary = RadiationSummary {
        antenna_counts,
        realizations: cfg.trials.realizations,
        file: path,
        adjacent_power_monotone_in_antennas: monotone,
        config: cfg.clone(),
    };
    write_summary(out_dir, &summary)?;
    Ok(summary)
}
