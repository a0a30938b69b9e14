//! Named experiment recipes: each one averages analytical and simulated
//! metrics over seeded channel realizations and writes CSV curves plus a JSON
//! summary.

pub mod ber;
pub mod dumps;
pub mod psd;
pub mod radiation;
pub mod tradeoff;

pub use ber::run_ber_experiment;
pub use psd::run_psd_experiment;
pub use radiation::run_radiation_experiment;
pub use tradeoff::run_tradeoff_sweep;

use crate::config::ExperimentConfig;
use anyhow::Result;
use oobmimo_core::channel::{draw_channel, ChannelRealization};
use oobmimo_core::grid::SystemGrid;
use oobmimo_core::precoder::{zf_precoder, PrecoderSet};
use oobmimo_core::rng::{substream, StreamDomain};
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;

/// One channel realization with its zero-forcing precoder.
pub(crate) struct Realization {
    pub channel: ChannelRealization,
    pub precoder: PrecoderSet,
}

/// Where channel realizations come from: fresh seeded draws or a replayed
/// dump file.
pub(crate) enum ChannelSource {
    Draw,
    Replay(dumps::StoredChannels),
}

impl ChannelSource {
    pub fn open(cfg: &ExperimentConfig) -> Result<Self> {
        match &cfg.dump.replay_channels {
            None => Ok(ChannelSource::Draw),
            Some(path) => Ok(ChannelSource::Replay(dumps::StoredChannels::load(path)?)),
        }
    }

    /// Realization `r`; `stream_tag` decouples otherwise identical draws
    /// (e.g. the same realization index at different array sizes).
    pub fn realize(
        &self,
        cfg: &ExperimentConfig,
        grid: &SystemGrid,
        r: u64,
        stream_tag: u64,
    ) -> Result<Realization> {
        let channel = match self {
            ChannelSource::Draw => {
                let mut rng = substream(cfg.seed, StreamDomain::Channel, r, stream_tag);
                draw_channel(
                    grid,
                    &cfg.scenario.aod_deg,
                    &cfg.scenario.distances_m,
                    cfg.scenario.taps,
                    &mut rng,
                )?
            }
            ChannelSource::Replay(stored) => stored.realization(grid, r)?,
        };
        let precoder = zf_precoder(&channel, grid)?;
        Ok(Realization { channel, precoder })
    }
}

/// Writes `channels.json` when the configuration asks for it.
pub(crate) fn dump_channels_if_requested(
    cfg: &ExperimentConfig,
    grid: &SystemGrid,
    out_dir: &Path,
    stream_tag: u64,
) -> Result<()> {
    if cfg.dump.channels && cfg.dump.replay_channels.is_none() {
        dumps::StoredChannels::from_draws(cfg, grid, stream_tag)?
            .save(&out_dir.join("channels.json"))?;
    }
    Ok(())
}

/// Runs `worker` over all realizations in parallel and reduces the results in
/// realization order, so the reduction is independent of the thread count.
pub(crate) fn parallel_realizations<T: Send>(
    realizations: u64,
    worker: impl Fn(u64) -> Result<T> + Sync,
    mut reduce: impl FnMut(T) -> Result<()>,
) -> Result<()> {
    let chunk = rayon::current_num_threads().max(1) * 2;
    let ids: Vec<u64> = (0..realizations).collect();
    for block in ids.chunks(chunk) {
        let outputs: Vec<Result<T>> = block.par_iter().map(|&r| worker(r)).collect();
        for out in outputs {
            reduce(out?)?;
        }
    }
    Ok(())
}

/// Writes the recipe summary as pretty JSON next to the CSV outputs.
pub(crate) fn write_summary<S: Serialize>(out_dir: &Path, summary: &S) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("summary.json");
    let file = std::fs::File::create(&path)?;
    let mut writer = std::io::BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, summary)?;
    use std::io::Write;
    writeln!(writer)?;
    Ok(())
}

/// Measurement-grid frequencies in ascending order with their DFT indices.
pub(crate) fn frequency_ordered_bins(grid: &SystemGrid) -> Vec<(f64, usize)> {
    let m = grid.meas_len();
    let half = m as i64 / 2;
    (-half..half)
        .map(|p| {
            (
                p as f64 * grid.delta_f_hz,
                p.rem_euclid(m as i64) as usize,
            )
        })
        .collect()
}

/// Linear interpolation of the SNR (dB) where a BER curve crosses `target`,
/// in log-BER coordinates. `None` when the curve never crosses.
pub fn snr_at_ber(snr_db: &[f64], ber: &[f64], target: f64) -> Option<f64> {
    for w in 0..snr_db.len().saturating_sub(1) {
        let (b0, b1) = (ber[w], ber[w + 1]);
        if (b0 >= target && b1 <= target) && b0 > 0.0 && b1 > 0.0 {
            let (l0, l1, lt) = (b0.log10(), b1.log10(), target.log10());
            if (l1 - l0).abs() < 1e-12 {
                return Some(snr_db[w]);
            }
            return Some(snr_db[w] + (lt - l0) / (l1 - l0) * (snr_db[w + 1] - snr_db[w]));
        }
    }
    None
}
