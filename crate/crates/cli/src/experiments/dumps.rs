//! Replayable channel dumps and raw-waveform dumps.
//!
//! Channel realizations serialize to JSON (`channels.json`) and can be fed
//! back through `dump.replay_channels` for bit-identical reruns on the same
//! scenario. Waveforms serialize as interleaved complex64 (little-endian
//! `f32` pairs, antenna-major) with a JSON sidecar describing the grid.

use crate::config::ExperimentConfig;
use anyhow::{bail, Context, Result};
use oobmimo_core::channel::{draw_channel, frequency_response, ChannelRealization};
use oobmimo_core::cmat::CMat;
use oobmimo_core::grid::SystemGrid;
use oobmimo_core::rng::{substream, StreamDomain};
use oobmimo_core::C64;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Serialize, Deserialize)]
pub struct StoredChannels {
    pub users: usize,
    pub antennas: usize,
    pub taps: usize,
    pub aod_deg: Vec<f64>,
    pub distances_m: Vec<f64>,
    /// `[realization][tap][user][antenna] = [re, im]`.
    pub realizations: Vec<Vec<Vec<Vec<[f64; 2]>>>>,
}

impl StoredChannels {
    pub fn from_draws(cfg: &ExperimentConfig, grid: &SystemGrid, stream_tag: u64) -> Result<Self> {
        let mut realizations = Vec::with_capacity(cfg.trials.realizations as usize);
        for r in 0..cfg.trials.realizations {
            let mut rng = substream(cfg.seed, StreamDomain::Channel, r, stream_tag);
            let ch = draw_channel(
                grid,
                &cfg.scenario.aod_deg,
                &cfg.scenario.distances_m,
                cfg.scenario.taps,
                &mut rng,
            )?;
            realizations.push(
                ch.taps
                    .iter()
                    .map(|tap| {
                        (0..grid.users)
                            .map(|u| tap.row(u).iter().map(|z| [z.re, z.im]).collect())
                            .collect()
                    })
                    .collect(),
            );
        }
        Ok(Self {
            users: grid.users,
            antennas: grid.antennas,
            taps: cfg.scenario.taps,
            aod_deg: cfg.scenario.aod_deg.clone(),
            distances_m: cfg.scenario.distances_m.clone(),
            realizations,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let file = std::fs::File::create(path)
            .with_context(|| format!("creating {}", path.display()))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))?)
    }

    pub fn realization(&self, grid: &SystemGrid, r: u64) -> Result<ChannelRealization> {
        if self.users != grid.users || self.antennas != grid.antennas {
            bail!(
                "stored channels are {}x{} but the grid expects {}x{}",
                self.users,
                self.antennas,
                grid.users,
                grid.antennas
            );
        }
        let stored = self
            .realizations
            .get(r as usize)
            .ok_or_else(|| anyhow::anyhow!("dump holds {} realizations, asked for {r}",
                self.realizations.len()))?;
        let taps: Vec<CMat> = stored
            .iter()
            .map(|tap| {
                CMat::from_fn(self.users, self.antennas, |u, b| {
                    C64::new(tap[u][b][0], tap[u][b][1])
                })
            })
            .collect();
        let freq = frequency_response(&taps, grid.n);
        Ok(ChannelRealization {
            taps,
            freq,
            aods_deg: self.aod_deg.clone(),
            distances_m: self.distances_m.clone(),
        })
    }
}

/// Grid metadata written next to raw waveform dumps.
#[derive(Serialize, Deserialize)]
pub struct WaveformSidecar {
    pub dtype: String,
    pub layout: String,
    pub antennas: usize,
    pub samples_per_antenna: usize,
    pub sample_rate_hz: f64,
    pub n: usize,
    pub cp_len: usize,
    pub meas_factor: usize,
    pub files: Vec<String>,
}

/// Writes one waveform (`B x samples`) as interleaved complex64.
pub fn write_waveform(path: &Path, waveform: &[Vec<C64>]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let file = std::fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let mut writer = std::io::BufWriter::new(file);
    for antenna in waveform {
        for z in antenna {
            writer.write_all(&(z.re as f32).to_le_bytes())?;
            writer.write_all(&(z.im as f32).to_le_bytes())?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn write_sidecar(path: &Path, sidecar: &WaveformSidecar) -> Result<()> {
    let file = std::fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let mut writer = std::io::BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, sidecar)?;
    writeln!(writer)?;
    Ok(())
}
