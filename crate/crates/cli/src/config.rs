//! Experiment configuration: a JSON file whose keys map one-to-one onto the
//! system-model symbols.

use oobmimo_core::filters::ReconFilter;
use oobmimo_core::grid::{GridConfig, SystemGrid};
use oobmimo_core::quantizer::StepPolicy;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Configuration error (maps to exit code 1).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "configuration: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn cfg_err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Samples per OFDM symbol (total subcarriers), `N`.
    pub n: usize,
    /// Occupied subcarriers, `S`.
    pub s: usize,
    /// Subcarrier spacing in Hz.
    pub delta_f_hz: f64,
    /// Cyclic-prefix length in samples.
    pub cp_len: usize,
    /// Base-station antennas, `B`.
    pub antennas: usize,
    /// Users, `U`.
    pub users: usize,
    /// Measurement-grid oversampling factor.
    #[serde(default = "default_meas_factor")]
    pub meas_factor: usize,
    /// Angles of departure per user, degrees.
    pub aod_deg: Vec<f64>,
    /// User distances in meters.
    pub distances_m: Vec<f64>,
    /// Channel taps, `L`.
    pub taps: usize,
}

fn default_meas_factor() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DacConfig {
    /// DAC resolution in bits; `null` selects infinite resolution.
    pub bits: Option<u32>,
    /// Explicit step size; omitted selects the minimum-MSE Gaussian step.
    #[serde(default)]
    pub fixed_step: Option<f64>,
}

impl Default for DacConfig {
    fn default() -> Self {
        Self {
            bits: Some(1),
            fixed_step: None,
        }
    }
}

impl DacConfig {
    pub fn step_policy(&self) -> StepPolicy {
        match self.fixed_step {
            Some(step) => StepPolicy::Fixed(step),
            None => StepPolicy::MmseGaussian,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    /// `"chain"` (hold plus Butterworth) or `"ideal"` (brick-wall reference).
    #[serde(default = "default_filter_mode")]
    pub mode: String,
    /// Butterworth order (0, 1 or 2; 0 disables the low-pass).
    #[serde(default = "default_order")]
    pub order: u8,
    /// Butterworth cut-off in Hz.
    #[serde(default = "default_cutoff")]
    pub cutoff_hz: f64,
    /// Whether the zero-order hold is part of the chain.
    #[serde(default = "default_true")]
    pub zoh: bool,
}

fn default_filter_mode() -> String {
    "chain".into()
}

fn default_order() -> u8 {
    2
}

fn default_cutoff() -> f64 {
    1.6875e6
}

fn default_true() -> bool {
    true
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            mode: default_filter_mode(),
            order: default_order(),
            cutoff_hz: default_cutoff(),
            zoh: true,
        }
    }
}

impl FilterConfig {
    pub fn recon_filter(&self) -> Result<ReconFilter, ConfigError> {
        match self.mode.as_str() {
            "ideal" => Ok(ReconFilter::IdealLowpass),
            "chain" => Ok(ReconFilter::Chain {
                eta: self.order,
                f_cut_hz: self.cutoff_hz,
                zoh: self.zoh,
            }),
            other => cfg_err(format!("unknown filter mode '{other}' (chain | ideal)")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Swept parameter; `cutoff_hz` is supported.
    pub parameter: String,
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

impl SweepConfig {
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut v = self.from;
        while v <= self.to + 1e-9 * self.step {
            out.push(v);
            v += self.step;
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialsConfig {
    /// Channel realizations to average over.
    pub realizations: u64,
    /// Simulated OFDM symbols per realization (0 disables the empirical
    /// route where one exists).
    pub symbols_per_realization: u64,
}

impl Default for TrialsConfig {
    fn default() -> Self {
        Self {
            realizations: 100,
            symbols_per_realization: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrConfig {
    pub from_db: f64,
    pub to_db: f64,
    pub step_db: f64,
    /// SNR of the tradeoff operating point.
    pub tradeoff_snr_db: f64,
    /// Simulate markers at every this-many SNR grid points.
    pub empirical_stride: usize,
}

impl Default for SnrConfig {
    fn default() -> Self {
        Self {
            from_db: -10.0,
            to_db: 25.0,
            step_db: 1.0,
            tradeoff_snr_db: 10.0,
            empirical_stride: 4,
        }
    }
}

impl SnrConfig {
    pub fn grid_db(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut v = self.from_db;
        while v <= self.to_db + 1e-9 {
            out.push(v);
            v += self.step_db;
        }
        out
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpConfig {
    /// Write the drawn channel realizations to `channels.json`.
    #[serde(default)]
    pub channels: bool,
    /// Write raw transmit waveforms (interleaved complex64 binary plus a
    /// JSON sidecar with the grid metadata); spectrum recipe only.
    #[serde(default)]
    pub waveforms: bool,
    /// Replay channel realizations from a previous `channels.json` instead
    /// of drawing them.
    #[serde(default)]
    pub replay_channels: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub dac: DacConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub trials: TrialsConfig,
    #[serde(default)]
    pub snr: SnrConfig,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub dump: DumpConfig,
}

impl ExperimentConfig {
    /// Full-scale defaults: 64 antennas, 4 users, the LTE-like 300-of-1024
    /// grid at 15 kHz spacing, 100 channel realizations.
    pub fn full_scale() -> Self {
        Self {
            scenario: ScenarioConfig {
                n: 1024,
                s: 300,
                delta_f_hz: 15e3,
                cp_len: 72,
                antennas: 64,
                users: 4,
                meas_factor: 10,
                aod_deg: vec![25.0, 55.0, 75.0, 100.0],
                distances_m: vec![90.0, 65.0, 115.0, 150.0],
                taps: 10,
            },
            dac: DacConfig::default(),
            filter: FilterConfig::default(),
            sweep: Some(SweepConfig {
                parameter: "cutoff_hz".into(),
                from: 562.5e3,
                to: 4.5e6,
                step: 562.5e3,
            }),
            trials: TrialsConfig::default(),
            snr: SnrConfig::default(),
            seed: 1,
            output_dir: None,
            dump: DumpConfig::default(),
        }
    }

    /// CI profile: 16 antennas and 20 realizations.
    pub fn apply_desk_scale(&mut self) {
        self.scenario.antennas = self.scenario.antennas.min(16);
        self.trials.realizations = self.trials.realizations.min(20);
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("cannot parse {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.scenario;
        if s.aod_deg.len() != s.users || s.distances_m.len() != s.users {
            return cfg_err(format!(
                "scenario lists {} angles and {} distances for {} users",
                s.aod_deg.len(),
                s.distances_m.len(),
                s.users
            ));
        }
        if s.taps == 0 {
            return cfg_err("scenario needs at least one channel tap");
        }
        if self.trials.realizations == 0 {
            return cfg_err("at least one channel realization is required");
        }
        if let Some(sweep) = &self.sweep {
            if sweep.parameter != "cutoff_hz" {
                return cfg_err(format!(
                    "unknown sweep parameter '{}' (supported: cutoff_hz)",
                    sweep.parameter
                ));
            }
            if !(sweep.step > 0.0) || sweep.to < sweep.from {
                return cfg_err("sweep range must be nonempty with a positive step");
            }
        }
        if !(self.snr.step_db > 0.0) || self.snr.to_db < self.snr.from_db {
            return cfg_err("SNR grid must be nonempty with a positive step");
        }
        if self.snr.empirical_stride == 0 {
            return cfg_err("empirical_stride must be positive");
        }
        // Grid-level validation surfaces dimensioning mistakes early.
        self.derive_grid().map(|_| ())
    }

    pub fn derive_grid(&self) -> Result<SystemGrid, ConfigError> {
        self.derive_grid_with_antennas(self.scenario.antennas)
    }

    /// Same grid with an overridden antenna count (radiation recipes sweep
    /// the array size).
    pub fn derive_grid_with_antennas(&self, antennas: usize) -> Result<SystemGrid, ConfigError> {
        SystemGrid::derive(GridConfig {
            n: self.scenario.n,
            s: self.scenario.s,
            delta_f_hz: self.scenario.delta_f_hz,
            cp_len: self.scenario.cp_len,
            antennas,
            users: self.scenario.users,
            meas_factor: self.scenario.meas_factor,
        })
        .map_err(|e| ConfigError(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_is_valid() {
        let cfg = ExperimentConfig::full_scale();
        cfg.validate().unwrap();
        let grid = cfg.derive_grid().unwrap();
        assert_eq!(grid.n, 1024);
        assert_eq!(grid.antennas, 64);
    }

    #[test]
    fn desk_scale_overrides_antennas_and_realizations() {
        let mut cfg = ExperimentConfig::full_scale();
        cfg.apply_desk_scale();
        assert_eq!(cfg.scenario.antennas, 16);
        assert_eq!(cfg.trials.realizations, 20);
    }

    #[test]
    fn rejects_mismatched_scenario_lists() {
        let mut cfg = ExperimentConfig::full_scale();
        cfg.scenario.aod_deg.pop();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_unknown_sweep_parameter() {
        let mut cfg = ExperimentConfig::full_scale();
        cfg.sweep = Some(SweepConfig {
            parameter: "antennas".into(),
            from: 1.0,
            to: 2.0,
            step: 1.0,
        });
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sweep_values_cover_the_range_inclusively() {
        let sweep = SweepConfig {
            parameter: "cutoff_hz".into(),
            from: 562.5e3,
            to: 4.5e6,
            step: 562.5e3,
        };
        let vals = sweep.values();
        assert_eq!(vals.len(), 8);
        assert!((vals[0] - 562.5e3).abs() < 1e-6);
        assert!((vals[7] - 4.5e6).abs() < 1e-6);
    }

    #[test]
    fn config_roundtrips_through_json() {
        let cfg = ExperimentConfig::full_scale();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        back.validate().unwrap();
        assert_eq!(back.scenario.n, cfg.scenario.n);
        assert_eq!(back.seed, cfg.seed);
    }
}
