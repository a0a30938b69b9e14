//! `simulate` — experiment runner for the quantized MU-MIMO-OFDM downlink.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime error.

use clap::{Parser, Subcommand};
use oobmimo_cli::config::{ConfigError, ExperimentConfig};
use oobmimo_cli::experiments;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "simulate",
    about = "Quantized massive MU-MIMO-OFDM downlink: spectra, radiation, BER and \
             ACLR/SINDR/PAR tradeoffs, analytical and simulated"
)]
struct Cli {
    #[command(subcommand)]
    recipe: Recipe,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// JSON experiment configuration; defaults to the built-in full-scale
    /// scenario.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the configuration file).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides the configuration file).
    #[arg(long)]
    seed: Option<u64>,
    /// CI profile: at most 16 antennas and 20 channel realizations.
    #[arg(long)]
    desk_scale: bool,
}

#[derive(Subcommand)]
enum Recipe {
    /// Transmit PSD of the predistorted input and the 1-/3-bit outputs.
    Psd(CommonArgs),
    /// In-band and adjacent-channel radiation patterns for two array sizes.
    Radiation(CommonArgs),
    /// Uncoded BER versus SNR for the standard DAC/filter settings.
    Ber(CommonArgs),
    /// ACLR versus SINDR and PAR over the low-pass cut-off sweep.
    Tradeoff(CommonArgs),
}

impl Recipe {
    fn name(&self) -> &'static str {
        match self {
            Recipe::Psd(_) => "psd",
            Recipe::Radiation(_) => "radiation",
            Recipe::Ber(_) => "ber",
            Recipe::Tradeoff(_) => "tradeoff",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Recipe::Psd(a) | Recipe::Radiation(a) | Recipe::Ber(a) | Recipe::Tradeoff(a) => a,
        }
    }
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::full_scale(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.desk_scale {
        cfg.apply_desk_scale();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems are configuration errors for scripting purposes,
            // but let --help/--version print normally.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let args = cli.recipe.args();
    let cfg = match load_config(args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(cli.recipe.name()));

    let run = || -> anyhow::Result<()> {
        match &cli.recipe {
            Recipe::Psd(_) => {
                let s = experiments::run_psd_experiment(&cfg, &out_dir)?;
                eprintln!(
                    "psd: {} realizations, DC gap 1-bit over 3-bit {:.2} dB -> {}",
                    s.realizations,
                    s.dc_gap_1bit_over_3bit_db,
                    out_dir.display()
                );
            }
            Recipe::Radiation(_) => {
                let s = experiments::run_radiation_experiment(&cfg, &out_dir)?;
                eprintln!(
                    "radiation: arrays {:?}, adjacent monotone: {} -> {}",
                    s.antenna_counts,
                    s.adjacent_power_monotone_in_antennas,
                    out_dir.display()
                );
            }
            Recipe::Ber(_) => {
                let s = experiments::run_ber_experiment(&cfg, &out_dir)?;
                match s.loss_3bit_eta1_vs_ideal_db {
                    Some(loss) => eprintln!(
                        "ber: 3-bit order-1 loss at 1e-3: {loss:.2} dB -> {}",
                        out_dir.display()
                    ),
                    None => eprintln!("ber: curves written -> {}", out_dir.display()),
                }
            }
            Recipe::Tradeoff(_) => {
                let s = experiments::run_tradeoff_sweep(&cfg, &out_dir)?;
                eprintln!(
                    "tradeoff: {} operating points -> {}",
                    s.points.len(),
                    out_dir.display()
                );
            }
        }
        Ok(())
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            // Parameter problems surfaced at assembly time are still
            // configuration errors for scripting purposes.
            if matches!(
                e.downcast_ref::<oobmimo_core::Error>(),
                Some(oobmimo_core::Error::Config(_))
            ) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
