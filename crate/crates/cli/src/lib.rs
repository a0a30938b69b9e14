//! Experiment layer: configuration files, named recipes reproducing the
//! standard result figures, and CSV/JSON output.

pub mod config;
pub mod csvout;
pub mod experiments;
