use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "gridcast", version, about = "Forecast daily power interruptions from weather data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate synthetic weather, interruption counts and ground truth.
    Synth,
    /// Aggregate hourly weather, align it with daily counts and write the dataset.
    Ingest,
    /// Fit the per-parameter regression catalogs and the goodness-of-fit table.
    Fit,
    /// Train the hybrid network and compare it with the sum-of-regressions baseline.
    Train,
    /// Forecast daily counts with a trained model.
    Forecast,
    /// Rank weather parameters by the sensitivity of a trained model.
    Sensitivity,
}

/// Flags shared by every command. Values given here override `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    /// JSON file with any of the keys below (snake_case).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Hourly weather CSV.
    #[arg(long, global = true)]
    pub weather: Option<PathBuf>,
    /// Daily interruption CSV.
    #[arg(long, global = true)]
    pub interruptions: Option<PathBuf>,
    /// Aligned daily dataset CSV (instead of --weather and --interruptions).
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// RNG seed for synthetic data and hidden-layer draws.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Exponent of the self-adjusting ridge parameter.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Random hidden-layer draws tried during training.
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    /// Hidden neurons.
    #[arg(long, global = true)]
    pub hidden: Option<usize>,
    /// Degree-day base temperature, °F.
    #[arg(long, global = true)]
    pub base_temp: Option<f64>,
    /// Chronological train,validate,test fractions.
    #[arg(long, global = true, value_parser = parse_split)]
    pub split: Option<[f64; 3]>,
    #[arg(long, global = true, value_enum)]
    pub target: Option<TargetSelection>,
    /// Catalog JSON written by `fit`, reused by `train`.
    #[arg(long, global = true)]
    pub catalog: Option<PathBuf>,
    /// Model JSON written by `train`.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Synthetic spec JSON for `synth`.
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// Number of synthetic days.
    #[arg(long, global = true)]
    pub days: Option<usize>,
    /// Use the planted-signal synthetic spec.
    #[arg(long, global = true)]
    pub planted: bool,
    /// Dataset part scored by `sensitivity`.
    #[arg(long, global = true, value_enum)]
    pub on: Option<Part>,
    /// Sensitivity score scaling.
    #[arg(long, global = true, value_enum)]
    pub scaling: Option<Scaling>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSelection {
    N,
    M,
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Train,
    Validate,
    #[default]
    Test,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    #[default]
    TrainingStd,
    Raw,
}

pub fn parse_split(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("'{p}' is not a number")))
        .collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(parts).map_err(|p| format!("expected three fractions, got {}", p.len()))
}
