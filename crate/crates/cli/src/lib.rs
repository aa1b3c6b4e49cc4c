//! Command-line front end: config loading, orchestration and file output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
pub mod pipeline;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::Range;

#[derive(Debug, Parser)]
#[command(name = "afcmap", version, about = "Frequency-mode identification with atomic frequency combs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Monte Carlo experiment and write events, histograms and a report.
    Simulate(SimulateArgs),
    /// Check a multiplexing plan against the platform limits.
    Plan(PlanArgs),
    /// Compute efficiencies from an events file.
    Analyze(AnalyzeArgs),
    /// Tabulate numeric and analytic echo efficiency over a parameter grid.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "afcmap-out")]
    pub out: PathBuf,
    /// Replace existing output files.
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pulses per frequency mode.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Mean photon number per pulse.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Run even if the scheme violates the mapping constraints.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub n_freq: Option<usize>,
    #[arg(long)]
    pub n_spatial: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Events file in `# events v1` format.
    #[arg(long)]
    pub events: PathBuf,
    /// Pulses per frequency mode used to split and normalise the events.
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// 1-based comb whose spacing, shape and bandwidth are used.
    #[arg(long)]
    pub comb: Option<usize>,
    /// Peak depth, as X or START:STOP:COUNT.
    #[arg(long = "d", value_name = "RANGE")]
    pub peak_depth: Option<Range>,
    #[arg(long, value_name = "RANGE")]
    pub finesse: Option<Range>,
    /// Background depth, as X or START:STOP:COUNT.
    #[arg(long = "d0", value_name = "RANGE")]
    pub background_depth: Option<Range>,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Plan(a) => commands::plan(&a),
        Command::Analyze(a) => commands::analyze(&a),
        Command::Sweep(a) => commands::sweep(&a),
    }
}
