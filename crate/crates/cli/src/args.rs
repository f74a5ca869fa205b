use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use spillover::ingest::Transform;

#[derive(Debug, Parser)]
#[command(name = "spillover", version, about = "Time- and frequency-domain volatility connectedness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Daily bipower variation from tick CSV files, plus a joined panel.
    Rv(CommandArgs),
    /// Fit a VAR to a panel and write the model.
    Fit(CommandArgs),
    /// Full-sample connectedness table, measures and band decomposition.
    Connect(CommandArgs),
    /// Rolling-window connectedness with optional bootstrap bands.
    Roll(CommandArgs),
    /// Simulate a panel from a known VAR and write its true measures.
    Synth(CommandArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Rv(_) => "rv",
            Command::Fit(_) => "fit",
            Command::Connect(_) => "connect",
            Command::Roll(_) => "roll",
            Command::Synth(_) => "synth",
        }
    }

    pub fn args(&self) -> &CommandArgs {
        match self {
            Command::Rv(a) | Command::Fit(a) | Command::Connect(a) | Command::Roll(a) | Command::Synth(a) => a,
        }
    }
}

/// Flags shared by every subcommand. Anything left unset falls back to the
/// config file, then to the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct CommandArgs {
    /// Input files: tick CSVs for `rv`, a panel CSV otherwise.
    pub inputs: Vec<PathBuf>,

    /// TOML config file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// VAR lag order.
    #[arg(long, value_name = "N")]
    pub lags: Option<usize>,

    /// Rolling window length in observations.
    #[arg(long, value_name = "N")]
    pub window: Option<usize>,

    /// Rolling step in observations.
    #[arg(long, value_name = "N")]
    pub step: Option<usize>,

    /// Bands in days, e.g. "1:5,5:inf".
    #[arg(long, value_name = "S")]
    pub bands: Option<String>,

    /// Truncation of the moving-average representation.
    #[arg(long, value_name = "N")]
    pub htrunc: Option<usize>,

    /// Number of frequency grid points on (0, pi].
    #[arg(long, value_name = "N")]
    pub nfreq: Option<usize>,

    /// Bootstrap replications (0 disables the bootstrap).
    #[arg(long, value_name = "N")]
    pub boot: Option<usize>,

    /// Two-sided significance of bootstrap bands (0.10 gives 5th-95th percentiles).
    #[arg(long, value_name = "X")]
    pub significance: Option<f64>,

    /// Seed for simulation and bootstrap.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,

    /// Event CSV (`date,label`) to annotate rolling output.
    #[arg(long, value_name = "PATH")]
    pub events: Option<PathBuf>,

    /// Output directory (default: $SPILLOVER_OUT, else ./out).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Panel transform of daily bipower variation.
    #[arg(long, value_parser = parse_transform)]
    pub transform: Option<Transform>,
}

fn parse_transform(s: &str) -> Result<Transform, String> {
    s.parse().map_err(|e: spillover::Error| e.to_string())
}
