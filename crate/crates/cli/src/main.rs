//! `icrlab`: command-line front end for the box-regression loss lab.
//!
//! Subcommands mirror the library surfaces: `simulate` runs gradient-descent
//! trajectories, `landscape` exports loss-surface grids, `sweep` tables the
//! penalty weight, `gradcheck` verifies analytic gradients against finite
//! differences, and `dataset` handles paired annotation corpora.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error, 3 config
//! or input validation error.

mod commands;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use icrlab_core::loss::LossKind;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Verification(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Config(m) | CliError::Verification(m) => m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Format::Text),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format '{other}' (expected text|json)")),
        }
    }
}

/// Flags shared by the simulation-shaped commands.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Base loss kind: iou, giou, diou, or ciou.
    #[arg(long, default_value = "ciou")]
    pub loss: LossKind,

    /// Named scenario preset (canonical, disjoint-far) or a path to a
    /// scenario JSON file.
    #[arg(long, default_value = "canonical")]
    pub scenario: String,

    /// Output directory; falls back to $ICRLAB_OUT, then ./icrlab-out.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Report format on stdout.
    #[arg(long, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Parser)]
#[command(
    name = "icrlab",
    version,
    about = "Bounding-box regression loss laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run gradient-descent box-regression trajectories.
    Simulate(commands::simulate::SimulateArgs),
    /// Export loss-surface and gradient-magnitude grids.
    Landscape(commands::landscape::LandscapeArgs),
    /// Table convergence statistics over a list of penalty weights.
    Sweep(commands::sweep::SweepArgs),
    /// Verify analytic gradients against the finite-difference oracle.
    Gradcheck(commands::gradcheck::GradcheckArgs),
    /// Parse, validate, summarize, or synthesize paired annotation sets.
    Dataset(commands::dataset::DatasetArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Landscape(args) => commands::landscape::run(args),
        Command::Sweep(args) => commands::sweep::run(args),
        Command::Gradcheck(args) => commands::gradcheck::run(args),
        Command::Dataset(args) => commands::dataset::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
