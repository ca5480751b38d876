//! Command-line front end: one config file, staged subcommands, reproducible
//! file outputs.

pub mod commands;
pub mod config;
mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::StageContext;
pub use config::PipelineConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_ESTIMATION: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Estimation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::Estimation(_) => EXIT_ESTIMATION,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Estimation(m) => m,
        }
    }

    fn from_sim(e: crate::simkernel::SimError) -> Self {
        use crate::simkernel::SimError::*;
        match e {
            BadOverride { .. } | BadConfig(_) | UnsupportedBandwidth(_) => {
                CliError::Config(e.to_string())
            }
            ZeroDelta | EmptyOracleSample => CliError::Estimation(e.to_string()),
            Data(inner) => CliError::Data(inner.to_string()),
        }
    }

    fn from_model(e: crate::regressor::ModelError) -> Self {
        use crate::regressor::ModelError::*;
        match e {
            DegenerateTarget => CliError::Estimation(e.to_string()),
            UnknownTarget(_) | TargetNotKpi(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }

    fn from_shap(e: crate::shapley::ShapError) -> Self {
        use crate::shapley::ShapError::*;
        match e {
            Capacity(_) | EmptyBackground | BackgroundTooSmall { .. } | EmptyEval => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "xconflict",
    about = "Evaluate conflicts between RAN control applications: simulate, regress, attribute, classify, and quantify causal impact",
    version
)]
pub struct Cli {
    /// Pipeline config JSON; defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory for staged artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Master seed override (takes precedence over the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the observational dataset from the surrogate simulator.
    Simulate,
    /// Fit one boosted-tree regressor per KPI and report held-out quality.
    Train,
    /// Compute exact Shapley attributions and the importance table.
    Explain,
    /// Build the causal DAG and classify application conflicts.
    Graph,
    /// Estimate adjusted treatment effects for every conflicting pair.
    Estimate,
    /// Render report.md from the staged artifacts.
    Report,
    /// Run all stages (or a subset) in order.
    Pipeline {
        /// Comma-separated subset of stages to run, in canonical order.
        #[arg(long, value_delimiter = ',')]
        stages: Vec<String>,
    },
}

fn build_context(cli: &Cli) -> Result<StageContext, CliError> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path).map_err(CliError::Config)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| config.io.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    StageContext::new(config, out_dir)
}

pub fn run_cli(cli: Cli) -> Result<(), CliError> {
    let ctx = build_context(&cli)?;
    match &cli.command {
        Command::Simulate => commands::cmd_simulate(&ctx),
        Command::Train => commands::cmd_train(&ctx),
        Command::Explain => commands::cmd_explain(&ctx),
        Command::Graph => commands::cmd_graph(&ctx),
        Command::Estimate => commands::cmd_estimate(&ctx),
        Command::Report => commands::cmd_report(&ctx),
        Command::Pipeline { stages } => commands::cmd_pipeline(&ctx, stages),
    }
}

/// Parse argv, run, and map errors to exit codes (0 ok, 2 config, 3 data,
/// 4 estimation).
pub fn run() -> i32 {
    let cli = Cli::parse();
    match run_cli(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
