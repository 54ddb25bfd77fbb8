//! Command-line front end: `gwlab run <command>` wires the samplers, tails,
//! gauges, spine densities, covers and the identity battery into
//! reproducible runs whose output files carry the full configuration.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use gwlab::{Error, OffspringDistribution};

use crate::config::{Command, ExperimentConfig, Overrides};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad input: exit status 2.
    #[error("{0}")]
    Usage(String),
    /// A run that could not complete or failed an exact check: exit status 1.
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "gwlab", version, about = "Galton-Watson boundary laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub top: Top,
}

#[derive(Debug, Subcommand)]
pub enum Top {
    /// Run an experiment.
    Run {
        #[command(subcommand)]
        command: RunCommand,
    },
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// TOML file with the same keys as the flags (underscores for dashes).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Subcommand)]
pub enum RunCommand {
    /// Sample W, write the empirical tail, the gauge and the doubling diagnostic.
    Tail(Common),
    /// Spine density traces, windowed density ratios and kappa.
    Spine(Common),
    /// Identity battery and exact size-bias enumeration.
    Verify(Common),
    /// Minimal cover costs and their pairing with the density ratios.
    Cover(Common),
    /// Tail bounds for X_1.
    Bounds(Common),
    /// Thin-ray counting identity.
    Thin(Common),
    /// Dump sampled GW trees.
    Sample(Common),
}

impl RunCommand {
    fn split(self) -> (Command, Common) {
        match self {
            RunCommand::Tail(c) => (Command::Tail, c),
            RunCommand::Spine(c) => (Command::Spine, c),
            RunCommand::Verify(c) => (Command::Verify, c),
            RunCommand::Cover(c) => (Command::Cover, c),
            RunCommand::Bounds(c) => (Command::Bounds, c),
            RunCommand::Thin(c) => (Command::Thin, c),
            RunCommand::Sample(c) => (Command::Sample, c),
        }
    }
}

/// Parses the offspring spec; every parse or validation error is a usage error.
pub fn parse_offspring_spec(s: &str) -> Result<OffspringDistribution, CliError> {
    OffspringDistribution::parse(s).map_err(|e| match e {
        Error::OffspringSpec { .. } => CliError::Usage(format!("--offspring: {e}")),
        other => CliError::Usage(format!("--offspring `{s}`: {other}")),
    })
}

/// Outcome of a completed run.
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub summary: serde_json::Value,
    pub warnings: Vec<String>,
    pub failures: Vec<String>,
}

pub fn run(cli: Cli) -> Result<RunOutcome, CliError> {
    let Top::Run { command } = cli.top;
    let (command, common) = command.split();
    let file = match &common.config {
        Some(p) => Overrides::from_file(p)?,
        None => Overrides::default(),
    };
    let cfg = ExperimentConfig::resolve(command, common.overrides.over(file))?;
    let d = parse_offspring_spec(&cfg.offspring)?;
    if let Some(n) = cfg.threads {
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let report = match command {
        Command::Tail => commands::tail(&d, &cfg),
        Command::Spine => commands::spine(&d, &cfg),
        Command::Verify => commands::verify(&d, &cfg),
        Command::Cover => commands::cover(&d, &cfg),
        Command::Bounds => commands::bounds(&d, &cfg),
        Command::Thin => commands::thin(&d, &cfg),
        Command::Sample => commands::sample(&d, &cfg),
    }?;
    let meta = output::Meta::new(&cfg, &d, report.w_truncation_depth);
    let files = output::write(&cfg, &meta, &report)?;
    Ok(RunOutcome {
        files,
        summary: report.summary,
        warnings: report.warnings,
        failures: report.failures,
    })
}
