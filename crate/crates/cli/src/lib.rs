//! Command-line orchestration for the index advisor: configuration layering,
//! the five commands and report persistence.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::Settings;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "idxadvise", version, about = "LLM-driven workload index advisor")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML file with settings; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Recommend indexes for a workload.
    Advise,
    /// Build a demonstration pool for a schema.
    BuildDemos,
    /// Generate a filtered synthetic workload.
    GenWorkload,
    /// Collect default and refined labels for a workload.
    Labels,
    /// Evaluate a DDL file or a heuristic advisor against a workload.
    Eval,
}

/// Layers flags over the config file over `env`, then runs the command.
pub fn run_with_env(cli: Cli, env: impl Fn(&str) -> Option<String>) -> Result<String, CliError> {
    let file = match &cli.config {
        Some(p) => Settings::from_file(p)?,
        None => Settings::default(),
    };
    let cfg = cli.settings.over(file.over(Settings::from_env_with(env)?)).resolve()?;
    Ok(match cli.command {
        Command::Advise => {
            let r = commands::cmd_advise(&cfg)?;
            format!(
                "{} indexes, cost {:.2} -> {:.2} ({:.2}% reduction)",
                r.recommended_ddl.len(),
                r.baseline_cost,
                r.final_cost,
                100.0 * r.relative_reduction
            )
        }
        Command::Eval => {
            let r = commands::cmd_eval(&cfg)?;
            format!(
                "cost {:.2} -> {:.2} ({:.2}% reduction), {:.2} MB of {:.2} MB",
                r.baseline_cost,
                r.final_cost,
                100.0 * r.relative_reduction,
                r.index_size_mb,
                r.budget_mb
            )
        }
        Command::Labels => format!("{} labels", commands::cmd_labels(&cfg)?.entries.len()),
        Command::BuildDemos => format!("{} demonstrations", commands::cmd_build_demos(&cfg)?.len()),
        Command::GenWorkload => format!("{} queries", commands::cmd_gen_workload(&cfg)?.len()),
    })
}

pub fn run(cli: Cli) -> Result<String, CliError> {
    run_with_env(cli, |k| std::env::var(k).ok())
}
