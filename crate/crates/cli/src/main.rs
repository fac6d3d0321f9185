use std::process::ExitCode;

use cavity_uncertainty::protocol::{simulate_rounds, sweep, Game};
use cavity_uncertainty::Error as CoreError;
use clap::{CommandFactory, Parser, Subcommand};
use thiserror::Error;

mod check;
mod config;
mod output;

use config::{parse_config, Format, Options};

/// Entropic uncertainty game with two accelerated cavity memories.
#[derive(Parser, Debug)]
#[command(name = "cavity-ur", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the game on a u_b x u_c grid (csv by default)
    Sweep(Options),
    /// Print the report at a single (u_b, u_c) point (json by default)
    Report(Options),
    /// Play sampled rounds and estimate the conditional entropies
    Simulate(Options),
    /// Run the invariant suites; exit 1 on any violation
    Check(Options),
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Invariant(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invariant(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Io { .. } => CliError::Io(e.to_string()),
            CoreError::NotHermitian { .. }
            | CoreError::TraceNotOne { .. }
            | CoreError::NegativeEigenvalue { .. }
            | CoreError::NotCompletelyPositive(_)
            | CoreError::NegativeRadicand(_) => CliError::Invariant(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Sweep(opts) => {
            let cfg = parse_config(&opts)?;
            log::info!("sweeping {}x{} grid up to u = {}", cfg.grid.n_b, cfg.grid.n_c, cfg.grid.u_max);
            let reports = sweep(&cfg.game, &cfg.grid)?;
            let text = match cfg.format.unwrap_or(Format::Csv) {
                Format::Csv => output::reports_csv(&reports),
                Format::Json => output::json(&reports)?,
            };
            output::emit(cfg.out.as_deref(), &text)
        }
        Command::Report(opts) => {
            let cfg = parse_config(&opts)?;
            let report = Game::new(&cfg.game)?.report(cfg.game.u_b, cfg.game.u_c)?;
            let text = match cfg.format.unwrap_or(Format::Json) {
                Format::Csv => output::reports_csv(std::slice::from_ref(&report)),
                Format::Json => output::json(&report)?,
            };
            output::emit(cfg.out.as_deref(), &text)
        }
        Command::Simulate(opts) => {
            let cfg = parse_config(&opts)?;
            let report = simulate_rounds(&cfg.game, cfg.rounds, cfg.seed)?;
            let text = match cfg.format.unwrap_or(Format::Json) {
                Format::Csv => output::simulation_csv(&report),
                Format::Json => output::json(&report)?,
            };
            output::emit(cfg.out.as_deref(), &text)
        }
        Command::Check(opts) => {
            let cfg = parse_config(&opts)?;
            let outcomes = check::run_checks(&cfg)?;
            let mut text = String::new();
            for o in &outcomes {
                text.push_str(&format!(
                    "{:<4} {:<22} {}\n",
                    if o.pass { "ok" } else { "FAIL" },
                    o.name,
                    o.detail
                ));
            }
            output::emit(cfg.out.as_deref(), &text)?;
            let failed: Vec<_> = outcomes.iter().filter(|o| !o.pass).map(|o| o.name).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Invariant(format!("invariant violated: {}", failed.join(", "))))
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let command = cli.command.unwrap_or_else(|| {
        let _ = Cli::command().print_help();
        println!();
        Command::Check(Options::default())
    });
    match run(command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
