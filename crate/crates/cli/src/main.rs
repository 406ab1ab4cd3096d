//! `meta-bamdp`: solve, sweep and validate meta-level bandit policies.

mod commands;
mod config;
mod error;
mod policies;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::validate::Scope;
use config::{Overrides, RunConfig};
use error::CliResult;

#[derive(Parser)]
#[command(name = "meta-bamdp", version, about = "Optimal planning-versus-acting policies for Bernoulli bandits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve and cache one policy per cost.
    Solve {
        #[command(flatten)]
        run: Overrides,
    },
    /// Write one metrics row per (cost, environment).
    Sweep {
        #[command(flatten)]
        run: Overrides,
        /// Continue an interrupted sweep from its resume marker.
        #[arg(long)]
        resume: bool,
    },
    /// Sensitivity of exploration timing and reward to the cost, per environment.
    Sensitivity {
        #[command(flatten)]
        run: Overrides,
    },
    /// Fit the uncertainty-bonus heuristic to simulated behavior.
    Fit {
        #[command(flatten)]
        run: Overrides,
        /// Generate the data from the heuristic with these parameters instead.
        #[arg(long, value_name = "BETA,OMEGA")]
        heuristic: Option<String>,
    },
    /// Run the validation suites; exits 1 on any failure.
    Validate {
        #[command(flatten)]
        run: Overrides,
        #[arg(long, value_enum, default_value = "all")]
        scope: Scope,
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
}

fn resolve(o: &Overrides, default_env: &str) -> CliResult<config::Resolved> {
    let r = RunConfig::from_overrides(o)?.resolve(default_env)?;
    if r.config.workers > 0 {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(r.config.workers).build_global();
    }
    Ok(r)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Solve { run } => commands::solve::run(&resolve(&run, "symmetric:0.5")?),
        Command::Sweep { run, resume } => {
            commands::sweep::run(&resolve(&run, "symmetric:0.5")?, resume).map(|_| ())
        }
        Command::Sensitivity { run } => commands::sensitivity::run(&resolve(&run, "grid:21")?),
        Command::Fit { run, heuristic } => {
            let h = heuristic.as_deref().map(commands::fit::parse_heuristic).transpose()?;
            commands::fit::run(&resolve(&run, "symmetric:0.5")?, h)
        }
        Command::Validate { run, scope, inject_fault } => {
            commands::validate::run(&resolve(&run, "symmetric:0.5")?, scope, inject_fault.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
