//! `roughvol`: simulation, pricing, calibration and Hurst estimation from the command line.

mod args;
mod commands;
mod error;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use commands::{calibrate, hurst, price, selftest, simulate, Outcome};
use error::Failure;

#[derive(Debug, Parser)]
#[command(name = "roughvol", version, about = "Rough volatility models for commodity futures options")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "ROUGHVOL_THREADS")]
    threads: Option<usize>,
    /// JSON object of options (or a run manifest) that overrides the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate spot and variance paths and summarize them per grid node.
    Simulate(simulate::SimulateArgs),
    /// Monte Carlo smile for one expiry.
    Price(price::PriceArgs),
    /// ATM term structure across mean-reversion speeds for one futures maturity.
    Samuelson(price::SamuelsonArgs),
    /// Calibrate a model to a quote surface.
    Calibrate(calibrate::CalibrateArgs),
    /// Estimate the Hurst exponent of realized volatility.
    Hurst(hurst::HurstArgs),
    /// Run the acceptance suite.
    Selftest(selftest::SelftestArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Price(_) => "price",
            Command::Samuelson(_) => "samuelson",
            Command::Calibrate(_) => "calibrate",
            Command::Hurst(_) => "hurst",
            Command::Selftest(_) => "selftest",
        }
    }
}

fn resolve<A: Serialize + DeserializeOwned>(args: A, name: &str, config: Option<&Path>) -> Result<A, Failure> {
    match config {
        Some(path) => manifest::overlay(args, name, path),
        None => Ok(args),
    }
}

fn dispatch(command: Command, config: Option<&Path>) -> Result<Outcome, Failure> {
    let name = command.name();
    match command {
        Command::Simulate(a) => simulate::run(resolve(a, name, config)?),
        Command::Price(a) => price::run_price(resolve(a, name, config)?),
        Command::Samuelson(a) => price::run_samuelson(resolve(a, name, config)?),
        Command::Calibrate(a) => calibrate::run(resolve(a, name, config)?),
        Command::Hurst(a) => hurst::run(resolve(a, name, config)?),
        Command::Selftest(a) => selftest::run(resolve(a, name, config)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(error::EXIT_CONFIG as u8);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(error::EXIT_RUNTIME as u8);
        }
    }
    let name = cli.command.name();
    match dispatch(cli.command, cli.config.as_deref()) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::FAILURE,
        Err(f) => {
            eprintln!("error: {}", f.message());
            if let Failure::Config(_) = f {
                let mut cmd = Cli::command();
                if let Some(sub) = cmd.find_subcommand_mut(name) {
                    eprintln!("\n{}", sub.render_usage());
                    eprintln!("For more information, try `roughvol {name} --help`.");
                }
            }
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
