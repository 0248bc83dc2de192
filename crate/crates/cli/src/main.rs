//! `gridcast`: synthesize, ingest, fit, train, forecast and rank weather
//! parameters by sensitivity. Exit codes: 0 success, 2 invalid input,
//! 3 every weather parameter failed to fit, 4 training failure.

mod args;
mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use config::RunConfig;
use error::CliError;

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&cli.opts)?;
    match cli.command {
        Command::Synth => commands::synth(&cfg),
        Command::Ingest => commands::ingest(&cfg),
        Command::Fit => commands::fit(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Forecast => commands::forecast(&cfg),
        Command::Sensitivity => commands::sensitivity(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
