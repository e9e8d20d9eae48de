mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;
use instinct_core::Error;

use args::{Cli, Command};
use config::{ConfigFile, RunConfig, UsageError};

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_IO: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Numerical(_) => EXIT_NUMERICAL,
                Error::Io { .. } | Error::Json { .. } => EXIT_IO,
                _ => EXIT_USAGE,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return EXIT_IO;
        }
    }
    EXIT_USAGE
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let name = cli.command.name();
    let run_args = match &cli.command {
        Command::Summarize(a) => return commands::summarize(a),
        Command::PretrainPolicy(a)
        | Command::PretrainInstinct(a)
        | Command::PretrainBaseline(a)
        | Command::Train(a)
        | Command::Evaluate(a)
        | Command::Suite(a)
        | Command::ExportTrajectory(a) => a,
    };
    let file = run_args
        .config
        .as_deref()
        .map(ConfigFile::load)
        .transpose()?;
    let cfg = RunConfig::resolve(name, file, &run_args.as_layer())?;
    commands::prepare_output(&cfg)?;
    match cli.command {
        Command::PretrainPolicy(_) => commands::pretrain_policy(&cfg),
        Command::PretrainInstinct(_) => commands::pretrain_instinct(&cfg),
        Command::PretrainBaseline(_) => commands::pretrain_baseline(&cfg),
        Command::Train(_) => commands::train(&cfg),
        Command::Evaluate(_) => commands::evaluate_checkpoint(&cfg),
        Command::Suite(_) => commands::suite(&cfg),
        Command::ExportTrajectory(_) => commands::export(&cfg),
        Command::Summarize(_) => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
