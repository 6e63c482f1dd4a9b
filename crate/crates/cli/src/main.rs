mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use gsema_core::error::{ErrorKind, GsemaError};

use args::{Cli, Command};

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: cannot start {} worker threads: {e}", cli.threads);
        return ExitCode::from(EXIT_CONFIG);
    }
    let outcome = match &cli.command {
        Command::Run(a) => commands::run(a, cli.threads),
        Command::Score(a) => commands::score(a),
        Command::Meta(a) => commands::meta(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Permute(a) => commands::permute(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let kind = err
        .chain()
        .find_map(|cause| cause.downcast_ref::<GsemaError>())
        .map_or(ErrorKind::Data, GsemaError::kind);
    match kind {
        ErrorKind::Config => EXIT_CONFIG,
        ErrorKind::Data => EXIT_DATA,
        ErrorKind::Numeric => EXIT_NUMERIC,
    }
}
