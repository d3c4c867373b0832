mod args;
mod commands;
mod output;

use clap::Parser;
use std::process::ExitCode;

use args::Cli;
use commands::Status;
use output::IoFailure;

const EXIT_VERIFICATION: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<IoFailure>() || cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
        if let Some(e) = cause.downcast_ref::<gue_quench::Error>() {
            return match e {
                gue_quench::Error::InvalidParameter { .. }
                | gue_quench::Error::DimensionMismatch { .. } => EXIT_USAGE,
                gue_quench::Error::Io(_) => EXIT_IO,
                _ => EXIT_VERIFICATION,
            };
        }
    }
    EXIT_VERIFICATION
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::VerificationFailed) => ExitCode::from(EXIT_VERIFICATION),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
