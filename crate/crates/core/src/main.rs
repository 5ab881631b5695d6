use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

mod cli;

/// Exit code for bad input: usage errors and validation failures.
const EXIT_VALIDATION: u8 = 1;
/// Exit code for runs that were set up correctly but failed.
const EXIT_RUNTIME: u8 = 2;

fn main() -> ExitCode {
    let parsed = match cli::Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_VALIDATION),
            };
        }
    };
    match cli::run(parsed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let validation = err
                .downcast_ref::<stepsynth::error::Error>()
                .is_some_and(|e| e.is_validation())
                || err.downcast_ref::<std::num::ParseFloatError>().is_some();
            ExitCode::from(if validation {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            })
        }
    }
}
