mod commands;
mod config;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

/// Exit status for invalid input or configuration.
const EXIT_VALIDATION: u8 = 1;
/// Exit status for failures while running (I/O, numerical failure).
const EXIT_RUNTIME: u8 = 2;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<dcmd::Error>() {
            return if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            };
        }
    }
    EXIT_RUNTIME
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match config::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version requests are not errors
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
