use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match spdt_cli::run(spdt_cli::Cli::parse()) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
