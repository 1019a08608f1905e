use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match qbd_cli::run(qbd_cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qbd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
