use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = sleeptemp_cli::Cli::parse();
    match sleeptemp_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
