use std::process::ExitCode;

use ahntp::cli::{run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    // usage errors exit with status 2 inside parse()
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
