use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = causal_cli::Cli::parse();
    match causal_cli::run(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
