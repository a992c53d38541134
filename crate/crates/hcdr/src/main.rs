use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = hcdr::cli::Cli::parse();
    ExitCode::from(hcdr::cli::run(&cli))
}
