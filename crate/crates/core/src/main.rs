use clap::Parser;

use sentistream::cli::{execute, Args};

fn main() -> std::process::ExitCode {
    let args = Args::parse();
    match execute(&args, &mut std::io::stdout().lock()) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
