use std::process::ExitCode;

use clap::Parser;
use greencoin_cli::{run, Cli, CliError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli.command).and_then(|csv| match &cli.out {
        Some(path) => std::fs::write(path, csv).map_err(CliError::from),
        None => {
            print!("{csv}");
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("greencoin: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
