use std::process::ExitCode;

use clap::Parser;
use jingbing_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    // Configuration is by flag only; the logger ignores the environment.
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .format_timestamp_secs()
        .init();
    match run(cli, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
