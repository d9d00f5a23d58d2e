use std::process::ExitCode;

use clap::Parser;
use imusynth::cli::{run, RunConfig};

fn main() -> ExitCode {
    let cfg = match RunConfig::try_parse() {
        Ok(cfg) => cfg,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let stdout = std::io::stdout();
    match run(&cfg, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("imusynth: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
