//! `idsel`: order a corpus for annotation, simulate sessions, evaluate the
//! resulting few-shot classifiers, or serve live sessions over HTTP.
//!
//! Exit status is 0 on success, 2 for invalid input and 1 for runtime
//! failures. Set `IDSEL_LOG` (e.g. `IDSEL_LOG=debug`) for logs on stderr.

mod args;
mod commands;
mod meta;
mod serve;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use tracing_subscriber::EnvFilter;

use args::{Cli, Command};
use commands::CliResult;

fn init_logging() {
    let filter = EnvFilter::try_from_env("IDSEL_LOG").unwrap_or_else(|_| EnvFilter::new("warn"));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
}

fn run(cli: Cli) -> CliResult<()> {
    let summary = match &cli.command {
        Command::Select(a) => commands::select(a)?,
        Command::Simulate(a) => commands::simulate(a)?,
        Command::Evaluate(a) => commands::evaluate(a)?,
        Command::Synth(a) => commands::synth(a)?,
        Command::Serve(a) => return serve::run(a),
    };
    let mut out = std::io::stdout().lock();
    // a closed pipe is not worth an error status
    let _ = out.write_all(summary.as_bytes());
    let _ = out.flush();
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("idsel: {e}");
            ExitCode::from(e.code)
        }
    }
}
