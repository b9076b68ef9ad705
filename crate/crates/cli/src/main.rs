//! `pointstream` command-line front end.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or parse
//! errors (including unreadable config and scene files).

mod args;
mod cmd;
mod context;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use context::{CliResult, Context};

fn run(cli: &Cli) -> CliResult {
    if let Command::Config(c) = &cli.command {
        return cmd::config(c, cli.config.as_deref());
    }
    let ctx = Context::load(cli)?;
    match &cli.command {
        Command::Simulate(a) => cmd::simulate::run(&ctx, a),
        Command::Pipeline(a) => cmd::pipeline::run(&ctx, a),
        Command::Receive(a) => cmd::receive::run(&ctx, a),
        Command::Recolor(a) => cmd::recolor::run(&ctx, a),
        Command::Bench(a) => cmd::bench::run(&ctx, a),
        Command::Config(_) => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level.into())
        .format_timestamp_millis()
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        // A closed stdout (`| head`) is not a failure.
        Err(e) if e.is_broken_pipe() => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
