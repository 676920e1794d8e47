mod args;
mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode as ProcessExit;

use clap::Parser;
use log::{error, LevelFilter};

use args::{Cli, Command};
use commands::Outcome;
use config::ConfigFile;
use error::{CliError, CliResult, ExitCode};

fn init_logging(cli: &Cli) {
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => LevelFilter::Error,
        (false, 0) => LevelFilter::Warn,
        (false, 1) => LevelFilter::Info,
        (false, 2) => LevelFilter::Debug,
        _ => LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .init();
}

fn run(cli: &Cli) -> CliResult<Outcome> {
    let cfg = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let threads = cfg.pick(cli.threads, "threads", 0usize)?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot set up {threads} threads: {e}")))?;
    }
    match &cli.command {
        Command::Extract(a) => commands::run_extract(a, &cfg),
        Command::Detect(a) => commands::run_detect(a, &cfg),
        Command::Eval(a) => commands::run_eval(a),
        Command::Sweep(a) => commands::run_sweep(a, &cfg),
        Command::Synth(a) => commands::run_synth(a, &cfg),
    }
}

fn main() -> ProcessExit {
    let cli = Cli::parse();
    init_logging(&cli);
    match run(&cli) {
        Ok(Outcome::Done) => ProcessExit::SUCCESS,
        Ok(Outcome::NotConverged) => ProcessExit::from(ExitCode::NotConverged as u8),
        Err(e) => {
            error!("{e}");
            ProcessExit::from(e.code as u8)
        }
    }
}
