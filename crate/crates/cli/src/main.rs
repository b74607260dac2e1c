mod args;
mod commands;
mod io;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use crate::args::Cli;
use crate::io::{Failure, RunManifest};

fn init_threads() {
    let Ok(raw) = std::env::var("TSEP_THREADS") else { return };
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not size the thread pool: {e}");
            }
        }
        _ => log::warn!("ignoring TSEP_THREADS={raw:?}: expected a positive integer"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    init_threads();

    let start = Instant::now();
    let outcome = commands::run(&cli.command, cli.out.as_deref());
    let elapsed = start.elapsed().as_secs_f64();

    let (run, code) = match outcome {
        Ok(run) => {
            let code = run.code;
            (run, code)
        }
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            return ExitCode::from(code);
        }
    };

    let bytes = io::to_json_bytes(&run.result);
    let written = match &cli.out {
        Some(path) => io::write_atomic(path, &bytes),
        None => io::write_stdout(&bytes),
    };
    if let Err(e) = written {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    if let Some(msg) = &run.message {
        eprintln!("{msg}");
    }

    if let Some(path) = &cli.manifest {
        let manifest = RunManifest::new(std::env::args().collect(), run.meta, elapsed, code, &bytes);
        if let Err(e) = io::write_atomic(path, &io::to_json_bytes(&manifest)) {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    }
    ExitCode::from(code)
}
