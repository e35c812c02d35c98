mod config;
mod report;
mod tasks;

use clap::Parser;
use config::{Cli, RunConfig};
use report::Status;
use std::process::ExitCode;

const THREADS_VAR: &str = "TOEPLITZ_SPECTRA_THREADS";

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Ok(v) = std::env::var(THREADS_VAR) {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: {THREADS_VAR}={v:?} is not a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    let cfg = match RunConfig::resolve(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let sections = tasks::run(&cfg);
    if let Err(e) = report::write(&cfg.out, &cfg, &sections) {
        eprintln!("error: cannot write report to {}: {e}", cfg.out.display());
        return ExitCode::from(2);
    }
    for s in &sections {
        if let Status::Failed {
            module,
            operation,
            message,
        } = &s.status
        {
            eprintln!("{}: numeric failure in {module}::{operation}: {message}", s.name);
        }
    }
    ExitCode::from(tasks::exit_code(cfg.task, &sections) as u8)
}
