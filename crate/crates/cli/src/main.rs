use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use ldtsm_cli::{run, Cli, WORKERS_ENV};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                {
                    eprintln!("error: cannot size the worker pool: {e}");
                    return ExitCode::from(2);
                }
            }
            _ => {
                eprintln!("error: {WORKERS_ENV} must be a positive integer, got {v:?}");
                return ExitCode::from(2);
            }
        }
    }
    match run(&cli.command) {
        Ok(outcome) => {
            // a closed stdout (e.g. piped into `head`) is not an error of the run
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{}", outcome.summary.trim_end());
            for f in &outcome.files {
                let _ = writeln!(out, "wrote {}", f.display());
            }
            if outcome.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
