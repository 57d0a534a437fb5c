use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use toda::job::{render, run, with_timing, JobConfig};
use toda::Error;

/// Monte Carlo toolkit for Toda correlation functions on the sphere.
#[derive(Debug, Parser)]
#[command(name = "toda", version)]
struct Cli {
    /// Job file in JSON.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed of the job file.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the replica count of the job file.
    #[arg(long)]
    replicas: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Result path; defaults to the job's `output` or standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    match execute(&cli, started) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            let kind = match &e {
                Error::Config(_) => "config",
                Error::Io { .. } => "io",
                _ => "runtime",
            };
            eprintln!("toda: {kind} error: {e}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: &Cli, started: Instant) -> toda::Result<i32> {
    if cli.workers == 0 {
        return Err(Error::Config("range violation: --workers must be at least 1".into()));
    }
    let mut cfg = JobConfig::load(&cli.config)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(r) = cli.replicas {
        cfg.replicas = r;
    }
    let job = cfg.resolve()?;
    let outcome = run(&job, cli.workers)?;
    let text = render(&with_timing(outcome.document, started, cli.workers));
    match cli.out.as_ref().or(cfg.output.as_ref()) {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?,
        None => print!("{text}"),
    }
    if outcome.exit_code == 2 {
        eprintln!("toda: Seiberg bounds rejected the insertions");
    }
    Ok(outcome.exit_code)
}
