use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fbmlab::config::{ExperimentConfig, VerifierName};
use fbmlab::runner::{self, Run};
use fbmlab::Result;

#[derive(Parser)]
#[command(name = "fbmlab", version, about = "fBm paths, SDE solvers and concentration checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Verifiers to run, comma separated (verify only).
    #[arg(long, global = true, value_delimiter = ',')]
    verifier: Option<Vec<String>>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Sample fBm paths.
    Sample,
    /// Solve the configured SDE along sampled drivers.
    Solve,
    /// Run verifiers and write reports.
    Verify,
    /// Re-estimate the calibrated constants.
    Calibrate,
}

fn execute(cli: Cli) -> Result<i32> {
    let config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => return Err(fbmlab::Error::Config("--config PATH is required".into())),
    };
    let verifiers = cli
        .verifier
        .map(|names| names.iter().map(|n| n.parse::<VerifierName>()).collect::<Result<Vec<_>>>())
        .transpose()?;
    let run = Run::new(config, cli.seed, cli.out, verifiers)?;
    let command = cli.command;
    runner::with_jobs(cli.jobs, || match command {
        Command::Sample => runner::cmd_sample(&run),
        Command::Solve => runner::cmd_solve(&run),
        Command::Calibrate => runner::cmd_calibrate(&run),
        Command::Verify => runner::cmd_verify(&run).map(|(code, report)| {
            for v in &report.verifiers {
                println!("{:<16} {:?}{}", v.name.as_str(), v.status, v.message.as_deref().map(|m| format!(": {m}")).unwrap_or_default());
            }
            code
        }),
    })?
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", runner::diagnostic(&e));
            ExitCode::from(runner::exit_code(&e) as u8)
        }
    }
}
