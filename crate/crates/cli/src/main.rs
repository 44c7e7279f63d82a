mod config;
mod generate;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hybrid_alloc::instances::ProblemSet;

use config::{ExperimentConfig, Overrides};

/// Hybrid uniform/lookahead sample allocation experiments.
#[derive(Parser)]
#[command(name = "hybrid-alloc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random problem instances and a manifest of their seeds.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every (instance, policy, replication), one trace CSV per run.
    /// Runs whose trace is already complete are skipped.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, required = true)]
        seed: u64,
        /// instance directory (default: <out>/instances)
        #[arg(long)]
        instances: Option<PathBuf>,
    },
    /// Summaries, comparison tables and per-stage curves from trace CSVs.
    Report {
        #[command(flatten)]
        common: Common,
        /// trace directory (default: <out>/traces)
        #[arg(long)]
        traces: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML experiment config
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// restrict to one problem set
    #[arg(long)]
    set: Option<ProblemSet>,
    /// reduced scale: 2 instances x 2 replications
    #[arg(long)]
    smoke: bool,
}

impl Common {
    fn load(&self, seed: Option<u64>) -> anyhow::Result<ExperimentConfig> {
        let overrides = Overrides {
            seed,
            workers: self.workers,
            out: self.out.clone(),
            set: self.set,
            smoke: self.smoke,
        };
        ExperimentConfig::load(self.config.as_deref(), &overrides)
    }
}

fn execute(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Generate { common, seed } => generate::cmd_generate(&common.load(seed)?),
        Command::Run {
            common,
            seed,
            instances,
        } => run::cmd_run(&common.load(Some(seed))?, instances.as_deref()),
        Command::Report { common, traces } => report::cmd_report(&common.load(None)?, traces.as_deref()),
    }
}

/// Clap's multi-line usage errors folded onto one line.
fn one_line(err: &clap::Error) -> String {
    err.to_string()
        .lines()
        .take_while(|l| !l.starts_with("Usage:"))
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", one_line(&e));
            return ExitCode::from(2);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
