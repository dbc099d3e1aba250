use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use swipt_cli::experiment::all_succeeded;
use swipt_cli::output::write_all;
use swipt_cli::{run_experiment, ExperimentSpec, Mode, RunOptions};

#[derive(Parser)]
#[command(name = "swipt", version, about = "IRS-assisted secure SWIPT beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment batch and write results to a directory.
    Run {
        /// Experiment TOML file.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the mode in the config file.
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        out: PathBuf,
        /// Instances per sweep point.
        #[arg(long)]
        seeds: Option<usize>,
        /// Also write solutions.jsonl with every (w, u).
        #[arg(long)]
        dump_solutions: bool,
        #[arg(long, short)]
        verbose: bool,
        /// Record zero wall-clock time so repeated runs give identical files.
        #[arg(long)]
        no_timing: bool,
        /// Worker threads; defaults to the number of cores.
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let Command::Run {
        config,
        mode,
        out,
        seeds,
        dump_solutions,
        verbose,
        no_timing,
        threads,
    } = cli.command;
    let level = if verbose { "debug" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
    let mut spec = ExperimentSpec::from_toml_str(&text)?;
    if let Some(m) = mode {
        spec.mode = m;
    }
    if let Some(k) = seeds {
        spec.seeds = k;
    }
    spec.out_dir = out;
    spec.validate()?;
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }

    let outcomes = run_experiment(&spec, RunOptions { no_timing })?;
    write_all(&spec, &outcomes, &spec.out_dir, dump_solutions)?;
    let failed = outcomes.iter().filter(|o| !o.row.succeeded()).count();
    log::info!(
        "{} runs written to {} ({failed} not converged)",
        outcomes.len(),
        spec.out_dir.display()
    );
    Ok(all_succeeded(&outcomes))
}
