//! Experiment driver: each subcommand runs one module pipeline from a
//! config file and writes machine-readable results plus a run manifest.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bihlab::config::ExperimentConfig;
use bihlab::experiment::{self, RunContext};

#[derive(Parser)]
#[command(
    name = "bihlab",
    version,
    about = "Numerical laboratory for biharmonic inverse problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file (TOML key = value with sections); defaults apply when absent
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for results and the run manifest
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the config seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Bounded worker count for batch parallelism (0 = library default)
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Print progress notes
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Tensor-algebra and null-variety recovery property suites
    TensorSelftest,
    /// Manufactured-solution convergence study of the clamped solver
    Solve,
    /// Remainder decay profiles of the oscillatory solutions
    CgoDecay,
    /// Pointwise symbol-extraction cascade on synthetic coefficients
    LocalExtract,
    /// Divided differences against the directly assembled linearization
    Linearize,
    /// Coefficient recovery from simulated boundary measurements
    Invert,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cmd = match cli.command {
        Command::TensorSelftest => experiment::Subcommand::TensorSelftest,
        Command::Solve => experiment::Subcommand::Solve,
        Command::CgoDecay => experiment::Subcommand::CgoDecay,
        Command::LocalExtract => experiment::Subcommand::LocalExtract,
        Command::Linearize => experiment::Subcommand::Linearize,
        Command::Invert => experiment::Subcommand::Invert,
    };

    let mut config = match &cli.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        },
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }

    if config.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build_global()
        {
            eprintln!("error: cannot configure {} workers: {e}", config.workers);
            return ExitCode::from(1);
        }
    }

    let out_dir = cli
        .out
        .unwrap_or_else(|| PathBuf::from("out").join(cmd.name()));
    let ctx = RunContext {
        config,
        out_dir,
        verbose: cli.verbose,
    };

    match experiment::run(cmd, &ctx) {
        Ok(outcome) if outcome.pass => {
            println!("{}: ok (results in {})", cmd.name(), ctx.out_dir.display());
            ExitCode::SUCCESS
        }
        Ok(_) => {
            eprintln!(
                "{}: checks FAILED (see {})",
                cmd.name(),
                ctx.out_dir.join("results.json").display()
            );
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(experiment::exit_code_for(&e) as u8)
        }
    }
}
