use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use losscomp::experiments::{acceptance, run, Experiment, ExperimentConfig, DEFAULT_SEED};

/// Loss-compensation experiments: compensated matrix elements versus
/// truncation index and detector efficiency.
#[derive(Parser)]
#[command(name = "losscomp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compensated element versus j_M from homodyne data.
    Fig1(RunArgs),
    /// Propagated error versus efficiency for several j_M.
    Fig2(RunArgs),
    /// Photon counting below eta = 1/2, with a homodyne control.
    Direct(RunArgs),
    /// Runs the acceptance criteria and prints one line each.
    Selftest {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Main CSV path; sibling tables share its stem.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the number of independent trials per efficiency.
    #[arg(long)]
    trials: Option<usize>,
    /// Print the default configuration for this experiment and exit.
    #[arg(long)]
    print_default_config: bool,
}

fn load(experiment: Experiment, args: &RunArgs) -> losscomp::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::parse(&std::fs::read_to_string(path)?, experiment)?,
        None => ExperimentConfig::default_for(experiment),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(out) = &args.out {
        cfg.output = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_experiment(experiment: Experiment, args: &RunArgs) -> losscomp::Result<()> {
    if args.print_default_config {
        print!("{}", ExperimentConfig::default_for(experiment).to_text());
        return Ok(());
    }
    let cfg = load(experiment, args)?;
    let report = run(&cfg)?;
    for path in report.write(&cfg.output)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match &cli.command {
        Command::Fig1(a) => (Experiment::Fig1, a),
        Command::Fig2(a) => (Experiment::Fig2, a),
        Command::Direct(a) => (Experiment::Direct, a),
        Command::Selftest { seed } => {
            let mut all_ok = true;
            for criterion in acceptance::run_all(*seed) {
                println!("{}", criterion.line());
                all_ok &= criterion.ok();
            }
            return if all_ok { ExitCode::SUCCESS } else { ExitCode::FAILURE };
        }
    };
    match run_experiment(experiment, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
