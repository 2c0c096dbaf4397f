//! `oodeval`: score, evaluate, calibrate and augment from the command line.

mod commands;
mod inputs;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "oodeval", version, about = "Out-of-distribution scoring, evaluation and augmentation")]
struct Cli {
    /// Worker threads for data-parallel sections (default: available parallelism).
    #[arg(long, global = true, env = "OODEVAL_THREADS")]
    threads: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score items with one detector and write an `id,score` CSV.
    Score(commands::score::ScoreArgs),
    /// Evaluate scores against labels (AUROC, AUPR, FPR at recall).
    Eval(commands::eval::EvalArgs),
    /// Per-image evaluation of pixel score maps against anomaly masks.
    SegEval(commands::seg_eval::SegEvalArgs),
    /// Build a typicality matrix from validation outputs.
    Typicality(commands::typicality::TypicalityArgs),
    /// Binned L2 calibration error of classifier confidences.
    Calibrate(commands::calibrate::CalibrateArgs),
    /// Response-rate accuracy curve and its area.
    Aurra(commands::calibrate::AurraArgs),
    /// Augment a directory of PNG images through a distorted network.
    Augment(commands::augment::AugmentArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(oodeval::Error::Config("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Score(a) => commands::score::run(a),
        Command::Eval(a) => commands::eval::run(a),
        Command::SegEval(a) => commands::seg_eval::run(a),
        Command::Typicality(a) => commands::typicality::run(a),
        Command::Calibrate(a) => commands::calibrate::run_calibrate(a),
        Command::Aurra(a) => commands::calibrate::run_aurra(a),
        Command::Augment(a) => commands::augment::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e
                .chain()
                .find_map(|c| c.downcast_ref::<oodeval::Error>())
                .map_or("Error", |e| e.kind());
            eprintln!("error[{kind}]: {e:#}");
            ExitCode::FAILURE
        }
    }
}
