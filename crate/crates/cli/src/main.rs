//! `puiq`: dataset generation, encoding, scoring, training and evaluation.

mod commands;
mod runlog;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand};

use commands::{EncodeArgs, EvalArgs, ExperimentArgs, MakeDatasetArgs, ScoreArgs, TrainArgs};

#[derive(Debug, Parser)]
#[command(
    name = "puiq",
    version,
    about = "Perceptually uniform HDR image quality: data, metrics, training, evaluation",
    after_help = "Environment:\n  PUIQ_THREADS  worker threads, 0 = one per core [default: 0]\n  RUST_LOG      log filter [default: warn]"
)]
struct Cli {
    /// Seed for every random choice; `train` uses the config file's seed when omitted
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Append-only CSV that receives one row per invocation
    #[arg(long, global = true, value_name = "CSV", default_value = "puiq-runs.csv")]
    run_log: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic SDR or simulated-HDR dataset with a manifest
    MakeDataset(MakeDatasetArgs),
    /// Convert an image to PU21 or PQ values and write them as PFM
    Encode(EncodeArgs),
    /// Score a distorted image against its reference with a classical metric
    Score(ScoreArgs),
    /// Train the quality network, optionally with domain adaptation
    Train(TrainArgs),
    /// Evaluate a checkpoint on a labeled manifest
    Eval(EvalArgs),
    /// Run the CORAL ablation on synthetic data and print the comparison table
    Experiment(ExperimentArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::MakeDataset(_) => "make-dataset",
            Command::Encode(_) => "encode",
            Command::Score(_) => "score",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Experiment(_) => "experiment",
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("PUIQ_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| anyhow::anyhow!("PUIQ_THREADS must be a non-negative integer, got {raw:?}"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn parse() -> Result<(Cli, ArgMatches), clap::Error> {
    let matches = Cli::command().try_get_matches()?;
    let cli = Cli::from_arg_matches(&matches)?;
    Ok((cli, matches))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (cli, matches) = match parse() {
        Ok(parsed) => parsed,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (name, sub) = matches.subcommand().expect("a subcommand is required");
    let mut definition = Cli::command();
    definition.build();
    let definition = definition
        .find_subcommand(name)
        .expect("parsed subcommand exists")
        .clone();
    let explicit_seed = sub.value_source("seed") == Some(clap::parser::ValueSource::CommandLine);

    let start = chrono::Utc::now();
    let result = configure_threads().and_then(|()| commands::run(&cli.command, cli.seed, explicit_seed));
    let end = chrono::Utc::now();

    let (status, artifacts, seed, code) = match result {
        Ok(done) => ("ok".to_string(), done.artifacts, done.seed, ExitCode::SUCCESS),
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            (format!("error: {}", one_line(&e)), Vec::new(), cli.seed, ExitCode::from(1))
        }
    };
    let record = runlog::RunRecord {
        subcommand: cli.command.name().into(),
        flags: runlog::effective_flags(&definition, sub),
        seed,
        start,
        end,
        status,
        artifacts,
    };
    if let Err(e) = runlog::append(&cli.run_log, &record) {
        eprintln!("error: {}", one_line(&e));
        return ExitCode::from(1);
    }
    code
}

fn one_line(e: &anyhow::Error) -> String {
    let text = format!("{e:#}");
    text.lines().map(str::trim).collect::<Vec<_>>().join(" ")
}
