use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use exprank_core::rerank::CalibrationMode;
use exprank_core::PolicyKind;

mod commands;

/// Exposure-aware re-ranking of recommendation lists.
#[derive(Debug, Parser)]
#[command(name = "exprank", version)]
struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a dataset and write its normalized form, id map and split.
    Ingest(IngestArgs),
    /// Generate a synthetic two-group dataset.
    Synth(SynthArgs),
    /// Train the factor model and write candidate scores for test users.
    Train(TrainArgs),
    /// Re-rank candidate lists towards a target exposure distribution.
    Rerank(RerankArgs),
    /// Score rankings against held-out interactions.
    Evaluate(EvaluateArgs),
    /// Pick λ for a policy under an NDCG budget.
    Calibrate(CalibrateArgs),
    /// Run the full pipeline from a config file.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Interaction log (`user_id,item_id,timestamp`, or MovieLens `.dat`).
    #[arg(long)]
    interactions: PathBuf,
    /// Item metadata (`item_id,provider_id,attribute,categories`).
    #[arg(long)]
    items: PathBuf,
    /// Fraction of each user's most recent interactions held out.
    #[arg(long, default_value_t = 0.2)]
    holdout: f64,
}

#[derive(Debug, Args)]
struct PolicyArgs {
    /// Target policy: cat, int, par, per or custom.
    #[arg(long, default_value = "par")]
    policy: PolicyKind,
    /// Custom target mass, e.g. `--target minority=0.3` (repeatable).
    #[arg(long = "target", value_parser = parse_target)]
    targets: Vec<(String, f64)>,
}

#[derive(Debug, Args)]
struct CalibrationArgs {
    /// Allowed relative NDCG loss against λ = 1.
    #[arg(long, default_value_t = 0.10)]
    budget: f64,
    /// λ grid step.
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    #[arg(long = "calibrate-mode", default_value = "min-feasible")]
    mode: CalibrationMode,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    users: usize,
    #[arg(long = "num-items", default_value_t = 100)]
    num_items: usize,
    /// Fraction of the catalog in the minority group.
    #[arg(long, default_value_t = 0.1)]
    minority_share: f64,
    /// Probability that an interaction goes to a minority item.
    #[arg(long, default_value_t = 0.07)]
    affinity: f64,
    #[arg(long, default_value_t = 20)]
    per_user: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; receives interactions.csv and items.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 1024)]
    batch: usize,
    /// Negative samples per observed interaction and epoch.
    #[arg(long, default_value_t = 10)]
    triplets: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Candidates kept per user.
    #[arg(long, default_value_t = 100)]
    pool_size: usize,
    /// Output directory; receives model.bin, scores.csv and loss.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RerankArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Candidate scores (`user_id,item_id,score`).
    #[arg(long)]
    scores: PathBuf,
    #[command(flatten)]
    policy: PolicyArgs,
    /// Trade-off weight: 1 keeps the score order, 0 chases the target only.
    #[arg(long, default_value_t = 1.0, conflicts_with = "calibrate")]
    lambda: f64,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    pool_size: usize,
    /// Choose λ from the held-out split instead of `--lambda`.
    #[arg(long)]
    calibrate: bool,
    #[command(flatten)]
    calibration: CalibrationArgs,
    /// Output rankings (`user_id,rank,item_id,score`).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Rankings (`user_id,rank,item_id,score`).
    #[arg(long)]
    rankings: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Minority attribute value (default: the smallest catalog group).
    #[arg(long)]
    minority: Option<String>,
    /// Also report the Hellinger distance to this policy's targets.
    #[arg(long)]
    policy: Option<PolicyKind>,
    #[arg(long = "target", value_parser = parse_target)]
    targets: Vec<(String, f64)>,
    /// Per-user report CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    scores: PathBuf,
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    pool_size: usize,
    #[command(flatten)]
    calibration: CalibrationArgs,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_target(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected attribute=mass")?;
    let v: f64 = v.trim().parse().map_err(|_| format!("invalid mass {v:?}"))?;
    Ok((k.trim().to_owned(), v))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
