//! `dsc`: generate synthetic unions of subspaces, cluster data, score
//! labelings and run benchmark presets.

mod bench;
mod cluster;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "dsc", version, about = "Direction-search subspace clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a labeled synthetic dataset.
    Synth(synth::SynthArgs),
    /// Cluster a dataset and write predicted labels.
    Cluster(cluster::ClusterArgs),
    /// Clustering error of a predicted labeling against the truth.
    Eval(EvalArgs),
    /// Run a benchmark preset or spec file.
    Bench(bench::BenchArgs),
}

#[derive(clap::Args, Debug)]
struct EvalArgs {
    /// Predicted labels (one per line).
    #[arg(long, env = "DSC_PRED")]
    pred: PathBuf,
    /// True labels: a label file, or a dataset CSV with a label column.
    #[arg(long, env = "DSC_TRUTH")]
    truth: PathBuf,
}

/// Failure carrying its exit code: 1 for numerical failures, 2 for bad
/// input or arguments.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    pub fn compute(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<dsc_core::Error> for Failure {
    fn from(e: dsc_core::Error) -> Self {
        Failure {
            code: if e.is_usage() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;

fn read_truth(path: &std::path::Path) -> CliResult<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    if text.lines().any(|l| l.trim_start().starts_with("# has_labels=")) {
        let d = dsc_core::datamodel::read_csv(path)?;
        return d
            .labels
            .ok_or_else(|| Failure::usage(format!("{}: dataset has no labels", path.display())));
    }
    Ok(dsc_core::datamodel::read_labels(path)?)
}

fn eval(args: EvalArgs) -> CliResult {
    let pred = dsc_core::datamodel::read_labels(&args.pred)?;
    let truth = read_truth(&args.truth)?;
    let err = dsc_core::evalbench::clustering_error(&pred, &truth)?;
    println!("clustering error: {err:.2}%");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth::run(a),
        Command::Cluster(a) => cluster::run(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
