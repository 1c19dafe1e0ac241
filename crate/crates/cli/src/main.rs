//! `imbalab`: run imbalance experiments, resample CSVs, compare saved models
//! and generate the Gaussian fixture.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use imbalab_core::harness::KernelName;
use imbalab_core::{Error, Method, ModelKind};

#[derive(Parser)]
#[command(name = "imbalab", version, about = "Class-imbalance experiments with inspectable models")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment and write reports.
    Run(Box<RunArgs>),
    /// Resample a CSV and write it with provenance columns.
    Augment(AugmentArgs),
    /// Compare two saved models.
    Diagnose(DiagnoseArgs),
    /// Write the two-Gaussian imbalanced fixture as CSV.
    Gen(GenArgs),
}

/// Every flag overrides the config-file field of the same name.
#[derive(Args)]
struct RunArgs {
    /// TOML experiment config.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Label column: name, zero-based index, or `last`.
    #[arg(long)]
    label_col: Option<String>,
    #[arg(long, alias = "method", value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long, alias = "model", value_delimiter = ',')]
    models: Option<Vec<ModelKind>>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k_neighbors: Option<usize>,
    #[arg(long)]
    remix_alpha: Option<f64>,
    #[arg(long)]
    svm_c: Option<f64>,
    #[arg(long)]
    kernel: Option<KernelName>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Epochs for logistic regression and the network.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
    /// Network top-K as a fraction of the features instead of a count.
    #[arg(long)]
    grad_fraction: Option<f64>,
    #[arg(long)]
    save_models: bool,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value = "last")]
    label_col: String,
    #[arg(short, long)]
    method: Method,
    #[arg(long, default_value_t = 5)]
    k_neighbors: usize,
    #[arg(long, default_value_t = 0.2)]
    remix_alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Saved network whose latent space `dsm` and `eos` sample in.
    #[arg(long)]
    network: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Model trained on the untreated data.
    #[arg(long)]
    base: PathBuf,
    /// Model to compare against the base.
    #[arg(long)]
    model: PathBuf,
    /// Evaluation CSV for top-K feature sets.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = "last")]
    label_col: String,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    #[arg(long)]
    grad_fraction: Option<f64>,
    /// Write the JSON report here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 2464)]
    n_major: usize,
    #[arg(long, default_value_t = 72)]
    n_minor: usize,
    #[arg(long, default_value_t = 72)]
    features: usize,
    #[arg(long, default_value_t = 1.9)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::InvalidArgument(_)) => EXIT_VALIDATION,
        _ => EXIT_RUNTIME,
    }
}

/// The error chain, skipping causes already spelled out by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Run(args) => commands::run(*args),
        Command::Augment(args) => commands::augment(args),
        Command::Diagnose(args) => commands::diagnose(args),
        Command::Gen(args) => commands::gen(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
