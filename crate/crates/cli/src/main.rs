//! `otocml`: generate OTOC datasets, fit kernel models and emit plot tables.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use otocml::datasets::Engine;
use otocml::kernels::KernelKind;
use otocml::{Family, ParamVector, Target};

#[derive(Debug, Parser, Serialize)]
#[command(name = "otocml", version, about = "OTOC datasets and kernel ridge regression")]
pub struct Cli {
    /// Worker threads for sample labelling and grid search.
    #[arg(long, global = true, env = "OTOCML_WORKERS")]
    pub workers: Option<usize>,

    /// Where to write the run manifest (default: next to the primary output).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Sample inputs and label them with a target function.
    Gen(GenArgs),
    /// Shuffle a dataset into train and test parts.
    Split(SplitArgs),
    /// Grid-search hyperparameters by k-fold cross-validation.
    Cv(CvArgs),
    /// Fit a model on a dataset.
    Train(TrainArgs),
    /// Score a model on a labelled dataset.
    Eval(EvalArgs),
    /// Predict labels for a dataset or a single input.
    Predict(PredictArgs),
    /// Mean and spread of test R² against training-set size.
    LearningCurve(CurveArgs),
    /// Target value against maximum bond dimension.
    ChiSweep(ChiSweepArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    /// Hamiltonian family: h1, h2, h3 or h4.
    #[arg(long)]
    pub family: Family,
    /// Number of sites.
    #[arg(long)]
    pub n: usize,
    /// Target function: xz or sum.
    #[arg(long)]
    pub target: Target,
    #[arg(long)]
    pub count: usize,
    /// Labelling engine: dense (exact) or mpo (TEBD).
    #[arg(long, default_value = "dense")]
    pub engine: Engine,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Maximum bond dimension (MPO engine).
    #[arg(long, default_value_t = 64)]
    pub chi: usize,
    /// Trotter step (MPO engine).
    #[arg(long, default_value_t = otocml::mpo::DEFAULT_DT)]
    pub dt: f64,
    /// Drop singular values below this relative squared weight.
    #[arg(long, default_value_t = otocml::mpo::DEFAULT_SVD_CUTOFF)]
    pub svd_cutoff: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub test_out: PathBuf,
}

/// Optional overrides of the default hyperparameter grid.
#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    /// Comma-separated values; each list replaces its default.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub c0s: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub degrees: Option<Vec<u32>>,
}

#[derive(Debug, Args, Serialize)]
pub struct CvArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// linear, polynomial, rbf, laplacian, sigmoid or cosine.
    #[arg(long)]
    pub kernel: KernelKind,
    #[arg(long, default_value_t = otocml::regression::DEFAULT_FOLDS)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub grid: GridArgs,
    /// JSON report path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct KernelArgs {
    /// linear, polynomial, rbf, laplacian, sigmoid or cosine.
    #[arg(long)]
    pub kernel: Option<KernelKind>,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub c0: f64,
    #[arg(long, default_value_t = 1)]
    pub degree: u32,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Take kernel and λ from a cross-validation report instead.
    #[arg(long, conflicts_with = "kernel")]
    pub from_cv: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// JSON metrics path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset whose inputs are predicted.
    #[arg(long, required_unless_present = "x", conflicts_with = "x")]
    pub data: Option<PathBuf>,
    /// A single input `x1,x2,x3`.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub x: Option<ParamVector>,
    /// CSV output path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CurveArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Training-set sizes (default 50, 100, …, 1000).
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, default_value_t = otocml::regression::DEFAULT_REPEATS)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ChiSweepArgs {
    /// Hamiltonian family: h1, h2, h3 or h4.
    #[arg(long)]
    pub family: Family,
    /// Number of sites.
    #[arg(long)]
    pub n: usize,
    /// Target function: xz or sum.
    #[arg(long)]
    pub target: Target,
    /// Couplings `x1,x2,x3`.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub x: ParamVector,
    #[arg(long = "chi-list", alias = "chis", value_delimiter = ',', required = true)]
    pub chi_list: Vec<usize>,
    #[arg(long, default_value_t = otocml::mpo::DEFAULT_DT)]
    pub dt: f64,
    /// Drop singular values below this relative squared weight.
    #[arg(long, default_value_t = otocml::mpo::DEFAULT_SVD_CUTOFF)]
    pub svd_cutoff: f64,
    /// Evolve W for the full time instead of splitting it between V and W.
    #[arg(long)]
    pub no_time_splitting: bool,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_point(s: &str) -> Result<ParamVector, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [a, b, c] if parts.iter().all(|v| v.is_finite()) => Ok(ParamVector::new(a, b, c)),
        [_, _, _] => Err("coordinates must be finite".into()),
        _ => Err(format!("expected three comma-separated numbers, got {}", parts.len())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{report}");
            ExitCode::from(1)
        }
    }
}
