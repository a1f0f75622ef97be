use std::path::PathBuf;

use bdp_core::em::SeMethod;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "bdp",
    version,
    about = "Birth-death process likelihoods, E-steps and EM fits"
)]
pub struct Cli {
    /// TOML run configuration; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads (falls back to BDP_THREADS, then all cores).
    #[arg(long, global = true, env = "BDP_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a synthetic dataset and write it as CSV.
    Simulate(SimulateArgs),
    /// Fit a model by EM.
    Fit(FitArgs),
    /// Transition probability P_ab(t).
    Prob(ProbArgs),
    /// Conditional expectations for one observation.
    Estep(EstepArgs),
    /// Observed-data log-likelihood of a dataset.
    Loglik(LoglikArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// simple, immigration, logistic, sis, glm or microsat, optionally `name:key=value,...`.
    #[arg(long)]
    pub model: Option<String>,
    /// SIS population size.
    #[arg(long)]
    pub population: Option<usize>,
    /// GLM covariate count.
    #[arg(long)]
    pub covariates: Option<usize>,
    /// Microsatellite state floor for every motif class.
    #[arg(long)]
    pub x_min: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ObservationArgs {
    #[arg(long)]
    pub a: usize,
    #[arg(long)]
    pub b: usize,
    #[arg(long)]
    pub t: f64,
    /// Covariates, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub z: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// True parameters, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub params: Option<String>,
    /// Number of observations.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub start_min: Option<usize>,
    #[arg(long)]
    pub start_max: Option<usize>,
    #[arg(long)]
    pub t_min: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Within-group covariate variance for GLM datasets.
    #[arg(long)]
    pub covariate_variance: Option<f64>,
    /// Divergence time of microsatellite pairs (observations span twice this).
    #[arg(long)]
    pub pair_time: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Starting parameters, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub init: Option<String>,
    /// Recorded in the output; fits are deterministic regardless.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON output path (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Relative parameter tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Quasi-Newton acceleration.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub accelerate: Option<bool>,
    #[arg(long, value_parser = parse_se)]
    pub se: Option<SeMethod>,
}

#[derive(Debug, Args)]
pub struct ProbArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub params: Option<String>,
    #[command(flatten)]
    pub obs: ObservationArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstepMethod {
    Laplace,
    Quadrature,
    Rejection,
}

#[derive(Debug, Args)]
pub struct EstepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub params: Option<String>,
    #[command(flatten)]
    pub obs: ObservationArgs,
    #[arg(long, value_enum)]
    pub method: Option<EstepMethod>,
    /// Accepted paths for the rejection sampler.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Relative tolerance for the quadrature method.
    #[arg(long)]
    pub quad_tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Include wall-clock time in the output (makes it nondeterministic).
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LoglikArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub params: Option<String>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_se(s: &str) -> Result<SeMethod, String> {
    s.parse().map_err(|e: bdp_core::BdpError| e.to_string())
}
