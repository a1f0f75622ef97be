//! JSON documents printed by each command; `schema/output.schema.json` describes them.

use bdp_core::em::{EMConfig, FitResult};
use serde::Serialize;

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Serialize)]
pub struct SimulateOutput {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub model: String,
    pub params: Vec<f64>,
    pub seed: u64,
    pub n: usize,
    pub out: String,
    pub mean_x0: f64,
    pub mean_xt: f64,
    pub mean_t: f64,
    /// Column means of the covariates, empty without covariates.
    pub covariate_means: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct FitOutput {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub model: String,
    pub seed: u64,
    pub n_observations: usize,
    pub init: Vec<f64>,
    pub config: EMConfig,
    #[serde(flatten)]
    pub result: FitResult,
}

#[derive(Debug, Serialize)]
pub struct ProbOutput {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub model: String,
    pub params: Vec<f64>,
    pub a: usize,
    pub b: usize,
    pub t: f64,
    pub z: Vec<f64>,
    pub probability: f64,
    pub error_estimate: f64,
    pub accuracy_warning: bool,
    pub clamped: bool,
}

#[derive(Debug, Serialize)]
pub struct MonteCarlo {
    pub se_up: f64,
    pub se_down: f64,
    pub se_particle_time: f64,
    pub accepted: usize,
    pub attempts: usize,
}

#[derive(Debug, Serialize)]
pub struct EstepOutput {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub model: String,
    pub method: &'static str,
    pub params: Vec<f64>,
    pub a: usize,
    pub b: usize,
    pub t: f64,
    pub z: Vec<f64>,
    pub seed: Option<u64>,
    pub probability: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub eu: Vec<f64>,
    pub ed: Vec<f64>,
    pub et: Vec<f64>,
    pub total_up: f64,
    pub total_down: f64,
    pub particle_time: f64,
    pub total_time: f64,
    pub up_minus_down: f64,
    pub monte_carlo: Option<MonteCarlo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct LoglikOutput {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub model: String,
    pub params: Vec<f64>,
    pub n_observations: usize,
    pub loglik: f64,
}
