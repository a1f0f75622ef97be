//! EM iteration, quasi-Newton acceleration and standard errors.

mod acceleration;
mod fit;
mod information;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::NumericConfig;
use crate::error::{BdpError, Result};
use crate::estep::{conditional_expectations, ExpectationSet};
use crate::models::{EmModel, MStepContext};
use crate::process::{check_params, Observation};

pub use acceleration::{accelerate_qn, SecantHistory};
pub use fit::{em_fit, Convergence, FitResult, MethodNotes, StandardErrors};
pub use information::{
    numerical_hessian, numerical_hessian_loglik, sem_information, standard_errors_from,
};

/// Which information estimates a fit reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeMethod {
    #[default]
    Sem,
    Hessian,
    Both,
    None,
}

impl SeMethod {
    pub fn sem(self) -> bool {
        matches!(self, SeMethod::Sem | SeMethod::Both)
    }

    pub fn hessian(self) -> bool {
        matches!(self, SeMethod::Hessian | SeMethod::Both)
    }
}

impl std::str::FromStr for SeMethod {
    type Err = BdpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sem" => Ok(SeMethod::Sem),
            "hessian" => Ok(SeMethod::Hessian),
            "both" => Ok(SeMethod::Both),
            "none" => Ok(SeMethod::None),
            other => Err(BdpError::InvalidArgument(format!(
                "unknown standard-error method {other:?} (expected sem, hessian, both or none)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EMConfig {
    pub max_iter: usize,
    /// Relative change `‖Δθ‖∞ / ‖θ‖∞` below which the fit stops.
    pub param_tol: f64,
    /// Absolute observed log-likelihood change below which the fit stops.
    pub loglik_tol: f64,
    pub accelerate: bool,
    pub qn_secant_count: usize,
    pub halving_cap: usize,
    pub sem_enabled: bool,
    pub hessian_enabled: bool,
    pub seed: u64,
    pub numeric: NumericConfig,
}

impl Default for EMConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            param_tol: 1e-6,
            loglik_tol: 1e-8,
            accelerate: false,
            qn_secant_count: 2,
            halving_cap: 10,
            sem_enabled: true,
            hessian_enabled: false,
            seed: 0,
            numeric: NumericConfig::default(),
        }
    }
}

impl EMConfig {
    pub fn with_se(mut self, method: SeMethod) -> Self {
        self.sem_enabled = method.sem();
        self.hessian_enabled = method.hessian();
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.numeric.validate()?;
        if !(self.param_tol > 0.0) || !(self.loglik_tol > 0.0) {
            return Err(BdpError::InvalidArgument(
                "tolerances must be positive".into(),
            ));
        }
        if self.max_iter == 0 || self.qn_secant_count == 0 || self.halving_cap == 0 {
            return Err(BdpError::InvalidArgument(
                "max_iter, qn_secant_count and halving_cap must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Conditional expectations for every observation, computed in parallel and kept in data order.
pub fn estep_all(
    model: &dyn EmModel,
    theta: &[f64],
    data: &[Observation],
    cfg: &NumericConfig,
) -> Result<Vec<ExpectationSet>> {
    data.par_iter()
        .map(|obs| conditional_expectations(model, theta, obs, cfg))
        .collect()
}

/// One EM update `M(θ)`: a full E-step at `θ` followed by the model's M-step.
pub fn em_map(
    model: &dyn EmModel,
    data: &[Observation],
    theta: &[f64],
    ctx: &MStepContext,
    cfg: &NumericConfig,
) -> Result<Vec<f64>> {
    check_params(model, theta)?;
    let exps = estep_all(model, theta, data, cfg)?;
    model.mstep(data, &exps, theta, ctx)
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn relative_change(from: &[f64], to: &[f64]) -> f64 {
    let diff = from
        .iter()
        .zip(to)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    diff / inf_norm(from).max(1e-12)
}
