use serde::{Deserialize, Serialize};

use crate::error::{BdpError, Result};

/// Birth and death rates of a general birth-death process as functions of the state `k`,
/// a parameter vector and a per-observation covariate vector.
///
/// Implementations must return finite nonnegative rates on the support, `0` for the death
/// rate at [`state_floor`](RateModel::state_floor) and `0` for the birth rate at
/// [`state_cap`](RateModel::state_cap) when one exists.
pub trait RateModel: Send + Sync {
    fn name(&self) -> &str;

    fn param_names(&self) -> Vec<String>;

    fn param_dim(&self) -> usize {
        self.param_names().len()
    }

    /// Required covariate length; `0` when the model ignores covariates.
    fn covariate_dim(&self) -> usize {
        0
    }

    fn birth_rate(&self, k: usize, theta: &[f64], z: &[f64]) -> f64;

    fn death_rate(&self, k: usize, theta: &[f64], z: &[f64]) -> f64;

    /// Smallest supported state; may depend on the covariates.
    fn state_floor(&self, _z: &[f64]) -> usize {
        0
    }

    fn state_cap(&self) -> Option<usize> {
        None
    }

    /// Log equilibrium probability entering the observed likelihood, if the model has one.
    fn log_equilibrium(&self, _k: usize, _theta: &[f64], _z: &[f64]) -> Option<f64> {
        None
    }

    fn is_feasible(&self, theta: &[f64]) -> bool;

    fn in_support(&self, k: usize, z: &[f64]) -> bool {
        k >= self.state_floor(z) && self.state_cap().map_or(true, |cap| k <= cap)
    }
}

/// One discretely observed endpoint pair `X(0) = a`, `X(t) = b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub a: usize,
    pub b: usize,
    pub t: f64,
    #[serde(default)]
    pub z: Vec<f64>,
}

impl Observation {
    pub fn new(a: usize, b: usize, t: f64) -> Self {
        Self {
            a,
            b,
            t,
            z: Vec::new(),
        }
    }

    pub fn with_covariates(a: usize, b: usize, t: f64, z: Vec<f64>) -> Self {
        Self { a, b, t, z }
    }

    /// Checks time positivity, support membership and covariate length.
    pub fn validate(&self, model: &dyn RateModel) -> Result<()> {
        if !(self.t >= 0.0) || !self.t.is_finite() {
            return Err(BdpError::InvalidArgument(format!(
                "observation time must be finite and nonnegative, got {}",
                self.t
            )));
        }
        if self.z.len() != model.covariate_dim() {
            return Err(BdpError::InvalidArgument(format!(
                "model `{}` expects {} covariates, observation has {}",
                model.name(),
                model.covariate_dim(),
                self.z.len()
            )));
        }
        for k in [self.a, self.b] {
            if !model.in_support(k, &self.z) {
                return Err(out_of_support(model, k, &self.z));
            }
        }
        Ok(())
    }
}

pub(crate) fn out_of_support(model: &dyn RateModel, k: usize, z: &[f64]) -> BdpError {
    BdpError::OutOfSupport {
        state: k,
        floor: model.state_floor(z),
        cap: model
            .state_cap()
            .map_or_else(|| "inf".to_string(), |c| c.to_string()),
    }
}

/// `(lambda_k, mu_k)` at a supported state.
pub fn rates(model: &dyn RateModel, theta: &[f64], z: &[f64], k: usize) -> Result<(f64, f64)> {
    if !model.in_support(k, z) {
        return Err(out_of_support(model, k, z));
    }
    Ok((model.birth_rate(k, theta, z), model.death_rate(k, theta, z)))
}

/// Rates with zeros outside the support, so no probability leaks past the boundaries.
pub(crate) fn rates_or_zero(
    model: &dyn RateModel,
    theta: &[f64],
    z: &[f64],
    k: usize,
) -> (f64, f64) {
    if model.in_support(k, z) {
        (model.birth_rate(k, theta, z), model.death_rate(k, theta, z))
    } else {
        (0.0, 0.0)
    }
}

/// Checks parameter length and feasibility.
pub fn check_params(model: &dyn RateModel, theta: &[f64]) -> Result<()> {
    if theta.len() != model.param_dim() {
        return Err(BdpError::InvalidArgument(format!(
            "model `{}` takes {} parameters, got {}",
            model.name(),
            model.param_dim(),
            theta.len()
        )));
    }
    if theta.iter().any(|x| !x.is_finite()) || !model.is_feasible(theta) {
        return Err(BdpError::Infeasible(theta.to_vec()));
    }
    Ok(())
}
