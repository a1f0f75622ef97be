use rayon::prelude::*;

use crate::config::NumericConfig;
use crate::error::{BdpError, Result};
use crate::estep::DENOM_REL_TOL;
use crate::laplace::invert_laplace_batch_relative;
use crate::process::model::{check_params, out_of_support, RateModel};
use crate::process::transform::transform;
use crate::process::Observation;

/// Inversion noise below this magnitude is clamped to zero.
pub const NEGATIVE_CLAMP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionProbability {
    pub value: f64,
    pub error_estimate: f64,
    /// Internal error estimate exceeded the inversion target.
    pub accuracy_warning: bool,
    /// A small negative inversion result was replaced by zero.
    pub clamped: bool,
}

impl TransitionProbability {
    fn exact(value: f64) -> Self {
        Self {
            value,
            error_estimate: 0.0,
            accuracy_warning: false,
            clamped: false,
        }
    }
}

/// `P_{a,b}(t)`.
pub fn transition_probability(
    model: &dyn RateModel,
    theta: &[f64],
    z: &[f64],
    a: usize,
    b: usize,
    t: f64,
    cfg: &NumericConfig,
) -> Result<f64> {
    transition_probability_detailed(model, theta, z, a, b, t, cfg).map(|p| p.value)
}

/// `P_{a,b}(t)` with inversion diagnostics.
pub fn transition_probability_detailed(
    model: &dyn RateModel,
    theta: &[f64],
    z: &[f64],
    a: usize,
    b: usize,
    t: f64,
    cfg: &NumericConfig,
) -> Result<TransitionProbability> {
    for k in [a, b] {
        if !model.in_support(k, z) {
            return Err(out_of_support(model, k, z));
        }
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(BdpError::InvalidArgument(format!(
            "time must be finite and nonnegative, got {t}"
        )));
    }
    let delta = if a == b { 1.0 } else { 0.0 };
    if t == 0.0 {
        return Ok(TransitionProbability::exact(delta));
    }
    if model.birth_rate(a, theta, z) == 0.0 && model.death_rate(a, theta, z) == 0.0 {
        return Ok(TransitionProbability::exact(delta));
    }
    let handle = transform(model, theta, z, a, b, cfg)?;
    let inv = invert_laplace_batch_relative(
        |s, out| {
            out[0] = handle.eval(s)?;
            Ok(())
        },
        |s| handle.eval(s),
        1,
        t,
        &cfg.inversion,
        DENOM_REL_TOL,
    )?[0];
    let (value, clamped) = clamp_negative(inv.value, NEGATIVE_CLAMP)?;
    Ok(TransitionProbability {
        value,
        error_estimate: inv.error_estimate,
        accuracy_warning: inv.accuracy_warning(&cfg.inversion),
        clamped,
    })
}

/// Replaces values in `(-tolerance, 0)` by zero; more negative values are errors.
pub fn clamp_negative(value: f64, tolerance: f64) -> Result<(f64, bool)> {
    if value >= 0.0 {
        Ok((value, false))
    } else if value > -tolerance {
        Ok((0.0, true))
    } else {
        Err(BdpError::NegativeValue { value })
    }
}

/// Log-probability of one observation, including the equilibrium term when the model has one.
pub fn observation_loglik(
    model: &dyn RateModel,
    theta: &[f64],
    obs: &Observation,
    cfg: &NumericConfig,
) -> Result<f64> {
    obs.validate(model)?;
    let p = transition_probability(model, theta, &obs.z, obs.a, obs.b, obs.t, cfg)?;
    if !(p > 0.0) {
        return Err(BdpError::DomainError {
            a: obs.a,
            b: obs.b,
            t: obs.t,
            p,
        });
    }
    let prefactor = model.log_equilibrium(obs.a, theta, &obs.z).unwrap_or(0.0);
    Ok(p.ln() + prefactor)
}

/// Observed-data log-likelihood `Σ log P_{a_i,b_i}(t_i)` (plus equilibrium terms).
///
/// Observations are evaluated on the current rayon pool; the sum is taken in data order.
pub fn observed_loglik(
    model: &dyn RateModel,
    theta: &[f64],
    data: &[Observation],
    cfg: &NumericConfig,
) -> Result<f64> {
    check_params(model, theta)?;
    cfg.validate()?;
    let terms = data
        .par_iter()
        .map(|obs| observation_loglik(model, theta, obs, cfg))
        .collect::<Result<Vec<f64>>>()?;
    Ok(terms.iter().sum())
}
