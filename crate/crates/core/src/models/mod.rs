//! Concrete rate models and their M-steps.

mod glm;
mod immigration;
mod logistic;
mod microsat;
mod newton;
mod registry;
mod simple;
mod sis;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{BdpError, Result};
use crate::estep::ExpectationSet;
use crate::process::{Observation, RateModel};

pub use glm::GlmModel;
pub use immigration::{immigration_weight, ImmigrationModel};
pub use logistic::LogisticModel;
pub use microsat::{motif_covariates, MicrosatConfig, MicrosatModel};
pub use newton::{guarded_newton, NewtonOutcome, NewtonStep};
pub use registry::{build_model, model_names, ModelOptions, ModelSpec};
pub use simple::SimpleModel;
pub use sis::SisModel;

/// Per-call context for M-steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MStepContext {
    /// Zero-based EM iteration; drives schedules such as barrier decay.
    pub iteration: usize,
}

impl MStepContext {
    pub fn at(iteration: usize) -> Self {
        Self { iteration }
    }

    /// A context past every schedule, used when differentiating the EM map at convergence.
    pub fn settled() -> Self {
        Self {
            iteration: usize::MAX,
        }
    }
}

/// Gradient and Hessian of a surrogate at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateGradient {
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
    pub at: Vec<f64>,
}

/// A rate model with EM machinery.
pub trait EmModel: RateModel {
    /// One M-step given expectations computed at `prev`.
    fn mstep(
        &self,
        data: &[Observation],
        exps: &[ExpectationSet],
        prev: &[f64],
        ctx: &MStepContext,
    ) -> Result<Vec<f64>>;

    /// Expected complete-data log-likelihood `Q(θ | ·)` up to θ-free constants, including any
    /// penalty the M-step maximizes. `-inf` outside the feasible region.
    fn surrogate(
        &self,
        data: &[Observation],
        exps: &[ExpectationSet],
        theta: &[f64],
        ctx: &MStepContext,
    ) -> f64;

    /// Analytic gradient and Hessian of [`surrogate`](EmModel::surrogate).
    fn surrogate_gradient(
        &self,
        data: &[Observation],
        exps: &[ExpectationSet],
        theta: &[f64],
        ctx: &MStepContext,
    ) -> SurrogateGradient;

    /// Penalty the M-step adds to the log-likelihood at this iteration; EM ascends
    /// `loglik + penalty`.
    fn penalty(&self, theta: &[f64], ctx: &MStepContext) -> f64 {
        let _ = (theta, ctx);
        0.0
    }

    /// Hessian of the function the M-step maximizes when expectations come from `prev`.
    ///
    /// Equals the surrogate Hessian except for minorize-maximize updates, where it is the
    /// Hessian of the minorant.
    fn update_hessian(
        &self,
        data: &[Observation],
        exps: &[ExpectationSet],
        theta: &[f64],
        prev: &[f64],
        ctx: &MStepContext,
    ) -> DMatrix<f64> {
        let _ = prev;
        self.surrogate_gradient(data, exps, theta, ctx).hessian
    }
}

/// Sums of aggregate expectations over observations.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Totals {
    pub up: f64,
    pub down: f64,
    pub particle_time: f64,
    pub time: f64,
}

impl Totals {
    pub fn of(exps: &[ExpectationSet]) -> Self {
        exps.iter().fold(Self::default(), |acc, e| Self {
            up: acc.up + e.total_up,
            down: acc.down + e.total_down,
            particle_time: acc.particle_time + e.particle_time,
            time: acc.time + e.total_time,
        })
    }
}

/// `Σ_i Σ_k w(k) E(·_k|Y_i)`.
pub(crate) fn weighted_total(
    exps: &[ExpectationSet],
    kind: crate::estep::ExpectationKind,
    weight: impl Fn(usize) -> f64 + Copy,
) -> f64 {
    exps.iter().map(|e| e.weighted(kind, weight)).sum()
}

pub(crate) fn ratio(num: f64, den: f64, what: &'static str) -> Result<f64> {
    if !(den > 0.0) || !den.is_finite() {
        return Err(BdpError::DegenerateDenominator { what });
    }
    Ok(num / den)
}

/// `a ln b` with the convention `0 ln 0 = 0`.
pub(crate) fn xlogy(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * b.ln()
    }
}

pub(crate) fn check_lengths(data: &[Observation], exps: &[ExpectationSet]) -> Result<()> {
    if data.len() != exps.len() {
        return Err(BdpError::InvalidArgument(format!(
            "{} observations but {} expectation sets",
            data.len(),
            exps.len()
        )));
    }
    Ok(())
}
