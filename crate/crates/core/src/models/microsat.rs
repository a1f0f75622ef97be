use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{BdpError, Result};
use crate::estep::{ExpectationKind, ExpectationSet};
use crate::models::{check_lengths, guarded_newton, EmModel, MStepContext, SurrogateGradient};
use crate::process::{Observation, RateModel};

const HALVING_CAP: usize = 10;

/// Covariates per observation: intercept, motif size 2, motif size >= 3, and the proportions
/// of `A`, `C` and `T` in the motif.
pub const MICROSAT_COVARIATES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MicrosatConfig {
    /// Smallest repeat count for motif sizes 1, 2 and >= 3.
    pub x_min: [usize; 3],
    /// Barrier weight at the first EM iteration.
    pub barrier_weight: f64,
    /// Per-iteration multiplier of the barrier weight.
    pub barrier_decay: f64,
    /// Weights below this are replaced by zero.
    pub barrier_floor: f64,
}

impl Default for MicrosatConfig {
    fn default() -> Self {
        Self {
            x_min: [9, 5, 5],
            barrier_weight: 1.0,
            barrier_decay: 0.5,
            barrier_floor: 1e-8,
        }
    }
}

impl MicrosatConfig {
    /// Same floor for every motif class.
    pub fn uniform(x_min: usize) -> Self {
        Self {
            x_min: [x_min; 3],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.barrier_weight >= 0.0) || !(self.barrier_floor >= 0.0) {
            return Err(BdpError::InvalidArgument(
                "barrier weights must be nonnegative".into(),
            ));
        }
        if !(self.barrier_decay > 0.0 && self.barrier_decay < 1.0) {
            return Err(BdpError::InvalidArgument(
                "barrier_decay must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }

    /// Barrier weight `γ_m` at EM iteration `m`.
    pub fn barrier_at(&self, iteration: usize) -> f64 {
        let exponent = iteration.min(i32::MAX as usize) as i32;
        let g = self.barrier_weight * self.barrier_decay.powi(exponent);
        if g < self.barrier_floor {
            0.0
        } else {
            g
        }
    }
}

/// Covariate vector for a repeat motif such as `"AAC"`.
pub fn motif_covariates(motif: &str) -> Result<Vec<f64>> {
    let motif = motif.to_ascii_uppercase();
    if motif.is_empty() || !motif.chars().all(|c| "ACGT".contains(c)) {
        return Err(BdpError::Parse(format!("invalid motif `{motif}`")));
    }
    let size = motif.len();
    let share = |c: char| motif.chars().filter(|x| *x == c).count() as f64 / size as f64;
    Ok(vec![
        1.0,
        (size == 2) as u8 as f64,
        (size >= 3) as u8 as f64,
        share('A'),
        share('C'),
        share('T'),
    ])
}

/// Microsatellite repeat-count evolution with covariate-dependent rates on `k >= x_min`:
/// `λ_k = (k+1) exp(α + zᵀθ)`, `μ_k = k exp(zᵀθ)` for `k > x_min`, `μ_{x_min} = 0`;
/// parameters `(α, θ)` with `α < 0`, and geometric equilibrium `π_k = (1-e^α) e^{α(k-x_min)}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MicrosatModel {
    config: MicrosatConfig,
}

impl MicrosatModel {
    pub fn new(config: MicrosatConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &MicrosatConfig {
        &self.config
    }

    /// Observation for a chimpanzee/human pair `(C, H)` separated from their ancestor by
    /// `t`; reversibility turns it into a single chain over `2t`.
    pub fn pair_observation(c: usize, h: usize, t: f64, z: Vec<f64>) -> Observation {
        Observation::with_covariates(c, h, 2.0 * t, z)
    }

    pub fn x_min_for(&self, z: &[f64]) -> usize {
        let class = if z.get(1).copied().unwrap_or(0.0) != 0.0 {
            1
        } else if z.get(2).copied().unwrap_or(0.0) != 0.0 {
            2
        } else {
            0
        };
        self.config.x_min[class]
    }

    fn eta(z: &[f64], theta: &[f64]) -> f64 {
        z.iter().zip(&theta[1..]).map(|(a, b)| a * b).sum()
    }

    /// Per observation: `(C - x_min, U, D, Σ(k+1)T_k, Σ_{k>x_min} k T_k)`; deaths are
    /// impossible at `x_min`, so its holding time carries no death hazard.
    fn stats(&self, data: &[Observation], exps: &[ExpectationSet]) -> Vec<[f64; 5]> {
        data.iter()
            .zip(exps)
            .map(|(obs, e)| {
                let x_min = self.x_min_for(&obs.z);
                [
                    obs.a as f64 - x_min as f64,
                    e.total_up,
                    e.total_down,
                    e.weighted(ExpectationKind::T, |k| k as f64 + 1.0),
                    e.weighted(
                        ExpectationKind::T,
                        |k| if k > x_min { k as f64 } else { 0.0 },
                    ),
                ]
            })
            .collect()
    }
}

impl RateModel for MicrosatModel {
    fn name(&self) -> &str {
        "microsat"
    }

    fn param_names(&self) -> Vec<String> {
        let mut names = vec!["alpha".to_string()];
        names.extend(["intercept", "motif2", "motif3plus", "p_a", "p_c", "p_t"].map(String::from));
        names
    }

    fn covariate_dim(&self) -> usize {
        MICROSAT_COVARIATES
    }

    fn birth_rate(&self, k: usize, theta: &[f64], z: &[f64]) -> f64 {
        if k < self.x_min_for(z) {
            0.0
        } else {
            (k as f64 + 1.0) * (theta[0] + Self::eta(z, theta)).exp()
        }
    }

    fn death_rate(&self, k: usize, theta: &[f64], z: &[f64]) -> f64 {
        if k <= self.x_min_for(z) {
            0.0
        } else {
            k as f64 * Self::eta(z, theta).exp()
        }
    }

    fn state_floor(&self, z: &[f64]) -> usize {
        self.x_min_for(z)
    }

    fn log_equilibrium(&self, k: usize, theta: &[f64], z: &[f64]) -> Option<f64> {
        let alpha = theta[0];
        let x_min = self.x_min_for(z);
        if k < x_min || !(alpha < 0.0) {
            return Some(f64::NEG_INFINITY);
        }
        Some((-alpha.exp()).ln_1p() + alpha * (k - x_min) as f64)
    }

    fn is_feasible(&self, theta: &[f64]) -> bool {
        theta.len() == 1 + MICROSAT_COVARIATES
            && theta[0] < 0.0
            && theta.iter().all(|x| x.is_finite())
    }
}

impl EmModel for MicrosatModel {
    fn penalty(&self, theta: &[f64], ctx: &MStepContext) -> f64 {
        let gamma = self.config.barrier_at(ctx.iteration);
        if gamma == 0.0 {
            0.0
        } else if theta[0] < 0.0 {
            gamma * (-theta[0]).ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    /// One guarded Newton step on the barrier-penalized surrogate.
    fn mstep(
        &self,
        data: &[Observation],
        exps: &[ExpectationSet],
        prev: &[f64],
        ctx: &MStepContext,
    ) -> Result<Vec<f64>> {
        check_lengths(data, exps)?;
        if !self.is_feasible(prev) {
            return Err(BdpError::Infeasible(prev.to_vec()));
        }
        let sg = self.surrogate_gradient(data, exps, prev, ctx);
        let out = guarded_newton(
            prev,
            &sg.gradient,
            &sg.hessian,
            |p| self.surrogate(data, exps, p, ctx),
            HALVING_CAP,
        );
        Ok(out.theta)
    }

    fn surrogate(
        &self,
        data: &[Observation],
        exps: &[ExpectationSet],
        theta: &[f64],
        ctx: &MStepContext,
    ) -> f64 {
        if !self.is_feasible(theta) {
            return f64::NEG_INFINITY;
        }
        let alpha = theta[0];
        let log_norm = (-alpha.exp()).ln_1p();
        let mut q = 0.0;
        for (obs, [offset, up, down, s1, s0]) in data.iter().zip(self.stats(data, exps)) {
            let eta = Self::eta(&obs.z, theta);
            q += log_norm + offset * alpha + up * (alpha + eta) + down * eta
                - (alpha + eta).exp() * s1
                - eta.exp() * s0;
        }
        let gamma = self.config.barrier_at(ctx.iteration);
        if gamma > 0.0 {
            q += gamma * (-alpha).ln();
        }
        q
    }

    fn surrogate_gradient(
        &self,
        data: &[Observation],
        exps: &[ExpectationSet],
        theta: &[f64],
        ctx: &MStepContext,
    ) -> SurrogateGradient {
        let p = theta.len();
        let alpha = theta[0];
        let ea = alpha.exp();
        let mut gradient = DVector::zeros(p);
        let mut hessian = DMatrix::zeros(p, p);
        for (obs, [offset, up, down, s1, s0]) in data.iter().zip(self.stats(data, exps)) {
            let eta = Self::eta(&obs.z, theta);
            let births = (alpha + eta).exp() * s1;
            let deaths = eta.exp() * s0;
            gradient[0] += -ea / (1.0 - ea) + offset + up - births;
            hessian[(0, 0)] += -ea / (1.0 - ea).powi(2) - births;
            for (j, zj) in obs.z.iter().enumerate() {
                gradient[1 + j] += zj * (up + down - births - deaths);
                hessian[(0, 1 + j)] -= zj * births;
                hessian[(1 + j, 0)] -= zj * births;
                for (l, zl) in obs.z.iter().enumerate() {
                    hessian[(1 + j, 1 + l)] -= zj * zl * (births + deaths);
                }
            }
        }
        let gamma = self.config.barrier_at(ctx.iteration);
        if gamma > 0.0 {
            gradient[0] += gamma / alpha;
            hessian[(0, 0)] -= gamma / (alpha * alpha);
        }
        SurrogateGradient {
            gradient,
            hessian,
            at: theta.to_vec(),
        }
    }
}
