use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::estep::{ExpectationKind, ExpectationSet};
use crate::models::{
    check_lengths, guarded_newton, ratio, weighted_total, xlogy, EmModel, MStepContext,
    SurrogateGradient, Totals,
};
use crate::process::{Observation, RateModel};

const HALVING_CAP: usize = 10;

/// Cooperative births with decaying fecundity: `λ_k = λ k² e^{-βk}`, `μ_k = kμ`;
/// parameters `(λ, β, μ)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LogisticModel;

/// `Σ_i Σ_k k^n e^{-βk} E(T_k|Y_i)`.
fn decay_moment(exps: &[ExpectationSet], beta: f64, n: i32) -> f64 {
    weighted_total(exps, ExpectationKind::T, |k| {
        let kf = k as f64;
        kf.powi(n) * (-beta * kf).exp()
    })
}

impl RateModel for LogisticModel {
    fn name(&self) -> &str {
        "logistic"
    }

    fn param_names(&self) -> Vec<String> {
        vec!["lambda".into(), "beta".into(), "mu".into()]
    }

    fn birth_rate(&self, k: usize, theta: &[f64], _z: &[f64]) -> f64 {
        let kf = k as f64;
        theta[0] * kf * kf * (-theta[1] * kf).exp()
    }

    fn death_rate(&self, k: usize, theta: &[f64], _z: &[f64]) -> f64 {
        k as f64 * theta[2]
    }

    fn is_feasible(&self, theta: &[f64]) -> bool {
        theta.len() == 3 && theta.iter().all(|x| *x >= 0.0)
    }
}

impl EmModel for LogisticModel {
    /// Closed-form `μ` and one guarded Newton step in `(λ, β)`.
    fn mstep(
        &self,
        data: &[Observation],
        exps: &[ExpectationSet],
        prev: &[f64],
        ctx: &MStepContext,
    ) -> Result<Vec<f64>> {
        check_lengths(data, exps)?;
        let totals = Totals::of(exps);
        let mu = ratio(totals.down, totals.particle_time, "particle time")?;
        let start = [prev[0], prev[1], mu];
        let full = self.surrogate_gradient(data, exps, &start, ctx);
        let gradient = full.gradient.rows(0, 2).into_owned();
        let hessian = full.hessian.view((0, 0), (2, 2)).into_owned();
        let outcome = guarded_newton(
            &start[..2],
            &gradient,
            &hessian,
            |p| self.surrogate(data, exps, &[p[0], p[1], mu], ctx),
            HALVING_CAP,
        );
        Ok(vec![outcome.theta[0], outcome.theta[1], mu])
    }

    fn surrogate(
        &self,
        _data: &[Observation],
        exps: &[ExpectationSet],
        theta: &[f64],
        _ctx: &MStepContext,
    ) -> f64 {
        if !self.is_feasible(theta) {
            return f64::NEG_INFINITY;
        }
        let (lambda, beta, mu) = (theta[0], theta[1], theta[2]);
        let t = Totals::of(exps);
        let k_up = weighted_total(exps, ExpectationKind::U, |k| k as f64);
        xlogy(t.up, lambda) - beta * k_up + xlogy(t.down, mu)
            - lambda * decay_moment(exps, beta, 2)
            - mu * t.particle_time
    }

    fn surrogate_gradient(
        &self,
        _data: &[Observation],
        exps: &[ExpectationSet],
        theta: &[f64],
        _ctx: &MStepContext,
    ) -> SurrogateGradient {
        let (lambda, beta, mu) = (theta[0], theta[1], theta[2]);
        let t = Totals::of(exps);
        let k_up = weighted_total(exps, ExpectationKind::U, |k| k as f64);
        let (s2, s3, s4) = (
            decay_moment(exps, beta, 2),
            decay_moment(exps, beta, 3),
            decay_moment(exps, beta, 4),
        );
        SurrogateGradient {
            gradient: DVector::from_vec(vec![
                t.up / lambda - s2,
                -k_up + lambda * s3,
                t.down / mu - t.particle_time,
            ]),
            hessian: DMatrix::from_row_slice(
                3,
                3,
                &[
                    -t.up / (lambda * lambda),
                    s3,
                    0.0,
                    s3,
                    -lambda * s4,
                    0.0,
                    0.0,
                    0.0,
                    -t.down / (mu * mu),
                ],
            ),
            at: theta.to_vec(),
        }
    }
}
