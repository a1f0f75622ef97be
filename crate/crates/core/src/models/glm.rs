use nalgebra::{DMatrix, DVector};

use crate::error::{BdpError, Result};
use crate::estep::ExpectationSet;
use crate::models::{
    check_lengths, guarded_newton, EmModel, MStepContext, NewtonStep, SurrogateGradient,
};
use crate::process::{Observation, RateModel};

const HALVING_CAP: usize = 10;
const MAX_NEWTON: usize = 50;
const MAX_SWEEPS: usize = 200;
const CONDITION_LIMIT: f64 = 1e12;
const STEP_TOL: f64 = 1e-12;

/// Linear birth-death process with log-linear covariate effects:
/// `λ_{ik} = k exp(z_iᵀθ_λ)`, `μ_{ik} = k exp(z_iᵀθ_μ)`; parameters `(θ_λ, θ_μ)`.
#[derive(Debug, Clone, Copy)]
pub struct GlmModel {
    covariates: usize,
}

impl GlmModel {
    pub fn new(covariates: usize) -> Result<Self> {
        if covariates == 0 {
            return Err(BdpError::InvalidArgument(
                "GLM needs at least one covariate".into(),
            ));
        }
        Ok(Self { covariates })
    }

    fn eta(z: &[f64], coef: &[f64]) -> f64 {
        z.iter().zip(coef).map(|(a, b)| a * b).sum()
    }

    /// Objective, gradient and Hessian of one half of the separable surrogate:
    /// `Σ_i n_i z_iᵀc - exp(z_iᵀc) P_i` with `n_i` the event count and `P_i` particle time.
    fn half(
        &self,
        data: &[Observation],
        counts: &[f64],
        exposure: &[f64],
        coef: &[f64],
    ) -> (f64, DVector<f64>, DMatrix<f64>) {
        let d = self.covariates;
        let mut value = 0.0;
        let mut grad = DVector::zeros(d);
        let mut hess = DMatrix::zeros(d, d);
        for ((obs, n), p) in data.iter().zip(counts).zip(exposure) {
            let eta = Self::eta(&obs.z, coef);
            let mean = eta.exp() * p;
            value += n * eta - mean;
            let z = DVector::from_column_slice(&obs.z);
            grad += &z * (n - mean);
            hess -= &z * z.transpose() * mean;
        }
        (value, grad, hess)
    }

    fn maximize_half(
        &self,
        data: &[Observation],
        counts: &[f64],
        exposure: &[f64],
        start: &[f64],
    ) -> Vec<f64> {
        let objective = |c: &[f64]| {
            if c.iter().all(|x| x.is_finite()) {
                self.half(data, counts, exposure, c).0
            } else {
                f64::NEG_INFINITY
            }
        };
        let mut coef = start.to_vec();
        for _ in 0..MAX_NEWTON {
            let (_, grad, hess) = self.half(data, counts, exposure, &coef);
            if ill_conditioned(&hess) {
                return self.coordinate_ascent(data, counts, exposure, coef);
            }
            let out = guarded_newton(&coef, &grad, &hess, objective, HALVING_CAP);
            let moved = out
                .theta
                .iter()
                .zip(&coef)
                .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
                .fold(0.0, f64::max);
            coef = out.theta;
            if matches!(out.step, NewtonStep::Stalled) || moved < STEP_TOL {
                break;
            }
        }
        coef
    }

    /// Cyclic one-dimensional Newton steps with an ascent check per coordinate.
    fn coordinate_ascent(
        &self,
        data: &[Observation],
        counts: &[f64],
        exposure: &[f64],
        mut coef: Vec<f64>,
    ) -> Vec<f64> {
        let mut current = self.half(data, counts, exposure, &coef).0;
        for _ in 0..MAX_SWEEPS {
            let mut largest = 0.0f64;
            for j in 0..self.covariates {
                let (_, grad, hess) = self.half(data, counts, exposure, &coef);
                if !(hess[(j, j)] < 0.0) {
                    continue;
                }
                let mut step = -grad[j] / hess[(j, j)];
                for _ in 0..=HALVING_CAP {
                    let mut trial = coef.clone();
                    trial[j] += step;
                    let value = self.half(data, counts, exposure, &trial).0;
                    if value >= current {
                        largest = largest.max(step.abs() / coef[j].abs().max(1.0));
                        coef = trial;
                        current = value;
                        break;
                    }
                    step *= 0.5;
                }
            }
            if largest < STEP_TOL {
                break;
            }
        }
        coef
    }
}

fn ill_conditioned(h: &DMatrix<f64>) -> bool {
    let eig = h.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), e| {
        (lo.min(e.abs()), hi.max(e.abs()))
    });
    !(lo > 0.0) || hi / lo > CONDITION_LIMIT
}

impl Default for GlmModel {
    fn default() -> Self {
        Self { covariates: 2 }
    }
}

impl RateModel for GlmModel {
    fn name(&self) -> &str {
        "glm"
    }

    fn param_names(&self) -> Vec<String> {
        (1..=self.covariates)
            .map(|j| format!("theta_lambda_{j}"))
            .chain((1..=self.covariates).map(|j| format!("theta_mu_{j}")))
            .collect()
    }

    fn covariate_dim(&self) -> usize {
        self.covariates
    }

    fn birth_rate(&self, k: usize, theta: &[f64], z: &[f64]) -> f64 {
        k as f64 * Self::eta(z, &theta[..self.covariates]).exp()
    }

    fn death_rate(&self, k: usize, theta: &[f64], z: &[f64]) -> f64 {
        k as f64 * Self::eta(z, &theta[self.covariates..]).exp()
    }

    fn is_feasible(&self, theta: &[f64]) -> bool {
        theta.len() == 2 * self.covariates && theta.iter().all(|x| x.is_finite())
    }
}

impl EmModel for GlmModel {
    /// Newton iterations to convergence on each of the two separable halves.
    fn mstep(
        &self,
        data: &[Observation],
        exps: &[ExpectationSet],
        prev: &[f64],
        _ctx: &MStepContext,
    ) -> Result<Vec<f64>> {
        check_lengths(data, exps)?;
        let d = self.covariates;
        let ups: Vec<f64> = exps.iter().map(|e| e.total_up).collect();
        let downs: Vec<f64> = exps.iter().map(|e| e.total_down).collect();
        let exposure: Vec<f64> = exps.iter().map(|e| e.particle_time).collect();
        if !(exposure.iter().sum::<f64>() > 0.0) {
            return Err(BdpError::DegenerateDenominator {
                what: "particle time",
            });
        }
        let mut next = self.maximize_half(data, &ups, &exposure, &prev[..d]);
        next.extend(self.maximize_half(data, &downs, &exposure, &prev[d..]));
        Ok(next)
    }

    fn surrogate(
        &self,
        data: &[Observation],
        exps: &[ExpectationSet],
        theta: &[f64],
        _ctx: &MStepContext,
    ) -> f64 {
        if !self.is_feasible(theta) {
            return f64::NEG_INFINITY;
        }
        let d = self.covariates;
        let ups: Vec<f64> = exps.iter().map(|e| e.total_up).collect();
        let downs: Vec<f64> = exps.iter().map(|e| e.total_down).collect();
        let exposure: Vec<f64> = exps.iter().map(|e| e.particle_time).collect();
        self.half(data, &ups, &exposure, &theta[..d]).0
            + self.half(data, &downs, &exposure, &theta[d..]).0
    }

    fn surrogate_gradient(
        &self,
        data: &[Observation],
        exps: &[ExpectationSet],
        theta: &[f64],
        _ctx: &MStepContext,
    ) -> SurrogateGradient {
        let d = self.covariates;
        let ups: Vec<f64> = exps.iter().map(|e| e.total_up).collect();
        let downs: Vec<f64> = exps.iter().map(|e| e.total_down).collect();
        let exposure: Vec<f64> = exps.iter().map(|e| e.particle_time).collect();
        let (_, g_l, h_l) = self.half(data, &ups, &exposure, &theta[..d]);
        let (_, g_m, h_m) = self.half(data, &downs, &exposure, &theta[d..]);
        let mut gradient = DVector::zeros(2 * d);
        gradient.rows_mut(0, d).copy_from(&g_l);
        gradient.rows_mut(d, d).copy_from(&g_m);
        let mut hessian = DMatrix::zeros(2 * d, 2 * d);
        hessian.view_mut((0, 0), (d, d)).copy_from(&h_l);
        hessian.view_mut((d, d), (d, d)).copy_from(&h_m);
        SurrogateGradient {
            gradient,
            hessian,
            at: theta.to_vec(),
        }
    }
}
