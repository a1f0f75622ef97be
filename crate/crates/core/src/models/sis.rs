use nalgebra::{DMatrix, DVector};

use crate::error::{BdpError, Result};
use crate::estep::{ExpectationKind, ExpectationSet};
use crate::models::{
    check_lengths, ratio, weighted_total, xlogy, EmModel, MStepContext, SurrogateGradient, Totals,
};
use crate::process::{Observation, RateModel};

/// Susceptible-infectious-susceptible epidemic in a population of `N`:
/// `λ_k = βk(N-k)/N`, `μ_k = γk/N`; parameters `(β, γ)`.
#[derive(Debug, Clone, Copy)]
pub struct SisModel {
    population: usize,
}

impl SisModel {
    pub fn new(population: usize) -> Result<Self> {
        if population == 0 {
            return Err(BdpError::InvalidArgument(
                "SIS population must be positive".into(),
            ));
        }
        Ok(Self { population })
    }

    pub fn population(&self) -> usize {
        self.population
    }

    fn contact_weight(&self, k: usize) -> f64 {
        let n = self.population as f64;
        let kf = k as f64;
        kf * (n - kf) / n
    }
}

impl Default for SisModel {
    fn default() -> Self {
        Self { population: 100 }
    }
}

impl RateModel for SisModel {
    fn name(&self) -> &str {
        "sis"
    }

    fn param_names(&self) -> Vec<String> {
        vec!["beta".into(), "gamma".into()]
    }

    fn birth_rate(&self, k: usize, theta: &[f64], _z: &[f64]) -> f64 {
        if k >= self.population {
            0.0
        } else {
            theta[0] * self.contact_weight(k)
        }
    }

    fn death_rate(&self, k: usize, theta: &[f64], _z: &[f64]) -> f64 {
        theta[1] * k as f64 / self.population as f64
    }

    fn state_cap(&self) -> Option<usize> {
        Some(self.population)
    }

    fn is_feasible(&self, theta: &[f64]) -> bool {
        theta.len() == 2 && theta.iter().all(|x| *x >= 0.0)
    }
}

impl EmModel for SisModel {
    fn mstep(
        &self,
        data: &[Observation],
        exps: &[ExpectationSet],
        _prev: &[f64],
        _ctx: &MStepContext,
    ) -> Result<Vec<f64>> {
        check_lengths(data, exps)?;
        let totals = Totals::of(exps);
        let contact = weighted_total(exps, ExpectationKind::T, |k| self.contact_weight(k));
        let n = self.population as f64;
        Ok(vec![
            ratio(totals.up, contact, "infection exposure")?,
            ratio(n * totals.down, totals.particle_time, "particle time")?,
        ])
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
        let t = Totals::of(exps);
        let contact = weighted_total(exps, ExpectationKind::T, |k| self.contact_weight(k));
        xlogy(t.up, theta[0]) + xlogy(t.down, theta[1])
            - theta[0] * contact
            - theta[1] * t.particle_time / self.population as f64
    }

    fn surrogate_gradient(
        &self,
        _data: &[Observation],
        exps: &[ExpectationSet],
        theta: &[f64],
        _ctx: &MStepContext,
    ) -> SurrogateGradient {
        let t = Totals::of(exps);
        let contact = weighted_total(exps, ExpectationKind::T, |k| self.contact_weight(k));
        let (b, g) = (theta[0], theta[1]);
        SurrogateGradient {
            gradient: DVector::from_vec(vec![
                t.up / b - contact,
                t.down / g - t.particle_time / self.population as f64,
            ]),
            hessian: DMatrix::from_diagonal(&DVector::from_vec(vec![
                -t.up / (b * b),
                -t.down / (g * g),
            ])),
            at: theta.to_vec(),
        }
    }
}
