use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::estep::ExpectationSet;
use crate::models::{
    check_lengths, ratio, xlogy, EmModel, MStepContext, SurrogateGradient, Totals,
};
use crate::process::{Observation, RateModel};

/// Linear birth-death process: `λ_k = kλ`, `μ_k = kμ`; parameters `(λ, μ)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimpleModel;

impl RateModel for SimpleModel {
    fn name(&self) -> &str {
        "simple"
    }

    fn param_names(&self) -> Vec<String> {
        vec!["lambda".into(), "mu".into()]
    }

    fn birth_rate(&self, k: usize, theta: &[f64], _z: &[f64]) -> f64 {
        k as f64 * theta[0]
    }

    fn death_rate(&self, k: usize, theta: &[f64], _z: &[f64]) -> f64 {
        k as f64 * theta[1]
    }

    fn is_feasible(&self, theta: &[f64]) -> bool {
        theta.len() == 2 && theta.iter().all(|x| *x >= 0.0)
    }
}

impl SimpleModel {
    /// `(ΣU / ΣT_particle, ΣD / ΣT_particle)`.
    pub fn update(totals: &Totals) -> Result<Vec<f64>> {
        Ok(vec![
            ratio(totals.up, totals.particle_time, "particle time")?,
            ratio(totals.down, totals.particle_time, "particle time")?,
        ])
    }
}

impl EmModel for SimpleModel {
    fn mstep(
        &self,
        data: &[Observation],
        exps: &[ExpectationSet],
        _prev: &[f64],
        _ctx: &MStepContext,
    ) -> Result<Vec<f64>> {
        check_lengths(data, exps)?;
        Self::update(&Totals::of(exps))
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
        xlogy(t.up, theta[0]) + xlogy(t.down, theta[1]) - (theta[0] + theta[1]) * t.particle_time
    }

    fn surrogate_gradient(
        &self,
        _data: &[Observation],
        exps: &[ExpectationSet],
        theta: &[f64],
        _ctx: &MStepContext,
    ) -> SurrogateGradient {
        let t = Totals::of(exps);
        let (l, m) = (theta[0], theta[1]);
        SurrogateGradient {
            gradient: DVector::from_vec(vec![
                t.up / l - t.particle_time,
                t.down / m - t.particle_time,
            ]),
            hessian: DMatrix::from_diagonal(&DVector::from_vec(vec![
                -t.up / (l * l),
                -t.down / (m * m),
            ])),
            at: theta.to_vec(),
        }
    }
}
