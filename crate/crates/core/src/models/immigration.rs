use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::estep::{ExpectationKind, ExpectationSet};
use crate::models::{
    check_lengths, ratio, weighted_total, xlogy, EmModel, MStepContext, SurrogateGradient, Totals,
};
use crate::process::{Observation, RateModel};

/// Linear birth-death process with immigration: `λ_k = kλ + ν`, `μ_k = kμ`;
/// parameters `(λ, ν, μ)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ImmigrationModel;

/// Share `kλ / (kλ + ν)` of births at state `k` attributed to the linear term.
pub fn immigration_weight(k: usize, lambda: f64, nu: f64) -> f64 {
    let linear = k as f64 * lambda;
    let total = linear + nu;
    if total > 0.0 {
        linear / total
    } else {
        0.0
    }
}

impl RateModel for ImmigrationModel {
    fn name(&self) -> &str {
        "immigration"
    }

    fn param_names(&self) -> Vec<String> {
        vec!["lambda".into(), "nu".into(), "mu".into()]
    }

    fn birth_rate(&self, k: usize, theta: &[f64], _z: &[f64]) -> f64 {
        k as f64 * theta[0] + theta[1]
    }

    fn death_rate(&self, k: usize, theta: &[f64], _z: &[f64]) -> f64 {
        k as f64 * theta[2]
    }

    fn is_feasible(&self, theta: &[f64]) -> bool {
        theta.len() == 3 && theta.iter().all(|x| *x >= 0.0)
    }
}

impl EmModel for ImmigrationModel {
    /// Minorize-maximize update splitting each birth between the linear and immigration terms.
    fn mstep(
        &self,
        data: &[Observation],
        exps: &[ExpectationSet],
        prev: &[f64],
        _ctx: &MStepContext,
    ) -> Result<Vec<f64>> {
        check_lengths(data, exps)?;
        let (lambda, nu) = (prev[0], prev[1]);
        let totals = Totals::of(exps);
        let linear_births = weighted_total(exps, ExpectationKind::U, |k| {
            immigration_weight(k, lambda, nu)
        });
        let immigrant_births = weighted_total(exps, ExpectationKind::U, |k| {
            1.0 - immigration_weight(k, lambda, nu)
        });
        Ok(vec![
            ratio(linear_births, totals.particle_time, "particle time")?,
            ratio(immigrant_births, totals.time, "total time")?,
            ratio(totals.down, totals.particle_time, "particle time")?,
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
        let births: f64 = exps
            .iter()
            .map(|e| {
                e.states()
                    .zip(&e.eu)
                    .map(|(k, u)| xlogy(*u, self.birth_rate(k, theta, &[])))
                    .sum::<f64>()
            })
            .sum();
        births + xlogy(t.down, theta[2])
            - (theta[0] + theta[2]) * t.particle_time
            - theta[1] * t.time
    }

    fn surrogate_gradient(
        &self,
        _data: &[Observation],
        exps: &[ExpectationSet],
        theta: &[f64],
        _ctx: &MStepContext,
    ) -> SurrogateGradient {
        let t = Totals::of(exps);
        let (lambda, nu, mu) = (theta[0], theta[1], theta[2]);
        let (mut g_l, mut g_n, mut h_ll, mut h_ln, mut h_nn) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for e in exps {
            for (k, u) in e.states().zip(&e.eu) {
                let kf = k as f64;
                let rate = kf * lambda + nu;
                if *u == 0.0 {
                    continue;
                }
                g_l += u * kf / rate;
                g_n += u / rate;
                let r2 = rate * rate;
                h_ll -= u * kf * kf / r2;
                h_ln -= u * kf / r2;
                h_nn -= u / r2;
            }
        }
        SurrogateGradient {
            gradient: DVector::from_vec(vec![
                g_l - t.particle_time,
                g_n - t.time,
                t.down / mu - t.particle_time,
            ]),
            hessian: DMatrix::from_row_slice(
                3,
                3,
                &[
                    h_ll,
                    h_ln,
                    0.0,
                    h_ln,
                    h_nn,
                    0.0,
                    0.0,
                    0.0,
                    -t.down / (mu * mu),
                ],
            ),
            at: theta.to_vec(),
        }
    }

    fn update_hessian(
        &self,
        _data: &[Observation],
        exps: &[ExpectationSet],
        theta: &[f64],
        prev: &[f64],
        _ctx: &MStepContext,
    ) -> DMatrix<f64> {
        let t = Totals::of(exps);
        let (lp, np) = (prev[0], prev[1]);
        let linear = weighted_total(exps, ExpectationKind::U, |k| immigration_weight(k, lp, np));
        let immigrant = weighted_total(exps, ExpectationKind::U, |k| {
            1.0 - immigration_weight(k, lp, np)
        });
        DMatrix::from_diagonal(&DVector::from_vec(vec![
            -linear / (theta[0] * theta[0]),
            -immigrant / (theta[1] * theta[1]),
            -t.down / (theta[2] * theta[2]),
        ]))
    }
}
