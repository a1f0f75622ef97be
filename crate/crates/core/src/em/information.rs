use nalgebra::DMatrix;

use crate::config::NumericConfig;
use crate::em::{estep_all, inf_norm, EMConfig};
use crate::error::{BdpError, Result};
use crate::models::{EmModel, MStepContext};
use crate::process::{check_params, observed_loglik, Observation};

/// Relative forward-difference step for differentiating the EM map.
const SEM_STEP: f64 = 1e-4;
/// Relative central-difference step for the log-likelihood Hessian.
const HESSIAN_STEP: f64 = 1e-3;
const HESSIAN_STEP_FLOOR: f64 = 1.0;

/// Supplemented-EM observed information `−d²Q(θ̂|θ̂)(I − dM(θ̂))`.
///
/// `dM` is estimated by forward differences of the EM map with steps `max(|θ̂_j|, 1)·1e-4`,
/// taken relative to `M(θ̂)` so the residual fixed-point error cancels. The result is
/// symmetrized.
pub fn sem_information(
    model: &dyn EmModel,
    data: &[Observation],
    theta_hat: &[f64],
    cfg: &EMConfig,
) -> Result<DMatrix<f64>> {
    check_params(model, theta_hat)?;
    let ctx = MStepContext::settled();
    let p = theta_hat.len();
    let exps = estep_all(model, theta_hat, data, &cfg.numeric)?;
    let base = model.mstep(data, &exps, theta_hat, &ctx)?;
    let drift = inf_norm(
        &base
            .iter()
            .zip(theta_hat)
            .map(|(m, t)| m - t)
            .collect::<Vec<_>>(),
    );
    if drift > SEM_STEP * inf_norm(theta_hat).max(1.0) {
        return Err(BdpError::NotAtFixedPoint(drift));
    }

    let mut dm = DMatrix::zeros(p, p);
    for j in 0..p {
        let mut h = SEM_STEP * theta_hat[j].abs().max(1.0);
        let mut shifted = theta_hat.to_vec();
        shifted[j] += h;
        if !model.is_feasible(&shifted) {
            h = -h;
            shifted[j] = theta_hat[j] + h;
        }
        let exps_j = estep_all(model, &shifted, data, &cfg.numeric)?;
        let mapped = model.mstep(data, &exps_j, &shifted, &ctx)?;
        for i in 0..p {
            dm[(i, j)] = (mapped[i] - base[i]) / h;
        }
    }
    let hess = model.update_hessian(data, &exps, theta_hat, theta_hat, &ctx);
    let info = -hess * (DMatrix::identity(p, p) - dm);
    if info.iter().any(|v| !v.is_finite()) {
        return Err(BdpError::SingularHessian);
    }
    Ok(symmetrize(info))
}

/// Central-difference Hessian of the observed log-likelihood.
pub fn numerical_hessian_loglik(
    model: &dyn EmModel,
    data: &[Observation],
    theta_hat: &[f64],
    cfg: &NumericConfig,
) -> Result<DMatrix<f64>> {
    check_params(model, theta_hat)?;
    numerical_hessian(
        |theta| observed_loglik(model, theta, data, cfg),
        |theta| model.is_feasible(theta),
        theta_hat,
    )
}

/// Central-difference Hessian of `f` at `x`, symmetrized.
///
/// Steps start at `1e-3·max(|x_j|, 1)` and are halved until every evaluation point is
/// feasible.
pub fn numerical_hessian(
    f: impl Fn(&[f64]) -> Result<f64>,
    feasible: impl Fn(&[f64]) -> bool,
    x: &[f64],
) -> Result<DMatrix<f64>> {
    let p = x.len();
    let mut steps: Vec<f64> = x
        .iter()
        .map(|v| HESSIAN_STEP * v.abs().max(HESSIAN_STEP_FLOOR))
        .collect();
    let at = |offsets: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(j, d) in offsets {
            y[j] += d;
        }
        y
    };
    for j in 0..p {
        let mut tries = 0;
        while !(feasible(&at(&[(j, steps[j])])) && feasible(&at(&[(j, -steps[j])]))) {
            steps[j] *= 0.5;
            tries += 1;
            if tries > 40 {
                return Err(BdpError::InvalidArgument(format!(
                    "no feasible central-difference step for parameter {j}"
                )));
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            let mut tries = 0;
            while ![(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
                .iter()
                .all(|(si, sj)| feasible(&at(&[(i, si * steps[i]), (j, sj * steps[j])])))
            {
                steps[i] *= 0.5;
                steps[j] *= 0.5;
                tries += 1;
                if tries > 40 {
                    return Err(BdpError::InvalidArgument(format!(
                        "no feasible central-difference step for parameters {i}, {j}"
                    )));
                }
            }
        }
    }

    let f0 = f(x)?;
    let mut hess = DMatrix::zeros(p, p);
    for i in 0..p {
        let h = steps[i];
        let plus = f(&at(&[(i, h)]))?;
        let minus = f(&at(&[(i, -h)]))?;
        hess[(i, i)] = (plus - 2.0 * f0 + minus) / (h * h);
        for j in 0..i {
            let k = steps[j];
            let pp = f(&at(&[(i, h), (j, k)]))?;
            let pm = f(&at(&[(i, h), (j, -k)]))?;
            let mp = f(&at(&[(i, -h), (j, k)]))?;
            let mm = f(&at(&[(i, -h), (j, -k)]))?;
            let v = (pp - pm - mp + mm) / (4.0 * h * k);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(symmetrize(hess))
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Standard errors `sqrt(diag(I⁻¹))`, or `None` when the information is not positive definite.
pub fn standard_errors_from(information: &DMatrix<f64>) -> Option<Vec<f64>> {
    let chol = information.clone().cholesky()?;
    let inv = chol.inverse();
    let se: Vec<f64> = inv.diagonal().iter().map(|v| v.sqrt()).collect();
    se.iter().all(|v| v.is_finite()).then_some(se)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_hessian_is_exact() {
        let a = [[-3.0, 1.0, 0.5], [1.0, -2.0, 0.25], [0.5, 0.25, -1.0]];
        let f = |x: &[f64]| -> Result<f64> {
            let mut v = 7.0 + x[0] - 2.0 * x[2];
            for i in 0..3 {
                for j in 0..3 {
                    v += 0.5 * a[i][j] * x[i] * x[j];
                }
            }
            Ok(v)
        };
        let h = numerical_hessian(f, |_| true, &[0.3, -1.2, 2.0]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((h[(i, j)] - a[i][j]).abs() < 1e-6, "{i} {j} {}", h[(i, j)]);
            }
        }
        assert_eq!(h.clone() - h.transpose(), DMatrix::zeros(3, 3));
    }

    #[test]
    fn steps_shrink_to_stay_feasible() {
        let f = |x: &[f64]| {
            assert!(x[0] > 0.0, "evaluated at infeasible {}", x[0]);
            Ok(x[0] * x[0])
        };
        let h = numerical_hessian(f, |x| x[0] > 0.0, &[1e-5]).unwrap();
        assert!((h[(0, 0)] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn standard_errors_need_positive_definite() {
        let info = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 25.0]);
        let se = standard_errors_from(&info).unwrap();
        assert!((se[0] - 0.5).abs() < 1e-15 && (se[1] - 0.2).abs() < 1e-15);
        assert!(
            standard_errors_from(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_none()
        );
    }
}
