use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::em::{
    accelerate_qn, estep_all, inf_norm, numerical_hessian_loglik, relative_change, sem_information,
    standard_errors_from, EMConfig, SeMethod, SecantHistory,
};
use crate::error::{BdpError, Result};
use crate::estep::ExpectationSet;
use crate::models::{EmModel, MStepContext};
use crate::process::{check_params, observed_loglik, Observation};

/// Tolerated log-likelihood decrease attributed to inversion noise.
pub const ASCENT_SLACK: f64 = 1e-10;
/// A log-likelihood stop also needs the projected parameter gap within this multiple of
/// `param_tol`, so a flat likelihood cannot end the fit far from the EM fixed point.
const FIXED_POINT_FACTOR: f64 = 10.0;
/// Estimates within this multiple of `param_tol` (relative) of infeasibility are flagged.
const BOUNDARY_FACTOR: f64 = 10.0;
/// Largest contraction ratio credited when projecting the distance to convergence.
const MAX_RATIO: f64 = 0.999;

/// Which stopping rule ended the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convergence {
    ParamTol,
    LoglikTol,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MethodNotes {
    pub convergence: Option<Convergence>,
    /// Step halvings applied to plain EM updates that lowered the log-likelihood.
    pub em_halvings: usize,
    pub qn_proposals: usize,
    pub qn_accepted: usize,
    /// Halvings spent on accepted or rejected quasi-Newton proposals.
    pub qn_halvings: usize,
    pub window_widenings: usize,
    pub final_param_change: f64,
    /// Projected relative distance to the EM fixed point at the last check.
    pub final_param_gap: f64,
    pub final_loglik_change: f64,
    pub warnings: Vec<String>,
}

/// An information estimate with its standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardErrors {
    pub method: SeMethod,
    pub information: Vec<Vec<f64>>,
    /// `None` when the information matrix is not positive definite.
    pub std_errors: Option<Vec<f64>>,
}

impl StandardErrors {
    fn from_matrix(method: SeMethod, information: &DMatrix<f64>) -> Self {
        Self {
            method,
            information: information
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            std_errors: standard_errors_from(information),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub param_names: Vec<String>,
    pub theta_hat: Vec<f64>,
    pub loglik: f64,
    /// The first available estimate, SEM preferred.
    pub information: Option<Vec<Vec<f64>>>,
    pub std_errors: Option<Vec<f64>>,
    pub standard_errors: Vec<StandardErrors>,
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub method_notes: MethodNotes,
}

struct State {
    theta: Vec<f64>,
    exps: Vec<ExpectationSet>,
    loglik: f64,
}

fn evaluate(
    model: &dyn EmModel,
    data: &[Observation],
    theta: Vec<f64>,
    cfg: &EMConfig,
) -> Result<State> {
    check_params(model, &theta)?;
    let exps = estep_all(model, &theta, data, &cfg.numeric)?;
    let loglik = observed_loglik(model, &theta, data, &cfg.numeric)?;
    if !loglik.is_finite() {
        return Err(BdpError::DomainError {
            a: data[0].a,
            b: data[0].b,
            t: data[0].t,
            p: loglik,
        });
    }
    Ok(State {
        theta,
        exps,
        loglik,
    })
}

/// `from + (to − from) / 2^k`.
fn toward(from: &[f64], to: &[f64], k: usize) -> Vec<f64> {
    let f = 0.5f64.powi(k as i32);
    from.iter().zip(to).map(|(a, b)| a + (b - a) * f).collect()
}

/// Evaluates `to`, halving its step from `from` until the penalized log-likelihood reaches
/// `floor`.
/// Returns the accepted state and the number of halvings used.
fn guarded(
    model: &dyn EmModel,
    data: &[Observation],
    from: &[f64],
    to: &[f64],
    floor: f64,
    first: Option<State>,
    ctx: &MStepContext,
    cfg: &EMConfig,
) -> (Option<State>, usize) {
    let mut first = first;
    for k in 0..=cfg.halving_cap {
        let state = if k == 0 && first.is_some() {
            first.take()
        } else {
            let cand = if k == 0 {
                to.to_vec()
            } else {
                toward(from, to, k)
            };
            if !model.is_feasible(&cand) {
                continue;
            }
            evaluate(model, data, cand, cfg).ok()
        };
        if let Some(s) = state {
            if s.loglik + model.penalty(&s.theta, ctx) >= floor {
                return (Some(s), k);
            }
        }
    }
    (None, cfg.halving_cap)
}

/// Maximum-likelihood fit by EM from `theta0`.
///
/// Each iteration applies the model's M-step to a full E-step. With `cfg.accelerate`, a second
/// EM step feeds a secant history and the quasi-Newton extrapolation is tried first, halved
/// toward the plain EM update while it lowers the log-likelihood. Plain updates that lower the
/// log-likelihood (plus the model's penalty at that iteration) by more than [`ASCENT_SLACK`]
/// are halved toward the current iterate. Stops when the projected distance to the fixed
/// point, `‖M(θ) − θ‖∞ / ((1 − r)‖θ‖∞)`, drops below `param_tol`, or when the projected
/// remaining log-likelihood gain drops below `loglik_tol` while that distance is within
/// `10 * param_tol`. The contraction `r` comes from the secant pair when accelerating and from
/// successive residuals of full EM steps otherwise.
pub fn em_fit(
    model: &dyn EmModel,
    data: &[Observation],
    theta0: &[f64],
    cfg: &EMConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(BdpError::InvalidArgument("no observations".into()));
    }
    for obs in data {
        obs.validate(model)?;
    }
    check_params(model, theta0)?;

    let mut notes = MethodNotes::default();
    let mut current = evaluate(model, data, theta0.to_vec(), cfg)?;
    notes.window_widenings += widenings(&current.exps);
    let mut trace = vec![current.loglik];
    let mut history = SecantHistory::new(cfg.qn_secant_count);
    let mut converged = false;
    let mut iterations = 0;
    // EM residual and log-likelihood gain of the previous full EM step
    let mut previous_residual: Option<Vec<f64>> = None;
    let mut previous_gain: Option<f64> = None;

    while iterations < cfg.max_iter {
        let ctx = MStepContext::at(iterations);
        let m1 = model.mstep(data, &current.exps, &current.theta, &ctx)?;
        let residual: Vec<f64> = m1.iter().zip(&current.theta).map(|(a, b)| a - b).collect();
        let objective = |s: &State| s.loglik + model.penalty(&s.theta, &ctx);
        let floor = objective(&current) - ASCENT_SLACK;

        // per-component contraction: successive residuals, or the secant pair when accelerating
        let mut ratios = previous_residual
            .take()
            .map(|prev| component_ratios(&prev, &residual));
        let mut second = None;
        let plain = if model.is_feasible(&m1) {
            evaluate(model, data, m1.clone(), cfg).ok()
        } else {
            None
        };
        if cfg.accelerate {
            if let Some(first) = plain.as_ref() {
                if let Ok(m2) = model.mstep(data, &first.exps, &first.theta, &ctx) {
                    let v: Vec<f64> = m2.iter().zip(&m1).map(|(a, b)| a - b).collect();
                    ratios = Some(component_ratios(&residual, &v));
                    second = Some((residual.clone(), v));
                }
            }
        }
        // EM converges linearly; scale each residual component by 1/(1 - r), r its contraction
        // ratio, to estimate the remaining distance rather than the next step.
        let param_gap =
            projected_gap(&residual, ratios.as_deref()) / inf_norm(&current.theta).max(1e-12);
        notes.final_param_gap = param_gap;
        if param_gap < cfg.param_tol {
            notes.convergence = Some(Convergence::ParamTol);
            converged = true;
            break;
        }

        let mut next: Option<State> = None;
        if let (Some((u, v)), Some(first)) = (second, plain.as_ref()) {
            history.push(u, v);
            if history.is_full() {
                let proposal = accelerate_qn(&history, &current.theta, &m1);
                if proposal != m1 {
                    notes.qn_proposals += 1;
                    // halve toward the plain update, which is already known to ascend
                    let target = objective(first).max(floor);
                    let (accepted, halvings) =
                        guarded(model, data, &m1, &proposal, target, None, &ctx, cfg);
                    notes.qn_halvings += halvings;
                    if let Some(s) = accepted {
                        notes.qn_accepted += 1;
                        next = Some(s);
                    }
                }
            }
        }

        let mut full_step = false;
        let next = match next {
            Some(s) => s,
            None => {
                let (accepted, halvings) =
                    guarded(model, data, &current.theta, &m1, floor, plain, &ctx, cfg);
                notes.em_halvings += halvings;
                full_step = halvings == 0;
                match accepted {
                    Some(s) => s,
                    None => {
                        notes.warnings.push(format!(
                            "iteration {iterations}: no update within {} halvings increased the log-likelihood",
                            cfg.halving_cap
                        ));
                        break;
                    }
                }
            }
        };

        iterations += 1;
        notes.window_widenings += widenings(&next.exps);
        let dl = next.loglik - current.loglik;
        let loglik_gap = match previous_gain {
            Some(pl) if full_step && pl > 0.0 => remaining(dl.abs(), dl.abs() / pl),
            _ => dl.abs(),
        };
        // plain mode reads the contraction off successive residuals of full EM steps
        previous_residual = (full_step && !cfg.accelerate).then_some(residual);
        previous_gain = full_step.then_some(dl.abs());
        notes.final_param_change = relative_change(&current.theta, &next.theta);
        notes.final_loglik_change = dl;
        trace.push(next.loglik);
        current = next;
        if loglik_gap < cfg.loglik_tol && param_gap < FIXED_POINT_FACTOR * cfg.param_tol {
            notes.convergence = Some(Convergence::LoglikTol);
            converged = true;
            break;
        }
    }
    if !converged && iterations == cfg.max_iter {
        notes
            .warnings
            .push(format!("maximum of {} iterations reached", cfg.max_iter));
    }

    let reach = BOUNDARY_FACTOR * cfg.param_tol * inf_norm(&current.theta).max(1.0);
    for (j, name) in model.param_names().iter().enumerate() {
        let mut probe = current.theta.clone();
        let near = [-reach, reach].iter().any(|d| {
            probe[j] = current.theta[j] + d;
            !model.is_feasible(&probe)
        });
        if near {
            notes.warnings.push(format!(
                "{name} = {:.3e} is on the boundary of the parameter space; its standard error is not meaningful",
                current.theta[j]
            ));
        }
    }

    let mut standard_errors = Vec::new();
    if cfg.sem_enabled {
        match sem_information(model, data, &current.theta, cfg) {
            Ok(info) => standard_errors.push(StandardErrors::from_matrix(SeMethod::Sem, &info)),
            Err(e) => notes
                .warnings
                .push(format!("SEM information unavailable: {e}")),
        }
    }
    if cfg.hessian_enabled {
        match numerical_hessian_loglik(model, data, &current.theta, &cfg.numeric) {
            Ok(h) => standard_errors.push(StandardErrors::from_matrix(SeMethod::Hessian, &(-h))),
            Err(e) => notes
                .warnings
                .push(format!("numerical Hessian unavailable: {e}")),
        }
    }
    for se in &standard_errors {
        if se.std_errors.is_none() {
            notes.warnings.push(
                format!("{:?} information is not positive definite", se.method).to_lowercase(),
            );
        }
    }

    Ok(FitResult {
        param_names: model.param_names(),
        theta_hat: current.theta,
        loglik: current.loglik,
        information: standard_errors.first().map(|s| s.information.clone()),
        std_errors: standard_errors.first().and_then(|s| s.std_errors.clone()),
        standard_errors,
        loglik_trace: trace,
        iterations,
        converged,
        method_notes: notes,
    })
}

fn remaining(step: f64, ratio: f64) -> f64 {
    step / (1.0 - ratio.clamp(0.0, MAX_RATIO))
}

/// `|later_j / earlier_j|`, zero where the earlier residual vanishes.
fn component_ratios(earlier: &[f64], later: &[f64]) -> Vec<f64> {
    earlier
        .iter()
        .zip(later)
        .map(|(a, b)| if *a != 0.0 { (b / a).abs() } else { 0.0 })
        .collect()
}

/// `max_j |u_j| / (1 − r_j)`; the plain residual norm without ratios.
fn projected_gap(u: &[f64], ratios: Option<&[f64]>) -> f64 {
    match ratios {
        Some(r) => u
            .iter()
            .zip(r)
            .fold(0.0, |m, (a, r)| m.max(remaining(a.abs(), *r))),
        None => inf_norm(u),
    }
}

fn widenings(exps: &[ExpectationSet]) -> usize {
    exps.iter().map(|e| e.widenings).sum()
}
