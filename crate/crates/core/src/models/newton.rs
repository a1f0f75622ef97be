use nalgebra::{DMatrix, DVector};

/// How a guarded Newton update was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewtonStep {
    /// Newton direction accepted after the given number of halvings.
    Newton { halvings: usize },
    /// Hessian unusable or Newton halvings exhausted; Armijo gradient step taken.
    Gradient { backtracks: usize },
    /// No ascent found; the start point is returned.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub theta: Vec<f64>,
    pub step: NewtonStep,
}

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// One ascent step on `objective` from `start`.
///
/// Takes the Newton direction `-H^{-1} g` when `-H` is positive definite, halving it up to
/// `halving_cap` times until the objective does not decrease. Otherwise falls back to gradient
/// ascent with Armijo backtracking. Infeasible points must evaluate to `-inf` or NaN.
pub fn guarded_newton(
    start: &[f64],
    gradient: &DVector<f64>,
    hessian: &DMatrix<f64>,
    objective: impl Fn(&[f64]) -> f64,
    halving_cap: usize,
) -> NewtonOutcome {
    let f0 = objective(start);
    let shifted = |direction: &DVector<f64>, scale: f64| -> Vec<f64> {
        start
            .iter()
            .zip(direction.iter())
            .map(|(x, d)| x + scale * d)
            .collect()
    };

    if let Some(chol) = (-hessian.clone()).cholesky() {
        let direction = chol.solve(gradient);
        if direction.iter().all(|d| d.is_finite()) {
            let mut scale = 1.0;
            for halvings in 0..=halving_cap {
                let candidate = shifted(&direction, scale);
                let f = objective(&candidate);
                if f >= f0 {
                    return NewtonOutcome {
                        theta: candidate,
                        step: NewtonStep::Newton { halvings },
                    };
                }
                scale *= 0.5;
            }
        }
    }

    let g2 = gradient.norm_squared();
    if g2 > 0.0 && g2.is_finite() {
        let mut scale = 1.0;
        for backtracks in 0..MAX_BACKTRACKS {
            let candidate = shifted(gradient, scale);
            let f = objective(&candidate);
            if f >= f0 + ARMIJO_C * scale * g2 {
                return NewtonOutcome {
                    theta: candidate,
                    step: NewtonStep::Gradient { backtracks },
                };
            }
            scale *= 0.5;
        }
    }
    NewtonOutcome {
        theta: start.to_vec(),
        step: NewtonStep::Stalled,
    }
}
