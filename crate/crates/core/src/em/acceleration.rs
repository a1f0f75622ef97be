use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

/// The most recent secant pairs `u = M(θ) − θ`, `v = M(M(θ)) − M(θ)`.
#[derive(Debug, Clone, Default)]
pub struct SecantHistory {
    pairs: VecDeque<(Vec<f64>, Vec<f64>)>,
    capacity: usize,
}

impl SecantHistory {
    pub fn new(capacity: usize) -> Self {
        Self {
            pairs: VecDeque::with_capacity(capacity),
            capacity: capacity.max(1),
        }
    }

    pub fn push(&mut self, u: Vec<f64>, v: Vec<f64>) {
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((u, v));
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.pairs.len() == self.capacity
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }
}

/// Quasi-Newton extrapolation of the EM map.
///
/// With `U`, `V` the stacked secants and `mapped = M(θ)`, returns
/// `M(θ) − V (UᵀU − UᵀV)⁻¹ Uᵀ (θ − M(θ))`, the secant approximation to a Newton step on
/// `θ − M(θ) = 0`. Falls back to `mapped` when the history is empty or the small system is
/// singular or produces a non-finite step.
pub fn accelerate_qn(history: &SecantHistory, theta: &[f64], mapped: &[f64]) -> Vec<f64> {
    let p = theta.len();
    let q = history.len();
    if q == 0 || mapped.len() != p {
        return mapped.to_vec();
    }
    let u = DMatrix::from_fn(p, q, |r, c| history.pairs[c].0[r]);
    let v = DMatrix::from_fn(p, q, |r, c| history.pairs[c].1[r]);
    let ut = u.transpose();
    let system = &ut * &u - &ut * &v;
    let residual = DVector::from_iterator(p, theta.iter().zip(mapped).map(|(t, m)| t - m));
    let scale = system.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(scale > 0.0) || !scale.is_finite() {
        return mapped.to_vec();
    }
    let Some(coef) = system.clone().lu().solve(&(&ut * residual)) else {
        return mapped.to_vec();
    };
    let svd = system.svd(false, false);
    let smallest = svd.singular_values.min();
    if !(smallest > 1e-14 * scale) {
        return mapped.to_vec();
    }
    let step = v * coef;
    let out: Vec<f64> = mapped.iter().zip(step.iter()).map(|(m, s)| m - s).collect();
    if out.iter().all(|x| x.is_finite()) {
        out
    } else {
        mapped.to_vec()
    }
}
