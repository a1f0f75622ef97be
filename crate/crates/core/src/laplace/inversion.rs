//! Numerical Laplace inversion by a trapezoidal (Fourier-series) discretization of the
//! Bromwich integral along `Re s = A / (2t)`, followed by Euler (binomial) averaging of the
//! alternating partial sums.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{BdpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionConfig {
    /// `A`: the discretization error behaves like `exp(-A)`.
    pub discretization_parameter: f64,
    /// Number of plain partial-sum terms before Euler averaging starts.
    pub euler_terms: usize,
    /// Binomial averaging order.
    pub euler_extrapolation_order: usize,
    pub target_abs_error: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            discretization_parameter: 22.0,
            euler_terms: 20,
            euler_extrapolation_order: 11,
            target_abs_error: 1e-8,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.discretization_parameter > 0.0) {
            return Err(BdpError::InvalidArgument(
                "discretization_parameter must be positive".into(),
            ));
        }
        if self.euler_extrapolation_order < 1 || self.euler_terms < self.euler_extrapolation_order {
            return Err(BdpError::InvalidArgument(
                "need euler_terms >= euler_extrapolation_order >= 1".into(),
            ));
        }
        if !(self.target_abs_error > 0.0) {
            return Err(BdpError::InvalidArgument(
                "target_abs_error must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Real abscissa `A / (2t)` of the inversion contour.
    pub fn abscissa(&self, t: f64) -> f64 {
        self.discretization_parameter / (2.0 * t)
    }

    /// Number of contour points the inversion consumes.
    pub fn num_points(&self) -> usize {
        self.euler_terms + self.euler_extrapolation_order + 1
    }

    /// The contour points `(A + 2 pi k i) / (2t)`, `k = 0..num_points()`.
    pub fn contour(&self, t: f64) -> Vec<Complex64> {
        (0..self.num_points())
            .map(|k| Complex64::new(self.discretization_parameter, 2.0 * PI * k as f64) / (2.0 * t))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub value: f64,
    /// Change in the Euler average when one fewer leading term is used.
    pub error_estimate: f64,
    /// Rounding error of the summed transform values, amplified by the prefactor.
    pub roundoff_estimate: f64,
}

impl Inversion {
    /// True when the internal estimate exceeds the configured target.
    pub fn accuracy_warning(&self, cfg: &InversionConfig) -> bool {
        !(self.error_estimate <= cfg.target_abs_error)
    }
}

/// Binomial weights `C(m, j) / 2^m`.
fn euler_weights(order: usize) -> Vec<f64> {
    let mut w = vec![1.0f64; order + 1];
    for j in 1..=order {
        w[j] = w[j - 1] * (order + 1 - j) as f64 / j as f64;
    }
    let scale = 0.5f64.powi(order as i32);
    w.iter_mut().for_each(|x| *x *= scale);
    w
}

/// Combines the real parts of transform values on the contour into an inverse value.
///
/// `values[k]` must hold `Re f((A + 2 pi k i)/(2t))` for `k = 0..cfg.num_points()`.
pub fn euler_sum(values: &[f64], t: f64, cfg: &InversionConfig) -> Inversion {
    let n = cfg.euler_terms;
    let m = cfg.euler_extrapolation_order;
    debug_assert_eq!(values.len(), n + m + 1);
    let mut partial = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for (k, v) in values.iter().enumerate() {
        let term = match k {
            0 => 0.5 * v,
            k if k % 2 == 1 => -v,
            _ => *v,
        };
        acc += term;
        partial.push(acc);
    }
    let weights = euler_weights(m);
    let average = |start: usize| -> f64 {
        weights
            .iter()
            .enumerate()
            .map(|(j, w)| w * partial[start + j])
            .sum()
    };
    let prefactor = (0.5 * cfg.discretization_parameter).exp() / t;
    let current = average(n);
    let previous = average(n - 1);
    let magnitude: f64 = values.iter().map(|v| v.abs()).sum();
    Inversion {
        value: prefactor * current,
        error_estimate: prefactor * (current - previous).abs(),
        roundoff_estimate: prefactor * f64::EPSILON * magnitude,
    }
}

/// Inverts a scalar transform at time `t > 0`.
pub fn invert_laplace<F>(mut f: F, t: f64, cfg: &InversionConfig) -> Result<Inversion>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    check_time(t)?;
    cfg.validate()?;
    let mut values = Vec::with_capacity(cfg.num_points());
    for s in cfg.contour(t) {
        let v = f(s)?;
        if !v.is_finite() {
            return Err(BdpError::EvaluationFailure {
                re: s.re,
                im: s.im,
                reason: "non-finite transform value".into(),
            });
        }
        values.push(v.re);
    }
    Ok(euler_sum(&values, t, cfg))
}

/// Inverts `dim` transforms that share contour evaluations.
///
/// `f(s, out)` must fill `out[..dim]` with the transform values at `s`.
pub fn invert_laplace_batch<F>(
    mut f: F,
    dim: usize,
    t: f64,
    cfg: &InversionConfig,
) -> Result<Vec<Inversion>>
where
    F: FnMut(Complex64, &mut [Complex64]) -> Result<()>,
{
    check_time(t)?;
    cfg.validate()?;
    let points = cfg.contour(t);
    let mut columns = vec![vec![0.0; points.len()]; dim];
    let mut buf = vec![Complex64::new(0.0, 0.0); dim];
    for (k, s) in points.iter().enumerate() {
        buf.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        f(*s, &mut buf)?;
        for (col, v) in columns.iter_mut().zip(&buf) {
            if !v.is_finite() {
                return Err(BdpError::EvaluationFailure {
                    re: s.re,
                    im: s.im,
                    reason: "non-finite transform value".into(),
                });
            }
            col[k] = v.re;
        }
    }
    Ok(columns.iter().map(|col| euler_sum(col, t, cfg)).collect())
}

/// Largest term count [`invert_laplace_batch_relative`] will try.
pub const MAX_EULER_TERMS: usize = 80;

/// Range of discretization parameters [`invert_laplace_batch_relative`] will choose from.
pub const MIN_DISCRETIZATION: f64 = 12.0;
pub const MAX_DISCRETIZATION: f64 = 40.0;

/// Relative bound on the discretization error accepted by [`invert_laplace_batch_relative`].
pub const DISCRETIZATION_REL_TOL: f64 = 1e-7;

/// Like [`invert_laplace_batch`], but tightens the configuration until component 0 is
/// accurate relative to its own magnitude.
///
/// `lead` evaluates component 0 alone, which must be the transform of a function bounded by 1.
/// When `exp(-A)` is large next to the value, `A` is reset so the leading aliasing term
/// `exp(-A) g(3t)`, with `g(3t)` measured through `lead`, sits at [`DISCRETIZATION_REL_TOL`] of
/// the value. This raises `A` when the function grows past `t`, and lowers it when the function
/// is decaying, where roundoff growing like `exp(A/2)` is the larger error. Then `euler_terms` is
/// doubled (up to [`MAX_EULER_TERMS`]) until the truncation estimate is within `rel_tol`.
pub fn invert_laplace_batch_relative<F, G>(
    mut f: F,
    lead: G,
    dim: usize,
    t: f64,
    cfg: &InversionConfig,
    rel_tol: f64,
) -> Result<Vec<Inversion>>
where
    F: FnMut(Complex64, &mut [Complex64]) -> Result<()>,
    G: FnMut(Complex64) -> Result<Complex64>,
{
    let mut cfg = *cfg;
    let mut out = invert_laplace_batch(&mut f, dim, t, &cfg)?;
    let value = out[0].value.abs();
    let allowed = DISCRETIZATION_REL_TOL * value;
    if value > 0.0 && (-cfg.discretization_parameter).exp() > allowed {
        let later = invert_laplace(lead, 3.0 * t, &cfg)?.value.abs();
        let chosen = (later / allowed)
            .ln()
            .clamp(MIN_DISCRETIZATION, MAX_DISCRETIZATION);
        if (chosen - cfg.discretization_parameter).abs() > 0.5 {
            cfg.discretization_parameter = chosen;
            out = invert_laplace_batch(&mut f, dim, t, &cfg)?;
        }
    }
    while out[0].error_estimate > rel_tol * out[0].value.abs() && cfg.euler_terms < MAX_EULER_TERMS
    {
        cfg.euler_terms = (2 * cfg.euler_terms).min(MAX_EULER_TERMS);
        out = invert_laplace_batch(&mut f, dim, t, &cfg)?;
    }
    Ok(out)
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(BdpError::InvalidArgument(format!(
            "inversion time must be positive and finite, got {t}"
        )));
    }
    Ok(())
}
