use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::NumericConfig;
use crate::error::{BdpError, Result};
use crate::process::model::rates_or_zero;
use crate::process::{transition_probability, Observation, RateModel, RateWindow};

/// Inclusive range of states carrying non-negligible expectation mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationWindow {
    pub k_min: usize,
    pub k_max: usize,
    pub threshold: f64,
    pub hard_margin: usize,
}

// A transform G evaluated at the real contour abscissa s* = A/(2t) relates to its original by
// g(t) <~ s* e^{A/2} G(s*), so this scaling turns transform products into rough upper estimates
// of the per-state expectations.
fn estimate_scale(t: f64, cfg: &NumericConfig) -> f64 {
    cfg.inversion.abscissa(t) * (0.5 * cfg.inversion.discretization_parameter).exp()
}

/// Lowest state a path from `a` to `b` can visit: below it a death leads to a state with no
/// way back up.
pub(crate) fn returnable_low(model: &dyn RateModel, theta: &[f64], obs: &Observation) -> usize {
    let floor = model.state_floor(&obs.z);
    let mut m = obs.a.min(obs.b);
    while m > floor
        && rates_or_zero(model, theta, &obs.z, m).1 > 0.0
        && rates_or_zero(model, theta, &obs.z, m - 1).0 > 0.0
    {
        m -= 1;
    }
    m
}

/// Highest state at most `limit` that a path from `a` to `b` can visit.
pub(crate) fn returnable_high(
    model: &dyn RateModel,
    theta: &[f64],
    obs: &Observation,
    limit: usize,
) -> usize {
    let mut m = obs.a.max(obs.b);
    while m < limit
        && model.state_cap().map_or(true, |c| m < c)
        && rates_or_zero(model, theta, &obs.z, m).0 > 0.0
        && rates_or_zero(model, theta, &obs.z, m + 1).1 > 0.0
    {
        m += 1;
    }
    m
}

/// Picks the states whose estimated contributions reach `cfg.window_threshold`.
///
/// Starting from `[min(a,b), max(a,b)]` the window grows outward until the first state whose
/// transform products at `s* = A/(2t)` fall below the threshold, but no further than
/// `min(a,b) - margin` and `max(a,b) + margin`. If the estimate at a clipped edge is still above
/// the threshold the margin doubles and the scan repeats.
pub fn choose_window(
    model: &dyn RateModel,
    theta: &[f64],
    obs: &Observation,
    cfg: &NumericConfig,
) -> Result<TruncationWindow> {
    let floor = returnable_low(model, theta, obs);
    let cap = model.state_cap();
    let (lo, hi) = (obs.a.min(obs.b), obs.a.max(obs.b));
    let mut window = TruncationWindow {
        k_min: lo,
        k_max: hi,
        threshold: cfg.window_threshold,
        hard_margin: cfg.window_margin,
    };
    if obs.t == 0.0 {
        return Ok(window);
    }
    let p = transition_probability(model, theta, &obs.z, obs.a, obs.b, obs.t, cfg)?;
    if !(p > f64::MIN_POSITIVE) {
        return Err(BdpError::ZeroDenominator {
            a: obs.a,
            b: obs.b,
            t: obs.t,
        });
    }
    let scale = estimate_scale(obs.t, cfg) / p;
    let s_star = Complex64::new(cfg.inversion.abscissa(obs.t), 0.0);

    for _ in 0..32 {
        let margin = window.hard_margin;
        let lo_cap = lo.saturating_sub(margin).max(floor);
        let hi_cap = returnable_high(model, theta, obs, hi + margin);
        let top = cap.map_or(hi_cap + 1, |c| c.min(hi_cap + 1));
        let rates = RateWindow::new(model, theta, &obs.z, top, cfg)?;
        let table = rates.table(s_star)?;
        let criterion = |k: usize| -> f64 {
            let (lambda, mu) = rates.rates(k);
            let f_ak = table.f(obs.a, k).re;
            let mut c = f_ak * table.f(k, obs.b).re;
            if lambda > 0.0 && k < top {
                c = c.max(lambda * f_ak * table.f(k + 1, obs.b).re);
            }
            if mu > 0.0 && k > floor {
                c = c.max(mu * f_ak * table.f(k - 1, obs.b).re);
            }
            c.abs() * scale
        };

        let mut k_max = hi;
        while k_max < hi_cap && criterion(k_max + 1) >= cfg.window_threshold {
            k_max += 1;
        }
        let mut k_min = lo;
        while k_min > lo_cap && criterion(k_min - 1) >= cfg.window_threshold {
            k_min -= 1;
        }
        window.k_min = k_min;
        window.k_max = k_max;
        let high_open = k_max == hi_cap
            && hi_cap == hi + margin
            && returnable_high(model, theta, obs, hi_cap + 1) > hi_cap
            && criterion(hi_cap) >= cfg.window_threshold;
        let low_open =
            k_min == lo_cap && lo_cap > floor && criterion(lo_cap) >= cfg.window_threshold;
        if !(high_open || low_open) {
            break;
        }
        window.hard_margin = (window.hard_margin * 2).max(1);
    }
    Ok(window)
}
