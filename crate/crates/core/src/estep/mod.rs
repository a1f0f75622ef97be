//! Conditional expectations of up-steps, down-steps and holding times given observed
//! endpoints, computed by inverting products of transforms.
//!
//! For an observation `a -> b` over time `t`,
//!
//! ```text
//! E(U_k|Y) = λ_k L^{-1}[f_{a,k} f_{k+1,b}](t) / P_{a,b}(t)
//! E(D_k|Y) = μ_k L^{-1}[f_{a,k} f_{k-1,b}](t) / P_{a,b}(t)
//! E(T_k|Y) =     L^{-1}[f_{a,k} f_{k,b}](t)   / P_{a,b}(t)
//! ```
//!
//! over a truncation window of states.

mod window;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::RangeInclusive;

use crate::config::NumericConfig;
use crate::error::{BdpError, Result};
use crate::laplace::{invert_laplace_batch_relative, Inversion};
use crate::process::{check_params, transform, Observation, RateModel, RateWindow, TransformTable};

pub use window::{choose_window, TruncationWindow};
use window::{returnable_high, returnable_low};

/// Expectations below this magnitude are treated as zero when negative.
pub const EXPECTATION_CLAMP: f64 = 1e-10;

/// Maximum number of margin doublings when boundary terms stay above threshold.
const MAX_WIDENINGS: usize = 12;

/// Relative accuracy demanded of the denominator `P_ab(t)`.
pub const DENOM_REL_TOL: f64 = 1e-9;

/// A denominator within this factor of its rounding error is treated as zero.
const ROUNDOFF_MARGIN: f64 = 100.0;

fn resolved(denom: &Inversion) -> bool {
    denom.value > f64::MIN_POSITIVE && denom.value > ROUNDOFF_MARGIN * denom.roundoff_estimate
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExpectationKind {
    /// Up-steps `U_k`.
    U,
    /// Down-steps `D_k`.
    D,
    /// Holding time `T_k`.
    T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationSet {
    pub window: TruncationWindow,
    /// `E(U_k|Y)` for `k` in the window, indexed from `k_min`.
    pub eu: Vec<f64>,
    pub ed: Vec<f64>,
    pub et: Vec<f64>,
    /// `P_{a,b}(t)`.
    pub denom: f64,
    pub total_up: f64,
    pub total_down: f64,
    /// `Σ_k k E(T_k|Y)`.
    pub particle_time: f64,
    pub total_time: f64,
    /// Number of window widenings triggered by boundary terms.
    pub widenings: usize,
}

impl ExpectationSet {
    pub fn states(&self) -> RangeInclusive<usize> {
        self.window.k_min..=self.window.k_max
    }

    fn lookup(values: &[f64], k_min: usize, k: usize) -> f64 {
        k.checked_sub(k_min)
            .and_then(|i| values.get(i))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn eu_at(&self, k: usize) -> f64 {
        Self::lookup(&self.eu, self.window.k_min, k)
    }

    pub fn ed_at(&self, k: usize) -> f64 {
        Self::lookup(&self.ed, self.window.k_min, k)
    }

    pub fn et_at(&self, k: usize) -> f64 {
        Self::lookup(&self.et, self.window.k_min, k)
    }

    pub fn values(&self, kind: ExpectationKind) -> &[f64] {
        match kind {
            ExpectationKind::U => &self.eu,
            ExpectationKind::D => &self.ed,
            ExpectationKind::T => &self.et,
        }
    }

    /// `Σ_k w(k) E(·_k|Y)` over the window.
    pub fn weighted(&self, kind: ExpectationKind, weight: impl Fn(usize) -> f64) -> f64 {
        self.states()
            .zip(self.values(kind))
            .map(|(k, v)| weight(k) * v)
            .sum()
    }

    /// Builds a set from per-state arrays indexed from `window.k_min`; aggregates are derived.
    pub fn from_arrays(
        window: TruncationWindow,
        eu: Vec<f64>,
        ed: Vec<f64>,
        et: Vec<f64>,
        denom: f64,
        t: f64,
    ) -> Self {
        let total_up = eu.iter().sum();
        let total_down = ed.iter().sum();
        let particle_time = (window.k_min..).zip(&et).map(|(k, v)| k as f64 * v).sum();
        Self {
            window,
            eu,
            ed,
            et,
            denom,
            total_up,
            total_down,
            particle_time,
            total_time: t,
            widenings: 0,
        }
    }

    /// The path that never leaves `a`.
    fn stationary(a: usize, t: f64, cfg: &NumericConfig) -> Self {
        let window = TruncationWindow {
            k_min: a,
            k_max: a,
            threshold: cfg.window_threshold,
            hard_margin: cfg.window_margin,
        };
        Self::from_arrays(window, vec![0.0], vec![0.0], vec![t], 1.0, t)
    }
}

fn clamp_expectation(v: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v > -EXPECTATION_CLAMP {
        Ok(0.0)
    } else {
        Err(BdpError::NegativeValue { value: v })
    }
}

/// Columns of the batched inversion for a window: `P_{a,b}` first, then `(U, D, T)` per state.
fn fill_products(
    table: &TransformTable<'_, '_>,
    rates: &RateWindow<'_>,
    obs: &Observation,
    window: &TruncationWindow,
    cap: Option<usize>,
    out: &mut [Complex64],
) {
    let floor = rates.floor();
    out[0] = table.f(obs.a, obs.b);
    for (idx, k) in (window.k_min..=window.k_max).enumerate() {
        let (lambda, mu) = rates.rates(k);
        let f_ak = table.f(obs.a, k);
        let base = 1 + 3 * idx;
        if lambda > 0.0 && cap.map_or(true, |c| k < c) {
            out[base] = f_ak * table.f(k + 1, obs.b) * lambda;
        }
        if mu > 0.0 && k > floor {
            out[base + 1] = f_ak * table.f(k - 1, obs.b) * mu;
        }
        out[base + 2] = f_ak * table.f(k, obs.b);
    }
}

struct WindowResult {
    set: ExpectationSet,
    /// Estimated size of the first state past each edge.
    beyond_low: f64,
    beyond_high: f64,
}

fn expectations_on_window(
    model: &dyn RateModel,
    theta: &[f64],
    obs: &Observation,
    window: TruncationWindow,
    cfg: &NumericConfig,
) -> Result<WindowResult> {
    let cap = model.state_cap();
    let top = cap.map_or(window.k_max + 1, |c| c.min(window.k_max + 1));
    let rates = RateWindow::new(model, theta, &obs.z, top, cfg)?;
    let width = window.k_max - window.k_min + 1;
    let lead = transform(model, theta, &obs.z, obs.a, obs.b, cfg)?;
    let inversions: Vec<Inversion> = invert_laplace_batch_relative(
        |s, out| {
            let table = rates.table(s)?;
            fill_products(&table, &rates, obs, &window, cap, out);
            Ok(())
        },
        |s| lead.eval(s),
        1 + 3 * width,
        obs.t,
        &cfg.inversion,
        DENOM_REL_TOL,
    )?;
    let denom = inversions[0].value;
    if !resolved(&inversions[0]) {
        return Err(BdpError::ZeroDenominator {
            a: obs.a,
            b: obs.b,
            t: obs.t,
        });
    }
    let mut eu = Vec::with_capacity(width);
    let mut ed = Vec::with_capacity(width);
    let mut et = Vec::with_capacity(width);
    for chunk in inversions[1..].chunks(3) {
        eu.push(clamp_expectation(chunk[0].value / denom)?);
        ed.push(clamp_expectation(chunk[1].value / denom)?);
        et.push(clamp_expectation(chunk[2].value / denom)?);
    }
    let size = |i: usize| eu[i].max(ed[i]).max(et[i]);
    // geometric extrapolation from the two outermost states, never assuming growth
    let beyond = |edge: usize, inner: usize| {
        let (e, i) = (size(edge), size(inner));
        if i > 0.0 {
            e * (e / i).min(1.0)
        } else {
            e
        }
    };
    let (beyond_low, beyond_high) = if width > 1 {
        (beyond(0, 1), beyond(width - 1, width - 2))
    } else {
        (size(0), size(0))
    };
    Ok(WindowResult {
        set: ExpectationSet::from_arrays(window, eu, ed, et, denom, obs.t),
        beyond_low,
        beyond_high,
    })
}

fn prepare(
    model: &dyn RateModel,
    theta: &[f64],
    obs: &Observation,
    cfg: &NumericConfig,
) -> Result<()> {
    check_params(model, theta)?;
    cfg.validate()?;
    obs.validate(model)
}

fn is_absorbing(model: &dyn RateModel, theta: &[f64], obs: &Observation) -> bool {
    model.birth_rate(obs.a, theta, &obs.z) == 0.0 && model.death_rate(obs.a, theta, &obs.z) == 0.0
}

/// Per-state conditional expectations for one observation.
///
/// The window from [`choose_window`] is widened while the expectations extrapolated one state
/// past either edge exceed the threshold and a path could still visit that state.
pub fn conditional_expectations(
    model: &dyn RateModel,
    theta: &[f64],
    obs: &Observation,
    cfg: &NumericConfig,
) -> Result<ExpectationSet> {
    prepare(model, theta, obs, cfg)?;
    if obs.t == 0.0 || is_absorbing(model, theta, obs) {
        if obs.a != obs.b {
            return Err(BdpError::ZeroDenominator {
                a: obs.a,
                b: obs.b,
                t: obs.t,
            });
        }
        return Ok(ExpectationSet::stationary(obs.a, obs.t, cfg));
    }
    let floor = returnable_low(model, theta, obs);
    let mut window = choose_window(model, theta, obs, cfg)?;
    let mut widenings = 0;
    loop {
        let result = expectations_on_window(model, theta, obs, window, cfg)?;
        let grow_low = window.k_min > floor && result.beyond_low > cfg.window_threshold;
        let grow_high = returnable_high(model, theta, obs, window.k_max + 1) > window.k_max
            && result.beyond_high > cfg.window_threshold;
        if !(grow_low || grow_high) || widenings == MAX_WIDENINGS {
            let mut set = result.set;
            set.widenings = widenings;
            return Ok(set);
        }
        widenings += 1;
        let extra = window.k_max - window.k_min + 1;
        if grow_low {
            window.k_min = window.k_min.saturating_sub(extra).max(floor);
        }
        if grow_high {
            window.k_max = returnable_high(model, theta, obs, window.k_max + extra);
        }
        window.hard_margin *= 2;
    }
}

/// `Σ_k w(k) E(·_k|Y)` from a single inversion of the weighted sum of transform products.
pub fn weighted_sum_expectation(
    model: &dyn RateModel,
    theta: &[f64],
    obs: &Observation,
    kind: ExpectationKind,
    weight: impl Fn(usize) -> f64,
    cfg: &NumericConfig,
) -> Result<f64> {
    prepare(model, theta, obs, cfg)?;
    if obs.t == 0.0 || is_absorbing(model, theta, obs) {
        let set = conditional_expectations(model, theta, obs, cfg)?;
        return Ok(set.weighted(kind, weight));
    }
    let window = choose_window(model, theta, obs, cfg)?;
    let weights: Vec<f64> = (window.k_min..=window.k_max).map(&weight).collect();
    if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
        return Err(BdpError::InvalidArgument(format!("non-finite weight {w}")));
    }
    let cap = model.state_cap();
    let top = cap.map_or(window.k_max + 1, |c| c.min(window.k_max + 1));
    let rates = RateWindow::new(model, theta, &obs.z, top, cfg)?;
    let width = window.k_max - window.k_min + 1;
    let mut scratch = vec![Complex64::new(0.0, 0.0); 1 + 3 * width];
    let lead = transform(model, theta, &obs.z, obs.a, obs.b, cfg)?;
    let offset = match kind {
        ExpectationKind::U => 0,
        ExpectationKind::D => 1,
        ExpectationKind::T => 2,
    };
    let inversions = invert_laplace_batch_relative(
        |s, out| {
            let table = rates.table(s)?;
            scratch
                .iter_mut()
                .for_each(|x| *x = Complex64::new(0.0, 0.0));
            fill_products(&table, &rates, obs, &window, cap, &mut scratch);
            out[0] = scratch[0];
            out[1] = weights
                .iter()
                .enumerate()
                .map(|(idx, w)| scratch[1 + 3 * idx + offset] * *w)
                .sum();
            Ok(())
        },
        |s| lead.eval(s),
        2,
        obs.t,
        &cfg.inversion,
        DENOM_REL_TOL,
    )?;
    let denom = inversions[0].value;
    if !resolved(&inversions[0]) {
        return Err(BdpError::ZeroDenominator {
            a: obs.a,
            b: obs.b,
            t: obs.t,
        });
    }
    Ok(inversions[1].value / denom)
}
