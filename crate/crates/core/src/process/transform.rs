//! Laplace transforms `f_{i,j}(s)` of transition probabilities.
//!
//! With `B_k` the convergent denominators of the birth-death continued fraction and
//! `T_n = a_n/(b_n + a_{n+1}/(b_{n+1} + ...))` its tails,
//!
//! ```text
//! f_{i,j}(s) = R_{i,j} B_min(s) / (B_{max+1}(s) + B_max(s) T_{max+2}(s))
//! ```
//!
//! where `R_{i,j}` is the product of birth rates `λ_i..λ_{j-1}` (`i <= j`) or death rates
//! `μ_{j+1}..μ_i` (`j <= i`). States are shifted by the model's floor before indexing.

use num_complex::Complex64;

use crate::config::NumericConfig;
use crate::error::{BdpError, Result};
use crate::laplace::{lentz_eval, ContinuedFraction, DenominatorRecurrence};
use crate::process::model::{out_of_support, rates_or_zero, RateModel};

/// The birth-death continued fraction at frequency `s`, in floor-shifted indexing.
pub struct BdpFraction<'a> {
    model: &'a dyn RateModel,
    theta: &'a [f64],
    z: &'a [f64],
    s: Complex64,
    floor: usize,
}

impl<'a> BdpFraction<'a> {
    pub fn new(model: &'a dyn RateModel, theta: &'a [f64], z: &'a [f64], s: Complex64) -> Self {
        Self {
            model,
            theta,
            z,
            s,
            floor: model.state_floor(z),
        }
    }

    fn rates_at(&self, m: usize) -> (f64, f64) {
        rates_or_zero(self.model, self.theta, self.z, m + self.floor)
    }
}

impl ContinuedFraction for BdpFraction<'_> {
    fn numerator(&self, j: usize) -> Complex64 {
        if j <= 1 {
            return Complex64::new(1.0, 0.0);
        }
        let (lambda, _) = self.rates_at(j - 2);
        let (_, mu) = self.rates_at(j - 1);
        Complex64::new(-lambda * mu, 0.0)
    }

    fn denominator(&self, j: usize) -> Complex64 {
        if j <= 1 {
            return self.s + self.rates_at(0).0;
        }
        let (lambda, mu) = self.rates_at(j - 1);
        self.s + lambda + mu
    }
}

/// The tail `a_n/(b_n + a_{n+1}/(...))` of a fraction, re-indexed from 1.
struct Tail<C> {
    inner: C,
    start: usize,
}

impl<C: ContinuedFraction> ContinuedFraction for Tail<C> {
    fn numerator(&self, j: usize) -> Complex64 {
        self.inner.numerator(self.start + j - 1)
    }
    fn denominator(&self, j: usize) -> Complex64 {
        self.inner.denominator(self.start + j - 1)
    }
}

/// Rates on a contiguous block of states with cumulative log-products, independent of `s`.
pub struct RateWindow<'a> {
    model: &'a dyn RateModel,
    theta: &'a [f64],
    z: &'a [f64],
    floor: usize,
    /// Largest shifted index `K` whose transforms are available.
    top: usize,
    /// `λ'_m`, `μ'_m` for `m = 0..=K+1`.
    birth: Vec<f64>,
    death: Vec<f64>,
    /// `Σ_{k<m} ln λ'_k` and the count of zero rates among `k < m`.
    birth_log_prefix: Vec<f64>,
    birth_zero_prefix: Vec<usize>,
    death_log_prefix: Vec<f64>,
    death_zero_prefix: Vec<usize>,
    tol: f64,
    max_depth: usize,
}

impl<'a> RateWindow<'a> {
    /// Precomputes rates for states `floor..=top_state`.
    pub fn new(
        model: &'a dyn RateModel,
        theta: &'a [f64],
        z: &'a [f64],
        top_state: usize,
        cfg: &NumericConfig,
    ) -> Result<Self> {
        if !model.in_support(top_state, z) {
            return Err(out_of_support(model, top_state, z));
        }
        let floor = model.state_floor(z);
        let top = top_state - floor;
        let (birth, death): (Vec<f64>, Vec<f64>) = (0..=top + 1)
            .map(|m| rates_or_zero(model, theta, z, m + floor))
            .unzip();
        if let Some(bad) = birth
            .iter()
            .chain(&death)
            .find(|r| !(r.is_finite() && **r >= 0.0))
        {
            return Err(BdpError::InvalidArgument(format!(
                "model `{}` produced an invalid rate {bad}",
                model.name()
            )));
        }
        let prefix = |rates: &[f64]| {
            let mut logs = vec![0.0; rates.len() + 1];
            let mut zeros = vec![0; rates.len() + 1];
            for (m, &r) in rates.iter().enumerate() {
                let zero = r == 0.0;
                logs[m + 1] = logs[m] + if zero { 0.0 } else { r.ln() };
                zeros[m + 1] = zeros[m] + zero as usize;
            }
            (logs, zeros)
        };
        let (birth_log_prefix, birth_zero_prefix) = prefix(&birth);
        let (death_log_prefix, death_zero_prefix) = prefix(&death);
        Ok(Self {
            model,
            theta,
            z,
            floor,
            top,
            birth,
            death,
            birth_log_prefix,
            birth_zero_prefix,
            death_log_prefix,
            death_zero_prefix,
            tol: cfg.lentz_tol,
            max_depth: cfg.max_depth_for(top_state),
        })
    }

    pub fn floor(&self) -> usize {
        self.floor
    }

    pub fn top_state(&self) -> usize {
        self.top + self.floor
    }

    /// `(λ_k, μ_k)` for a state inside the window (or one above it).
    pub fn rates(&self, state: usize) -> (f64, f64) {
        let m = state - self.floor;
        (self.birth[m], self.death[m])
    }

    /// `ln R_{i,j}` for shifted indices, `None` when a zero rate makes the product vanish.
    fn log_rate_product(&self, i: usize, j: usize) -> Option<f64> {
        let (logs, zeros, lo, hi) = if i <= j {
            (&self.birth_log_prefix, &self.birth_zero_prefix, i, j)
        } else {
            (
                &self.death_log_prefix,
                &self.death_zero_prefix,
                j + 1,
                i + 1,
            )
        };
        (zeros[hi] == zeros[lo]).then(|| logs[hi] - logs[lo])
    }

    /// Evaluates everything needed for `f_{i,j}(s)` with `i, j` in the window.
    pub fn table(&self, s: Complex64) -> Result<TransformTable<'_, 'a>> {
        let fraction = BdpFraction::new(self.model, self.theta, self.z, s);
        let k_top = self.top;

        // B_0..B_{K+1} as mantissa and log scale, and ratios B_k/B_{k-1}.
        let mut b_mantissa = Vec::with_capacity(k_top + 2);
        let mut b_log_scale = Vec::with_capacity(k_top + 2);
        let mut ratio = Vec::with_capacity(k_top + 2);
        b_mantissa.push(Complex64::new(1.0, 0.0));
        b_log_scale.push(0.0);
        ratio.push(Complex64::new(f64::NAN, 0.0));
        let mut rec = DenominatorRecurrence::new(&fraction);
        for _ in 0..=k_top {
            let pair = rec.step();
            b_mantissa.push(pair.current);
            b_log_scale.push(pair.log_scale);
            ratio.push(pair.ratio());
        }

        // T_2..T_{K+2}: Lentz for the last one, then backward.
        let mut tail = vec![Complex64::new(0.0, 0.0); k_top + 3];
        let start = k_top + 2;
        let outcome = lentz_eval(
            &Tail {
                inner: &fraction,
                start,
            },
            self.tol,
            self.max_depth,
        )?;
        tail[start] = outcome.value;
        for n in (2..start).rev() {
            let a = -self.birth[n - 2] * self.death[n - 1];
            let b = s + self.birth[n - 1] + self.death[n - 1];
            tail[n] = if a == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                a / (b + tail[n + 1])
            };
        }
        let check = |v: Complex64, what: &str| -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(BdpError::EvaluationFailure {
                    re: s.re,
                    im: s.im,
                    reason: format!("non-finite {what}"),
                })
            }
        };
        for v in b_mantissa.iter().chain(&ratio[1..]) {
            check(*v, "convergent denominator")?;
        }
        for v in &tail[2..] {
            check(*v, "continued-fraction tail")?;
        }
        Ok(TransformTable {
            window: self,
            b_mantissa,
            b_log_scale,
            ratio,
            tail,
            depth: outcome.depth,
        })
    }
}

/// All transforms `f_{i,j}(s)` on a rate window at one frequency.
pub struct TransformTable<'w, 'a> {
    window: &'w RateWindow<'a>,
    b_mantissa: Vec<Complex64>,
    b_log_scale: Vec<f64>,
    ratio: Vec<Complex64>,
    tail: Vec<Complex64>,
    depth: usize,
}

impl TransformTable<'_, '_> {
    /// Lentz depth used for the top tail.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// `f_{i,j}(s)` for absolute states `i, j` in `floor..=top_state`.
    pub fn f(&self, i: usize, j: usize) -> Complex64 {
        let floor = self.window.floor;
        let (i, j) = (i - floor, j - floor);
        let (lo, hi) = (i.min(j), i.max(j));
        let Some(log_product) = self.window.log_rate_product(i, j) else {
            return Complex64::new(0.0, 0.0);
        };
        // B_lo / B_hi with B_hi = previous member of the (B_{hi+1}, B_hi) pair
        let b_ratio = self.b_mantissa[lo] / self.b_mantissa[hi];
        let w = b_ratio / (self.ratio[hi + 1] + self.tail[hi + 2]);
        let norm = w.norm();
        if norm == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let log_mag = norm.ln() + log_product + self.b_log_scale[lo] - self.b_log_scale[hi];
        (w / norm) * log_mag.exp()
    }
}

/// Evaluator of `f_{i,j}(s)` for a fixed model, parameter, covariate and state pair.
pub struct TransformHandle<'a> {
    window: RateWindow<'a>,
    i: usize,
    j: usize,
}

impl<'a> TransformHandle<'a> {
    pub fn i(&self) -> usize {
        self.i
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        Ok(self.window.table(s)?.f(self.i, self.j))
    }
}

pub fn transform<'a>(
    model: &'a dyn RateModel,
    theta: &'a [f64],
    z: &'a [f64],
    i: usize,
    j: usize,
    cfg: &NumericConfig,
) -> Result<TransformHandle<'a>> {
    for k in [i, j] {
        if !model.in_support(k, z) {
            return Err(out_of_support(model, k, z));
        }
    }
    Ok(TransformHandle {
        window: RateWindow::new(model, theta, z, i.max(j), cfg)?,
        i,
        j,
    })
}
