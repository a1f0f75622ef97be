//! Transition probabilities of a truncated chain by uniformization:
//! `P(t) = Σ_n Pois(n; Λt) K^n` with `K = I + Q/Λ`.

use crate::error::{BdpError, Result};
use crate::process::{rates, RateModel};

/// Poisson tail mass left out of the series.
pub const POISSON_TAIL: f64 = 1e-12;
/// Probability allowed on the truncation boundary before the cap is declared too small.
pub const BOUNDARY_MASS: f64 = 1e-8;
/// Default truncation margin above the larger endpoint for unbounded models.
pub const DEFAULT_MARGIN: usize = 60;

/// The uniformized kernel of the chain restricted to `[lo, hi]`, with births at `hi` removed.
#[derive(Debug, Clone)]
pub struct Uniformized {
    lo: usize,
    hi: usize,
    birth: Vec<f64>,
    death: Vec<f64>,
    rate: f64,
}

impl Uniformized {
    pub fn new(model: &dyn RateModel, theta: &[f64], z: &[f64], hi: usize) -> Result<Self> {
        let lo = model.state_floor(z);
        if hi < lo {
            return Err(BdpError::InvalidArgument(format!(
                "cap {hi} below floor {lo}"
            )));
        }
        let mut birth = Vec::with_capacity(hi - lo + 1);
        let mut death = Vec::with_capacity(hi - lo + 1);
        for k in lo..=hi {
            let (l, m) = rates(model, theta, z, k)?;
            birth.push(if k == hi { 0.0 } else { l });
            death.push(if k == lo { 0.0 } else { m });
        }
        let rate = birth
            .iter()
            .zip(&death)
            .map(|(l, m)| l + m)
            .fold(0.0, f64::max);
        Ok(Self {
            lo,
            hi,
            birth,
            death,
            rate,
        })
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    pub fn hi(&self) -> usize {
        self.hi
    }

    fn poisson_weights(&self, t: f64) -> Vec<f64> {
        let mean = self.rate * t;
        if mean == 0.0 {
            return vec![1.0];
        }
        let ln_mean = mean.ln();
        let limit = (mean + 40.0 * mean.sqrt() + 100.0) as usize;
        let mut weights = Vec::new();
        let mut ln_factorial = 0.0;
        let mut cumulative = 0.0;
        for n in 0..=limit {
            if n > 0 {
                ln_factorial += (n as f64).ln();
            }
            let w = (-mean + n as f64 * ln_mean - ln_factorial).exp();
            weights.push(w);
            cumulative += w;
            if n as f64 > mean && 1.0 - cumulative < POISSON_TAIL {
                break;
            }
        }
        weights
    }

    fn forward(&self, v: &[f64], out: &mut [f64]) {
        let n = v.len();
        for j in 0..n {
            let mut x = v[j] * (1.0 - (self.birth[j] + self.death[j]) / self.rate);
            if j > 0 {
                x += v[j - 1] * self.birth[j - 1] / self.rate;
            }
            if j + 1 < n {
                x += v[j + 1] * self.death[j + 1] / self.rate;
            }
            out[j] = x;
        }
    }

    fn backward(&self, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        for i in 0..n {
            let mut x = u[i] * (1.0 - (self.birth[i] + self.death[i]) / self.rate);
            if i + 1 < n {
                x += self.birth[i] / self.rate * u[i + 1];
            }
            if i > 0 {
                x += self.death[i] / self.rate * u[i - 1];
            }
            out[i] = x;
        }
    }

    fn series(
        &self,
        start: Vec<f64>,
        t: f64,
        step: impl Fn(&Self, &[f64], &mut [f64]),
    ) -> Vec<f64> {
        if t == 0.0 || self.rate == 0.0 {
            return start;
        }
        let weights = self.poisson_weights(t);
        let mut v = start;
        let mut next = vec![0.0; v.len()];
        let mut acc = vec![0.0; v.len()];
        for w in weights {
            for (a, x) in acc.iter_mut().zip(&v) {
                *a += w * x;
            }
            step(self, &v, &mut next);
            std::mem::swap(&mut v, &mut next);
        }
        acc
    }

    fn index(&self, k: usize) -> Result<usize> {
        if k < self.lo || k > self.hi {
            return Err(BdpError::OutOfSupport {
                state: k,
                floor: self.lo,
                cap: self.hi.to_string(),
            });
        }
        Ok(k - self.lo)
    }

    /// `P_{a,·}(t)` over `lo..=hi`.
    pub fn row(&self, a: usize, t: f64) -> Result<Vec<f64>> {
        let mut start = vec![0.0; self.hi - self.lo + 1];
        start[self.index(a)?] = 1.0;
        Ok(self.series(start, t, Self::forward))
    }

    /// `P_{·,b}(t)` over `lo..=hi`.
    pub fn column(&self, b: usize, t: f64) -> Result<Vec<f64>> {
        let mut start = vec![0.0; self.hi - self.lo + 1];
        start[self.index(b)?] = 1.0;
        Ok(self.series(start, t, Self::backward))
    }

    /// Errors if the row from `a` puts more than [`BOUNDARY_MASS`] on the truncation edge.
    pub fn check_boundary(&self, a: usize, t: f64, model_cap: Option<usize>) -> Result<()> {
        if model_cap == Some(self.hi) {
            return Ok(());
        }
        let row = self.row(a, t)?;
        let mass = *row.last().unwrap_or(&0.0);
        if mass > BOUNDARY_MASS {
            return Err(BdpError::CapTooSmall { cap: self.hi, mass });
        }
        Ok(())
    }
}

/// Default truncation for endpoints `a`, `b`.
pub fn default_cap(model: &dyn RateModel, a: usize, b: usize) -> usize {
    model
        .state_cap()
        .unwrap_or_else(|| a.max(b) + DEFAULT_MARGIN)
}

/// Builds a truncated kernel, doubling the margin above `max(a,b)` until the boundary mass
/// of the rows from `a` at times `t/2` and `t` is negligible.
pub fn auto_truncation(
    model: &dyn RateModel,
    theta: &[f64],
    z: &[f64],
    a: usize,
    b: usize,
    t: f64,
) -> Result<Uniformized> {
    let top = a.max(b);
    let mut margin = DEFAULT_MARGIN;
    loop {
        let cap = model
            .state_cap()
            .map_or(top + margin, |c| c.min(top + margin));
        let kernel = Uniformized::new(model, theta, z, cap)?;
        let fits = kernel
            .check_boundary(a, t, model.state_cap())
            .and_then(|_| kernel.check_boundary(a, 0.5 * t, model.state_cap()));
        match fits {
            Ok(()) => return Ok(kernel),
            Err(BdpError::CapTooSmall { .. }) if margin < 1 << 16 => margin *= 2,
            Err(e) => return Err(e),
        }
    }
}

/// `P_{a,b}(t)` of the chain truncated at `cap` (default per [`default_cap`], doubled as
/// needed when not given).
pub fn uniformization_tp(
    model: &dyn RateModel,
    theta: &[f64],
    z: &[f64],
    a: usize,
    b: usize,
    t: f64,
    cap: Option<usize>,
) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(BdpError::InvalidArgument(format!("invalid time {t}")));
    }
    let kernel = match cap {
        Some(c) => {
            let k = Uniformized::new(model, theta, z, c)?;
            k.check_boundary(a, t, model.state_cap())?;
            k
        }
        None => auto_truncation(model, theta, z, a, b, t)?,
    };
    let row = kernel.row(a, t)?;
    Ok(row[kernel.index(b)?])
}
