//! Generalized continued fractions `a1/(b1 + a2/(b2 + ...))` at complex arguments.
//!
//! Values are computed with the modified Lentz method. The denominators `B_k` of the
//! convergents `A_k/B_k` follow the three-term recurrence
//! `B_k = b_k B_{k-1} + a_k B_{k-2}` with `B_{-1} = 0`, `B_0 = 1`, and are carried with a
//! shared logarithmic scale so that long recurrences never overflow.

use num_complex::Complex64;

use crate::error::{BdpError, Result};

/// Floor substituted for vanishing intermediates in the Lentz recurrences.
pub const LENTZ_TINY: f64 = 1e-30;

/// Default relative per-step correction at which Lentz iteration stops.
pub const DEFAULT_LENTZ_TOL: f64 = 1e-12;

const RESCALE_ABOVE: f64 = 1e100;
const RESCALE_BELOW: f64 = 1e-100;

/// Coefficient streams of a continued fraction, indexed from 1.
///
/// Implementations must be pure: the same index always yields the same coefficient.
pub trait ContinuedFraction {
    /// Partial numerator `a_j`, `j >= 1`.
    fn numerator(&self, j: usize) -> Complex64;
    /// Partial denominator `b_j`, `j >= 1`.
    fn denominator(&self, j: usize) -> Complex64;
}

impl<C: ContinuedFraction + ?Sized> ContinuedFraction for &C {
    fn numerator(&self, j: usize) -> Complex64 {
        (**self).numerator(j)
    }
    fn denominator(&self, j: usize) -> Complex64 {
        (**self).denominator(j)
    }
}

/// A continued fraction backed by two index closures.
pub struct CfCoefficients<A, B> {
    numerators: A,
    denominators: B,
}

impl<A, B> CfCoefficients<A, B>
where
    A: Fn(usize) -> Complex64,
    B: Fn(usize) -> Complex64,
{
    pub fn new(numerators: A, denominators: B) -> Self {
        Self {
            numerators,
            denominators,
        }
    }
}

impl<A, B> ContinuedFraction for CfCoefficients<A, B>
where
    A: Fn(usize) -> Complex64,
    B: Fn(usize) -> Complex64,
{
    fn numerator(&self, j: usize) -> Complex64 {
        (self.numerators)(j)
    }
    fn denominator(&self, j: usize) -> Complex64 {
        (self.denominators)(j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LentzOutcome {
    pub value: Complex64,
    /// Index of the last coefficient pair consumed.
    pub depth: usize,
    /// Magnitude `|C_j D_j - 1|` of the final multiplicative correction.
    pub correction: f64,
}

/// Evaluates the continued fraction by the modified Lentz method.
///
/// Stops once the multiplicative correction satisfies `|C_j D_j - 1| < tol`; a zero partial
/// numerator terminates the fraction exactly.
pub fn lentz_eval<C: ContinuedFraction + ?Sized>(
    cf: &C,
    tol: f64,
    max_depth: usize,
) -> Result<LentzOutcome> {
    if !(tol > 0.0) || max_depth == 0 {
        return Err(BdpError::InvalidArgument(format!(
            "lentz_eval needs tol > 0 and max_depth >= 1 (got {tol}, {max_depth})"
        )));
    }
    let tiny = Complex64::new(LENTZ_TINY, 0.0);
    let a1 = cf.numerator(1);
    if a1 == Complex64::new(0.0, 0.0) {
        return Ok(LentzOutcome {
            value: a1,
            depth: 1,
            correction: 0.0,
        });
    }

    // Lentz runs on the tail b1 + a2/(b2 + ...); the leading a1 divides at the end.
    let mut f = cf.denominator(1);
    if f.norm() < LENTZ_TINY {
        f = tiny;
    }
    let mut c = f;
    let mut d = Complex64::new(0.0, 0.0);
    let mut correction = f64::INFINITY;
    for j in 2..=max_depth {
        let a = cf.numerator(j);
        let b = cf.denominator(j);
        d = b + a * d;
        if d.norm() < LENTZ_TINY {
            d = tiny;
        }
        c = b + a / c;
        if c.norm() < LENTZ_TINY {
            c = tiny;
        }
        d = d.inv();
        let delta = c * d;
        f *= delta;
        correction = (delta - 1.0).norm();
        if !f.is_finite() {
            return Err(BdpError::EvaluationFailure {
                re: f.re,
                im: f.im,
                reason: format!("non-finite Lentz iterate at depth {j}"),
            });
        }
        if correction < tol {
            return Ok(LentzOutcome {
                value: a1 / f,
                depth: j,
                correction,
            });
        }
    }
    Err(BdpError::NonConvergence {
        depth: max_depth,
        correction,
    })
}

/// The `depth`-th convergent `A_depth / B_depth`, evaluated bottom-up without any
/// convergence test.
pub fn evaluate_to_depth<C: ContinuedFraction + ?Sized>(cf: &C, depth: usize) -> Complex64 {
    assert!(depth >= 1, "convergents start at depth 1");
    let mut tail = cf.denominator(depth);
    for j in (1..depth).rev() {
        tail = cf.denominator(j) + cf.numerator(j + 1) / tail;
    }
    cf.numerator(1) / tail
}

/// `B_k` and `B_{k-1}`, both multiplied by `exp(-log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledConvergentPair {
    pub current: Complex64,
    pub previous: Complex64,
    pub log_scale: f64,
}

impl ScaledConvergentPair {
    /// `(B_0, B_{-1}) = (1, 0)`.
    pub fn initial() -> Self {
        Self {
            current: Complex64::new(1.0, 0.0),
            previous: Complex64::new(0.0, 0.0),
            log_scale: 0.0,
        }
    }

    /// Multiplies both stored mantissas by `factor` and compensates in `log_scale`.
    pub fn rescaled(self, factor: f64) -> Self {
        Self {
            current: self.current * factor,
            previous: self.previous * factor,
            log_scale: self.log_scale - factor.ln(),
        }
    }

    /// `B_k / B_{k-1}`, independent of the stored scale.
    pub fn ratio(&self) -> Complex64 {
        self.current / self.previous
    }

    /// Natural log of `|B_k|`.
    pub fn ln_abs_current(&self) -> f64 {
        self.current.norm().ln() + self.log_scale
    }
}

/// Forward iterator over `(B_k, B_{k-1})` for `k = 1, 2, ...`.
pub struct DenominatorRecurrence<C> {
    cf: C,
    pair: ScaledConvergentPair,
    k: usize,
}

impl<C: ContinuedFraction> DenominatorRecurrence<C> {
    pub fn new(cf: C) -> Self {
        Self {
            cf,
            pair: ScaledConvergentPair::initial(),
            k: 0,
        }
    }

    /// Continues the recurrence from a pair holding `(B_k, B_{k-1})`.
    pub fn resume(cf: C, pair: ScaledConvergentPair, k: usize) -> Self {
        Self { cf, pair, k }
    }

    pub fn index(&self) -> usize {
        self.k
    }

    pub fn pair(&self) -> ScaledConvergentPair {
        self.pair
    }

    /// Advances to `(B_{k+1}, B_k)`.
    pub fn step(&mut self) -> ScaledConvergentPair {
        let j = self.k + 1;
        let next =
            self.cf.denominator(j) * self.pair.current + self.cf.numerator(j) * self.pair.previous;
        let mut pair = ScaledConvergentPair {
            current: next,
            previous: self.pair.current,
            log_scale: self.pair.log_scale,
        };
        let magnitude = next.norm();
        if magnitude > RESCALE_ABOVE || (magnitude < RESCALE_BELOW && magnitude > 0.0) {
            pair = pair.rescaled(magnitude.recip());
        }
        self.pair = pair;
        self.k = j;
        pair
    }
}

impl<C: ContinuedFraction> Iterator for DenominatorRecurrence<C> {
    type Item = ScaledConvergentPair;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.step())
    }
}

/// `(B_k, B_{k-1})` for the given fraction.
pub fn convergent_denominator<C: ContinuedFraction>(cf: C, k: usize) -> ScaledConvergentPair {
    let mut rec = DenominatorRecurrence::new(cf);
    while rec.index() < k {
        rec.step();
    }
    rec.pair()
}
