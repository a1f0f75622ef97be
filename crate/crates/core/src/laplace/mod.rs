//! Continued fractions and numerical Laplace inversion.

pub mod cf;
pub mod inversion;

pub use cf::{
    convergent_denominator, evaluate_to_depth, lentz_eval, CfCoefficients, ContinuedFraction,
    DenominatorRecurrence, LentzOutcome, ScaledConvergentPair, DEFAULT_LENTZ_TOL, LENTZ_TINY,
};
pub use inversion::{
    euler_sum, invert_laplace, invert_laplace_batch, invert_laplace_batch_relative, Inversion,
    InversionConfig, DISCRETIZATION_REL_TOL, MAX_DISCRETIZATION, MAX_EULER_TERMS,
    MIN_DISCRETIZATION,
};
