use thiserror::Error;

pub type Result<T, E = BdpError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BdpError {
    #[error("continued fraction did not converge within {depth} terms (last correction {correction:.3e})")]
    NonConvergence { depth: usize, correction: f64 },

    #[error("transform evaluation failed at s = {re}+{im}i: {reason}")]
    EvaluationFailure { re: f64, im: f64, reason: String },

    #[error("state {state} is outside the support [{floor}, {cap}]")]
    OutOfSupport {
        state: usize,
        floor: usize,
        cap: String,
    },

    #[error("log-likelihood undefined: P({a} -> {b}; t = {t}) = {p:e}")]
    DomainError { a: usize, b: usize, t: f64, p: f64 },

    #[error("negative value {value:e} exceeds the clamping tolerance")]
    NegativeValue { value: f64 },

    #[error("transition probability P({a} -> {b}; t = {t}) is too small to resolve")]
    ZeroDenominator { a: usize, b: usize, t: f64 },

    #[error("degenerate denominator in {what}")]
    DegenerateDenominator { what: &'static str },

    #[error("singular or ill-conditioned Hessian")]
    SingularHessian,

    #[error("infeasible parameter vector {0:?}")]
    Infeasible(Vec<f64>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("estimate is not an EM fixed point (relative map displacement {0:.3e})")]
    NotAtFixedPoint(f64),

    #[error("truncation cap {cap} too small: boundary mass {mass:e}")]
    CapTooSmall { cap: usize, mass: f64 },

    #[error("rejection sampler acceptance rate {rate:e} below the feasibility floor")]
    AcceptanceTooLow { rate: f64 },

    #[error("adaptive quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("{0}")]
    Parse(String),
}

impl BdpError {
    /// Numerical failures as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            BdpError::NonConvergence { .. }
                | BdpError::EvaluationFailure { .. }
                | BdpError::DomainError { .. }
                | BdpError::NegativeValue { .. }
                | BdpError::ZeroDenominator { .. }
                | BdpError::DegenerateDenominator { .. }
                | BdpError::SingularHessian
                | BdpError::NotAtFixedPoint(_)
                | BdpError::CapTooSmall { .. }
                | BdpError::AcceptanceTooLow { .. }
                | BdpError::QuadratureFailure(_)
        )
    }
}
