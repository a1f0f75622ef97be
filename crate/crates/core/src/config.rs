use serde::{Deserialize, Serialize};

use crate::error::{BdpError, Result};
use crate::laplace::{InversionConfig, DEFAULT_LENTZ_TOL};

/// Numerical settings shared by transition probabilities and E-steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericConfig {
    pub inversion: InversionConfig,
    pub lentz_tol: f64,
    /// `None` selects `10 * (largest state in play) + 1000`.
    pub lentz_max_depth: Option<usize>,
    /// Magnitude below which E-step terms are dropped from the window.
    pub window_threshold: f64,
    pub window_margin: usize,
}

impl Default for NumericConfig {
    fn default() -> Self {
        Self {
            inversion: InversionConfig::default(),
            lentz_tol: DEFAULT_LENTZ_TOL,
            lentz_max_depth: None,
            window_threshold: 1e-8,
            window_margin: 10,
        }
    }
}

impl NumericConfig {
    pub fn validate(&self) -> Result<()> {
        self.inversion.validate()?;
        if !(self.lentz_tol > 0.0) {
            return Err(BdpError::InvalidArgument(
                "lentz_tol must be positive".into(),
            ));
        }
        if self.lentz_max_depth == Some(0) {
            return Err(BdpError::InvalidArgument(
                "lentz_max_depth must be >= 1".into(),
            ));
        }
        if !(self.window_threshold > 0.0) {
            return Err(BdpError::InvalidArgument(
                "window_threshold must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn max_depth_for(&self, max_state: usize) -> usize {
        self.lentz_max_depth
            .unwrap_or_else(|| 10 * max_state + 1000)
    }
}
