//! TOML run configuration. Command-line flags override these values, which override defaults.

use std::path::{Path, PathBuf};

use bdp_core::em::{EMConfig, SeMethod};
use bdp_core::NumericConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Model name, optionally with options as in `sis:population=50`.
    pub model: Option<String>,
    pub population: Option<usize>,
    pub covariates: Option<usize>,
    pub x_min: Option<usize>,
    pub params: Option<Vec<f64>>,
    pub init: Option<Vec<f64>>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub se: Option<SeMethod>,
    /// EM settings; `numeric` inside also drives `prob`, `estep` and `loglik`.
    pub em: Option<EMConfig>,
    pub simulate: Option<SimulateConfig>,
    pub estep: Option<EstepConfig>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub n: Option<usize>,
    pub start_min: Option<usize>,
    pub start_max: Option<usize>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub covariate_variance: Option<f64>,
    pub pair_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstepConfig {
    pub method: Option<String>,
    pub paths: Option<usize>,
    pub quad_tol: Option<f64>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(em) = &self.em {
            em.validate()
                .map_err(|e| CliError::Usage(format!("config [em]: {e}")))?;
        }
        if self.threads == Some(0) {
            return Err(CliError::Usage("config: threads must be at least 1".into()));
        }
        for (name, list) in [("params", &self.params), ("init", &self.init)] {
            if list
                .as_ref()
                .is_some_and(|v| v.iter().any(|x| !x.is_finite()))
            {
                return Err(CliError::Usage(format!("config: `{name}` must be finite")));
            }
        }
        Ok(())
    }

    pub fn em(&self) -> EMConfig {
        self.em.unwrap_or_default()
    }

    pub fn numeric(&self) -> NumericConfig {
        self.em().numeric
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nested_sections() {
        let cfg = RunConfig::from_toml_str(
            r#"
            model = "sis:population=50"
            params = [0.5, 0.3]
            seed = 7
            se = "both"
            [em]
            max_iter = 20
            accelerate = true
            [em.numeric]
            window_threshold = 1e-9
            [simulate]
            n = 10
            "#,
        )
        .unwrap();
        assert_eq!(cfg.em().max_iter, 20);
        assert!(cfg.em().accelerate);
        assert_eq!(cfg.numeric().window_threshold, 1e-9);
        assert_eq!(cfg.em().param_tol, 1e-6);
        assert_eq!(cfg.se, Some(SeMethod::Both));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml_str("modle = \"simple\"").is_err());
        assert!(RunConfig::from_toml_str("[em]\nmax_iters = 3").is_err());
        assert!(RunConfig::from_toml_str("[em.numeric]\nthreshold = 3").is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::from_toml_str("[em]\nparam_tol = -1.0").is_err());
        assert!(RunConfig::from_toml_str("threads = 0").is_err());
        assert!(RunConfig::from_toml_str("se = \"fisher\"").is_err());
    }
}
