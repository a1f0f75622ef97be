use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{BdpError, Result};
use crate::models::{
    EmModel, GlmModel, ImmigrationModel, LogisticModel, MicrosatConfig, MicrosatModel, SimpleModel,
    SisModel,
};

const NAMES: [&str; 6] = [
    "simple",
    "immigration",
    "logistic",
    "sis",
    "glm",
    "microsat",
];

pub fn model_names() -> &'static [&'static str] {
    &NAMES
}

/// Construction options; each applies only to the models that use it.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOptions {
    /// SIS population size (default 100).
    pub population: Option<usize>,
    /// GLM covariate count (default 2).
    pub covariates: Option<usize>,
    /// Microsatellite floor applied to every motif class.
    pub x_min: Option<usize>,
}

/// A model name with options, written `name` or `name:key=value,key=value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default)]
    pub options: ModelOptions,
}

impl ModelSpec {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            options: ModelOptions::default(),
        }
    }

    pub fn build(&self) -> Result<Box<dyn EmModel>> {
        build_model(&self.name, &self.options)
    }
}

impl FromStr for ModelSpec {
    type Err = BdpError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = match s.split_once(':') {
            Some((n, r)) => (n.trim(), Some(r)),
            None => (s.trim(), None),
        };
        if !NAMES.contains(&name) {
            return Err(BdpError::InvalidArgument(format!(
                "unknown model `{name}` (expected one of {})",
                NAMES.join(", ")
            )));
        }
        let mut options = ModelOptions::default();
        for pair in rest.into_iter().flat_map(|r| r.split(',')) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| BdpError::Parse(format!("expected key=value, got `{pair}`")))?;
            let value: usize = value.trim().parse().map_err(|_| {
                BdpError::Parse(format!(
                    "option `{}` needs a nonnegative integer",
                    key.trim()
                ))
            })?;
            let slot = match key.trim() {
                "population" => &mut options.population,
                "covariates" => &mut options.covariates,
                "x_min" => &mut options.x_min,
                other => return Err(BdpError::Parse(format!("unknown model option `{other}`"))),
            };
            *slot = Some(value);
        }
        Ok(Self {
            name: name.to_string(),
            options,
        })
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        let opts: Vec<String> = [
            ("population", self.options.population),
            ("covariates", self.options.covariates),
            ("x_min", self.options.x_min),
        ]
        .iter()
        .filter_map(|(k, v)| v.map(|v| format!("{k}={v}")))
        .collect();
        if !opts.is_empty() {
            write!(f, ":{}", opts.join(","))?;
        }
        Ok(())
    }
}

pub fn build_model(name: &str, options: &ModelOptions) -> Result<Box<dyn EmModel>> {
    let reject = |key: &str| {
        Err(BdpError::InvalidArgument(format!(
            "option `{key}` does not apply to model `{name}`"
        )))
    };
    if options.population.is_some() && name != "sis" {
        return reject("population");
    }
    if options.covariates.is_some() && name != "glm" {
        return reject("covariates");
    }
    if options.x_min.is_some() && name != "microsat" {
        return reject("x_min");
    }
    Ok(match name {
        "simple" => Box::new(SimpleModel),
        "immigration" => Box::new(ImmigrationModel),
        "logistic" => Box::new(LogisticModel),
        "sis" => Box::new(SisModel::new(options.population.unwrap_or(100))?),
        "glm" => Box::new(GlmModel::new(options.covariates.unwrap_or(2))?),
        "microsat" => Box::new(MicrosatModel::new(
            options
                .x_min
                .map_or_else(MicrosatConfig::default, MicrosatConfig::uniform),
        )?),
        other => {
            return Err(BdpError::InvalidArgument(format!(
                "unknown model `{other}` (expected one of {})",
                NAMES.join(", ")
            )))
        }
    })
}
