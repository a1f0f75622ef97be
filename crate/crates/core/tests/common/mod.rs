#![allow(dead_code)]

use bdp_core::models::{ImmigrationModel, LogisticModel, SimpleModel, SisModel};
use bdp_core::process::{Observation, RateModel};

type RateFn = Box<dyn Fn(usize) -> f64 + Send + Sync>;

/// A rate model given by closures of the state alone.
pub struct FnModel {
    pub birth: RateFn,
    pub death: RateFn,
    pub cap: Option<usize>,
}

impl FnModel {
    pub fn new(
        birth: impl Fn(usize) -> f64 + Send + Sync + 'static,
        death: impl Fn(usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            birth: Box::new(birth),
            death: Box::new(death),
            cap: None,
        }
    }

    pub fn pure_death(mu: f64) -> Self {
        Self::new(|_| 0.0, move |k| k as f64 * mu)
    }
}

impl RateModel for FnModel {
    fn name(&self) -> &str {
        "fn"
    }

    fn param_names(&self) -> Vec<String> {
        Vec::new()
    }

    fn birth_rate(&self, k: usize, _theta: &[f64], _z: &[f64]) -> f64 {
        if self.cap == Some(k) {
            0.0
        } else {
            (self.birth)(k)
        }
    }

    fn death_rate(&self, k: usize, _theta: &[f64], _z: &[f64]) -> f64 {
        if k == 0 {
            0.0
        } else {
            (self.death)(k)
        }
    }

    fn state_cap(&self) -> Option<usize> {
        self.cap
    }

    fn is_feasible(&self, theta: &[f64]) -> bool {
        theta.is_empty()
    }
}

/// One model with the parameters and observation used for E-step timings.
pub struct Case {
    pub label: &'static str,
    pub model: Box<dyn bdp_core::models::EmModel>,
    pub theta: Vec<f64>,
    pub obs: Observation,
}

/// The four reference configurations: simple linear, immigration, logistic and SIS.
pub fn reference_cases() -> Vec<Case> {
    vec![
        Case {
            label: "simple",
            model: Box::new(SimpleModel),
            theta: vec![0.5, 0.3],
            obs: Observation::new(19, 27, 2.0),
        },
        Case {
            label: "immigration",
            model: Box::new(ImmigrationModel),
            theta: vec![0.5, 0.2, 0.3],
            obs: Observation::new(19, 27, 2.0),
        },
        Case {
            label: "logistic",
            model: Box::new(LogisticModel),
            theta: vec![0.5, 0.2, 0.3],
            obs: Observation::new(10, 16, 2.0),
        },
        Case {
            label: "sis",
            model: Box::new(SisModel::new(100).unwrap()),
            theta: vec![0.5, 0.3],
            obs: Observation::new(10, 31, 2.0),
        },
    ]
}

pub fn rel_err(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs().max(f64::MIN_POSITIVE)
}
