//! Rate models, transition-probability transforms and the observed-data likelihood.

pub mod model;
pub mod probability;
pub mod transform;

pub use model::{check_params, rates, Observation, RateModel};
pub use probability::{
    clamp_negative, observation_loglik, observed_loglik, transition_probability,
    transition_probability_detailed, TransitionProbability, NEGATIVE_CLAMP,
};
pub use transform::{transform, BdpFraction, RateWindow, TransformHandle, TransformTable};
