use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ops::RangeInclusive;

use crate::error::{BdpError, Result};
use crate::models::{motif_covariates, MicrosatModel};
use crate::oracle::sim::{run_path, substream};
use crate::process::{check_params, Observation, RateModel};

/// How covariates are attached to simulated observations.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum CovariateScheme {
    #[default]
    None,
    /// First half `z ~ N((1,2), σ²I)`, second half `z ~ N((2,1), σ²I)`.
    TwoGroup { variance: f64 },
}

impl CovariateScheme {
    fn draw<R: Rng + ?Sized>(&self, index: usize, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        match *self {
            CovariateScheme::None => Ok(Vec::new()),
            CovariateScheme::TwoGroup { variance } => {
                let sd = variance.sqrt();
                let means = if index < n / 2 {
                    [1.0, 2.0]
                } else {
                    [2.0, 1.0]
                };
                means
                    .iter()
                    .map(|m| {
                        Normal::new(*m, sd).map(|d| d.sample(rng)).map_err(|e| {
                            BdpError::InvalidArgument(format!("bad covariate variance: {e}"))
                        })
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub starts: RangeInclusive<usize>,
    pub times: (f64, f64),
    pub covariates: CovariateScheme,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            starts: 0..=20,
            times: (0.1, 3.0),
            covariates: CovariateScheme::None,
        }
    }
}

/// Draws `n` observations: start uniform on the start range, time uniform on the time range,
/// endpoint from an exact path simulation. Observation `i` uses RNG stream `i` of `seed`.
pub fn generate_protocol_dataset(
    model: &dyn RateModel,
    theta: &[f64],
    n: usize,
    protocol: &ProtocolConfig,
    seed: u64,
) -> Result<Vec<Observation>> {
    check_params(model, theta)?;
    let (t_lo, t_hi) = protocol.times;
    if !(t_lo > 0.0 && t_hi >= t_lo && t_hi.is_finite()) {
        return Err(BdpError::InvalidArgument(format!(
            "invalid time range ({t_lo}, {t_hi})"
        )));
    }
    if protocol.starts.is_empty() {
        return Err(BdpError::InvalidArgument("empty start range".into()));
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let a = rng.gen_range(protocol.starts.clone());
            let t = if t_hi > t_lo {
                rng.gen_range(t_lo..t_hi)
            } else {
                t_lo
            };
            let z = protocol.covariates.draw(i, n, &mut rng)?;
            if !model.in_support(a, &z) {
                return Err(BdpError::OutOfSupport {
                    state: a,
                    floor: model.state_floor(&z),
                    cap: model
                        .state_cap()
                        .map_or_else(|| "inf".into(), |c| c.to_string()),
                });
            }
            let b = run_path(model, theta, &z, a, t, &mut rng, |_, _, _| {})?;
            Ok(Observation::with_covariates(a, b, t, z))
        })
        .collect()
}

/// Synthetic chimpanzee/human repeat pairs: motif drawn uniformly from all motifs of size
/// 1 to 5, `C` from the equilibrium law, `H` simulated from `C` over `2t`.
pub fn generate_microsat_dataset(
    model: &MicrosatModel,
    theta: &[f64],
    n: usize,
    t: f64,
    seed: u64,
) -> Result<Vec<Observation>> {
    check_params(model, theta)?;
    let ratio = theta[0].exp();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let size = rng.gen_range(1..=5);
            let motif: String = (0..size)
                .map(|_| *['A', 'C', 'G', 'T'].choose(&mut rng).expect("nonempty"))
                .collect();
            let z = motif_covariates(&motif)?;
            let floor = model.x_min_for(&z);
            // geometric number of failures with success probability 1 - ratio
            let u: f64 = rng.gen();
            let extra = ((1.0 - u).ln() / ratio.ln()).floor() as usize;
            let c = floor + extra;
            let obs = MicrosatModel::pair_observation(c, c, t, z);
            let h = run_path(model, theta, &obs.z, c, obs.t, &mut rng, |_, _, _| {})?;
            Ok(Observation { b: h, ..obs })
        })
        .collect()
}
