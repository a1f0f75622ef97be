use rayon::prelude::*;

use crate::error::{BdpError, Result};
use crate::estep::{ExpectationSet, TruncationWindow};
use crate::oracle::sim::{run_path, substream};
use crate::process::{check_params, Observation, RateModel};

/// Paths simulated before committing, to estimate the acceptance rate.
pub const PROBE_PATHS: usize = 10_000;
/// Smallest acceptance rate the sampler proceeds with.
pub const MIN_ACCEPTANCE: f64 = 1e-5;
const BATCH: usize = 4096;

/// Monte-Carlo E-step with standard errors of the aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectionEstimate {
    pub set: ExpectationSet,
    pub se_up: f64,
    pub se_down: f64,
    pub se_particle_time: f64,
    pub accepted: usize,
    pub attempts: usize,
}

impl RejectionEstimate {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.attempts as f64
    }
}

/// Per-path sufficient statistics, kept only for accepted paths.
struct Accepted {
    /// `(state, up, down, time)` for each visited state.
    per_state: Vec<(usize, f64, f64, f64)>,
}

fn simulate_one(
    model: &dyn RateModel,
    theta: &[f64],
    obs: &Observation,
    seed: u64,
    index: u64,
) -> Result<Option<Accepted>> {
    let mut rng = substream(seed, index);
    let mut per_state: Vec<(usize, f64, f64, f64)> = Vec::new();
    let mut last = 0.0;
    let mut bump =
        |k: usize, du: f64, dd: f64, dt: f64| match per_state.iter_mut().find(|e| e.0 == k) {
            Some(e) => {
                e.1 += du;
                e.2 += dd;
                e.3 += dt;
            }
            None => per_state.push((k, du, dd, dt)),
        };
    let end = run_path(
        model,
        theta,
        &obs.z,
        obs.a,
        obs.t,
        &mut rng,
        |from, to, time| {
            let up = (to > from) as u8 as f64;
            bump(from, up, 1.0 - up, time - last);
            last = time;
        },
    )?;
    if end != obs.b {
        return Ok(None);
    }
    bump(end, 0.0, 0.0, obs.t - last);
    Ok(Some(Accepted { per_state }))
}

/// Simulates unconditioned paths from `a` and averages pathwise statistics over those ending
/// in `b`, until `n_accepted` acceptances. Replicate `i` uses stream `i` of `seed`, and the
/// first `n_accepted` acceptances in replicate order are kept, so results do not depend on
/// the thread count.
pub fn rejection_estep(
    model: &dyn RateModel,
    theta: &[f64],
    obs: &Observation,
    n_accepted: usize,
    seed: u64,
) -> Result<RejectionEstimate> {
    check_params(model, theta)?;
    obs.validate(model)?;
    if n_accepted < 2 {
        return Err(BdpError::InvalidArgument(
            "need at least two accepted paths".into(),
        ));
    }
    let mut kept: Vec<Accepted> = Vec::with_capacity(n_accepted);
    let mut attempts = 0usize;
    while kept.len() < n_accepted {
        let start = attempts;
        let batch = if attempts == 0 {
            PROBE_PATHS
        } else {
            BATCH.max(n_accepted - kept.len())
        };
        let results = (start..start + batch)
            .into_par_iter()
            .map(|i| simulate_one(model, theta, obs, seed, i as u64))
            .collect::<Result<Vec<_>>>()?;
        for (offset, r) in results.into_iter().enumerate() {
            if kept.len() == n_accepted {
                break;
            }
            attempts = start + offset + 1;
            if let Some(a) = r {
                kept.push(a);
            }
        }
        if start == 0 {
            let rate = kept.len() as f64 / attempts as f64;
            if rate < MIN_ACCEPTANCE {
                return Err(BdpError::AcceptanceTooLow { rate });
            }
        }
    }

    let k_min = kept
        .iter()
        .flat_map(|a| a.per_state.iter().map(|e| e.0))
        .min()
        .unwrap_or(obs.a);
    let k_max = kept
        .iter()
        .flat_map(|a| a.per_state.iter().map(|e| e.0))
        .max()
        .unwrap_or(obs.a);
    let width = k_max - k_min + 1;
    let n = kept.len() as f64;
    let (mut eu, mut ed, mut et) = (vec![0.0; width], vec![0.0; width], vec![0.0; width]);
    let mut sums = [[0.0f64; 2]; 3];
    for a in &kept {
        let mut totals = [0.0; 3];
        for &(k, u, d, t) in &a.per_state {
            eu[k - k_min] += u;
            ed[k - k_min] += d;
            et[k - k_min] += t;
            totals[0] += u;
            totals[1] += d;
            totals[2] += k as f64 * t;
        }
        for (s, x) in sums.iter_mut().zip(totals) {
            s[0] += x;
            s[1] += x * x;
        }
    }
    for v in eu.iter_mut().chain(ed.iter_mut()).chain(et.iter_mut()) {
        *v /= n;
    }
    let se = |s: [f64; 2]| {
        let mean = s[0] / n;
        ((s[1] / n - mean * mean).max(0.0) * n / (n - 1.0) / n).sqrt()
    };
    let window = TruncationWindow {
        k_min,
        k_max,
        threshold: 0.0,
        hard_margin: 0,
    };
    let total_up = eu.iter().sum();
    let total_down = ed.iter().sum();
    let particle_time = (k_min..).zip(&et).map(|(k, v)| k as f64 * v).sum();
    Ok(RejectionEstimate {
        set: ExpectationSet {
            window,
            eu,
            ed,
            et,
            denom: n / attempts as f64,
            total_up,
            total_down,
            particle_time,
            total_time: obs.t,
            widenings: 0,
        },
        se_up: se(sums[0]),
        se_down: se(sums[1]),
        se_particle_time: se(sums[2]),
        accepted: kept.len(),
        attempts,
    })
}
