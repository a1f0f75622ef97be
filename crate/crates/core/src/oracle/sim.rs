use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{BdpError, Result};
use crate::process::{rates, RateModel};

/// A realized trajectory on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    /// Visited states; `states[i + 1]` is entered at `jump_times[i]`.
    pub states: Vec<usize>,
    pub jump_times: Vec<f64>,
    pub horizon: f64,
}

/// Pathwise up-steps, down-steps and holding times per state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathStatistics {
    pub up: BTreeMap<usize, f64>,
    pub down: BTreeMap<usize, f64>,
    pub time: BTreeMap<usize, f64>,
}

impl PathStatistics {
    pub fn total_up(&self) -> f64 {
        self.up.values().sum()
    }

    pub fn total_down(&self) -> f64 {
        self.down.values().sum()
    }

    pub fn particle_time(&self) -> f64 {
        self.time.iter().map(|(k, t)| *k as f64 * t).sum()
    }

    pub fn total_time(&self) -> f64 {
        self.time.values().sum()
    }
}

impl Path {
    pub fn initial_state(&self) -> usize {
        self.states[0]
    }

    pub fn final_state(&self) -> usize {
        *self.states.last().expect("paths are never empty")
    }

    pub fn statistics(&self) -> PathStatistics {
        let mut stats = PathStatistics::default();
        let mut last = 0.0;
        for (i, &k) in self.states.iter().enumerate() {
            let leave = self.jump_times.get(i).copied().unwrap_or(self.horizon);
            *stats.time.entry(k).or_insert(0.0) += leave - last;
            last = leave;
            if let Some(&next) = self.states.get(i + 1) {
                let map = if next > k {
                    &mut stats.up
                } else {
                    &mut stats.down
                };
                *map.entry(k).or_insert(0.0) += 1.0;
            }
        }
        stats
    }
}

/// A ChaCha8 stream for replicate `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Simulates by competing exponential clocks, visiting each jump through `on_jump(from, to, time)`.
/// Returns the state at the horizon.
pub(crate) fn run_path<R: Rng + ?Sized>(
    model: &dyn RateModel,
    theta: &[f64],
    z: &[f64],
    x0: usize,
    horizon: f64,
    rng: &mut R,
    mut on_jump: impl FnMut(usize, usize, f64),
) -> Result<usize> {
    let mut state = x0;
    let mut now = 0.0;
    loop {
        let (birth, death) = rates(model, theta, z, state)?;
        let total = birth + death;
        if !(total > 0.0) {
            return Ok(state);
        }
        let hold = Exp::new(total)
            .map_err(|e| BdpError::InvalidArgument(format!("bad total rate {total}: {e}")))?
            .sample(rng);
        now += hold;
        if now >= horizon {
            return Ok(state);
        }
        let next = if rng.gen::<f64>() * total < birth {
            state + 1
        } else {
            state - 1
        };
        on_jump(state, next, now);
        state = next;
    }
}

pub fn simulate_path<R: Rng + ?Sized>(
    model: &dyn RateModel,
    theta: &[f64],
    z: &[f64],
    x0: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<Path> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(BdpError::InvalidArgument(format!(
            "invalid horizon {horizon}"
        )));
    }
    let mut states = vec![x0];
    let mut jump_times = Vec::new();
    run_path(model, theta, z, x0, horizon, rng, |_, to, time| {
        states.push(to);
        jump_times.push(time);
    })?;
    Ok(Path {
        states,
        jump_times,
        horizon,
    })
}
