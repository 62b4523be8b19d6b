//! Fantasized trajectories.
//!
//! A rollout alternates surrogate value sampling with policy suggestion:
//! step 0 evaluates the seeding candidate itself, later steps suggest from a
//! policy conditioned on the fantasy so far. A length-h rollout consumes
//! exactly h value draws and h-1 suggestions; batches scale linearly in d*h.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;
use crate::policy::PolicyState;
use crate::rng::substream;
use crate::space::{ParamVector, SearchSpace};

/// One fantasized (suggestion, value) pair within a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FantasyStep {
    pub x: ParamVector,
    pub y: f64,
    pub step_offset: usize,
}

/// A simulated length-h continuation seeded by one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FantasyTrajectory {
    pub seed_x: ParamVector,
    pub steps: Vec<FantasyStep>,
    /// Highest fantasized value in the trajectory (its row-rank key).
    pub y_star: f64,
    /// Smallest step offset attaining `y_star`.
    pub argmax_step: usize,
}

impl FantasyTrajectory {
    fn from_steps(seed_x: ParamVector, steps: Vec<FantasyStep>) -> Self {
        debug_assert!(!steps.is_empty());
        debug_assert_eq!(steps[0].x, seed_x);
        let mut y_star = f64::NEG_INFINITY;
        let mut argmax_step = 0;
        for step in &steps {
            if step.y > y_star {
                y_star = step.y;
                argmax_step = step.step_offset;
            }
        }
        FantasyTrajectory {
            seed_x,
            steps,
            y_star,
            argmax_step,
        }
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// The suggestion that attained `y_star`.
    pub fn max_x(&self) -> &ParamVector {
        &self.steps[self.argmax_step].x
    }

    /// The final fantasized suggestion.
    pub fn last_x(&self) -> &ParamVector {
        &self.steps[self.steps.len() - 1].x
    }
}

/// Roll the policy out for `h` steps starting from `seed_x`.
///
/// All randomness is drawn from a substream derived from `rng`, so distinct
/// callers with distinct substreams produce independent trajectories. A
/// numerical failure aborts the trajectory and retries once on a fresh
/// substream before giving up.
pub fn rollout(
    policy: &PolicyState,
    seed_x: &ParamVector,
    space: &SearchSpace,
    h: usize,
    rng: &mut impl RngCore,
) -> Result<FantasyTrajectory> {
    if h < 1 {
        return Err(Error::config("horizon", "must be >= 1"));
    }
    let base = rng.next_u64();
    match try_rollout(policy, seed_x, space, h, base, 0) {
        Err(e) if e.is_numerical() => try_rollout(policy, seed_x, space, h, base, 1),
        other => other,
    }
}

fn try_rollout(
    policy: &PolicyState,
    seed_x: &ParamVector,
    space: &SearchSpace,
    h: usize,
    base_seed: u64,
    attempt: u64,
) -> Result<FantasyTrajectory> {
    let mut traj_rng = substream(base_seed, &[0x524f_4c4c, attempt]);
    let mut state = policy.fork(traj_rng.next_u64());
    let mut steps = Vec::with_capacity(h);
    let mut x = seed_x.clone();
    for offset in 0..h {
        let gp = state
            .gp()
            .ok_or_else(|| Error::Protocol("rollout requires a fitted surrogate".into()))?;
        let y = gp.sample_y(&x, &mut traj_rng)?;
        steps.push(FantasyStep {
            x: x.clone(),
            y,
            step_offset: offset,
        });
        if offset + 1 < h {
            state = state.condition(&x, y)?;
            x = state.suggest(space);
        }
    }
    metrics::count_rollout();
    Ok(FantasyTrajectory::from_steps(seed_x.clone(), steps))
}

/// For each seed candidate, generate `d` independent trajectories of length
/// `h`. Substreams are derived per (candidate, rollout) index, so results
/// are identical no matter how many workers execute them.
pub fn rollout_batch(
    policy: &PolicyState,
    seeds: &[ParamVector],
    space: &SearchSpace,
    h: usize,
    d: usize,
    rng: &mut impl RngCore,
) -> Result<Vec<Vec<FantasyTrajectory>>> {
    if d < 1 {
        return Err(Error::config("n_rollouts", "must be >= 1"));
    }
    let master = rng.next_u64();
    let flat: Vec<(usize, usize)> = (0..seeds.len())
        .flat_map(|c| (0..d).map(move |j| (c, j)))
        .collect();
    let trajectories: Vec<FantasyTrajectory> = flat
        .par_iter()
        .map(|&(c, j)| {
            let mut sub = substream(master, &[c as u64, j as u64]);
            rollout(policy, &seeds[c], space, h, &mut sub)
        })
        .collect::<Result<_>>()?;
    let mut grouped: Vec<Vec<FantasyTrajectory>> = Vec::with_capacity(seeds.len());
    let mut iter = trajectories.into_iter();
    for _ in 0..seeds.len() {
        grouped.push(iter.by_ref().take(d).collect());
    }
    Ok(grouped)
}
