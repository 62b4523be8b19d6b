//! Seed-set construction and rollout-aware refinement.
//!
//! The seed set holds n stochastic policy suggestions. Ranking one rollout
//! per seed by its best fantasized value (row rank) yields the top-k
//! trajectories, from which the three refinement criteria extract the
//! seeding candidate (First.k), the step that attained the best fantasy
//! (Max.k), or the final suggestion (Last.k).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::PolicyState;
use crate::rollout::FantasyTrajectory;
use crate::space::{ParamVector, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Seed,
    FirstK,
    MaxK,
    LastK,
}

/// A set of candidate points, possibly refined from a seed set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<ParamVector>,
    pub provenance: Provenance,
    /// Row rank of the originating trajectory for refined sets; empty for
    /// seed sets.
    pub source_ranks: Vec<usize>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Rollouts sorted descending by their best fantasized value, ties keeping
/// the original candidate order.
#[derive(Debug, Clone)]
pub struct RankedRollouts {
    pub trajectories: Vec<FantasyTrajectory>,
    /// `original_indices[rank]` is the seed index that produced the
    /// trajectory at that rank.
    pub original_indices: Vec<usize>,
}

/// Draw n suggestions from the prior policy. Duplicates are permitted; the
/// policy is stochastic by construction.
pub fn generate_seed_set(
    policy: &mut PolicyState,
    space: &SearchSpace,
    n: usize,
) -> Result<CandidateSet> {
    if n < 1 {
        return Err(Error::config("n_seed", "must be >= 1"));
    }
    let candidates = (0..n).map(|_| policy.suggest(space)).collect();
    Ok(CandidateSet {
        candidates,
        provenance: Provenance::Seed,
        source_ranks: Vec::new(),
    })
}

/// Stable descending sort by `y_star`.
pub fn rank_rollouts(trajectories: Vec<FantasyTrajectory>) -> RankedRollouts {
    let mut order: Vec<usize> = (0..trajectories.len()).collect();
    order.sort_by(|&a, &b| {
        trajectories[b]
            .y_star
            .partial_cmp(&trajectories[a].y_star)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut sorted = Vec::with_capacity(trajectories.len());
    let mut slots: Vec<Option<FantasyTrajectory>> = trajectories.into_iter().map(Some).collect();
    for &idx in &order {
        sorted.push(slots[idx].take().expect("each index taken once"));
    }
    RankedRollouts {
        trajectories: sorted,
        original_indices: order,
    }
}

fn check_k(k: usize, available: usize) -> Result<()> {
    if k < 1 || k > available {
        return Err(Error::config(
            "k_refine",
            format!("must satisfy 1 <= k <= {available}, got {k}"),
        ));
    }
    Ok(())
}

/// First.k: the seed candidates whose rollouts hold the top-k row ranks.
pub fn refine_first_k(
    ranked: &RankedRollouts,
    seeds: &CandidateSet,
    k: usize,
) -> Result<CandidateSet> {
    if ranked.trajectories.len() != seeds.len() {
        return Err(Error::Protocol(format!(
            "{} trajectories for {} seeds; refinement needs one rollout per seed",
            ranked.trajectories.len(),
            seeds.len()
        )));
    }
    check_k(k, seeds.len())?;
    let candidates = ranked.original_indices[..k]
        .iter()
        .map(|&i| seeds.candidates[i].clone())
        .collect();
    Ok(CandidateSet {
        candidates,
        provenance: Provenance::FirstK,
        source_ranks: (0..k).collect(),
    })
}

/// Max.k: within each top-k trajectory, the suggestion that attained the
/// trajectory's best fantasized value.
pub fn refine_max_k(ranked: &RankedRollouts, k: usize) -> Result<CandidateSet> {
    check_k(k, ranked.trajectories.len())?;
    let candidates = ranked.trajectories[..k]
        .iter()
        .map(|t| t.max_x().clone())
        .collect();
    Ok(CandidateSet {
        candidates,
        provenance: Provenance::MaxK,
        source_ranks: (0..k).collect(),
    })
}

/// Last.k: the final suggestion of each top-k trajectory.
pub fn refine_last_k(ranked: &RankedRollouts, k: usize) -> Result<CandidateSet> {
    check_k(k, ranked.trajectories.len())?;
    let candidates = ranked.trajectories[..k]
        .iter()
        .map(|t| t.last_x().clone())
        .collect();
    Ok(CandidateSet {
        candidates,
        provenance: Provenance::LastK,
        source_ranks: (0..k).collect(),
    })
}
