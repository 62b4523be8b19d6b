//! Candidate scoring: expected improvement, UCB, and the planning
//! acquisition.
//!
//! The planning score for a candidate sums, over horizon steps, the
//! rollout-averaged expected improvement of each step's suggestion under the
//! posterior fantasized on that rollout's prefix. The step-0 term needs no
//! sampling: it is the closed-form EI of the candidate under the real
//! posterior. The incumbent stays at the real best-so-far throughout unless
//! the fantasized-incumbent mode is switched on.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candgen::CandidateSet;
use crate::error::{Error, Result};
use crate::history::PredictiveDistribution;
use crate::policy::{argmax_first, PolicyState};
use crate::rollout::rollout_batch;
use crate::space::SearchSpace;
use crate::surrogate::GpPosterior;

/// Score attached to one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionScore {
    pub candidate_index: usize,
    pub score: f64,
    /// Per-horizon-step terms for the planning acquisition; the score is
    /// their sum.
    pub per_step_terms: Option<Vec<f64>>,
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Closed-form Gaussian expected improvement over the incumbent.
///
/// Degenerate cases: zero variance reduces to max(mean - incumbent, 0); the
/// empty-history sentinel (incumbent = -inf) shares an infinite constant
/// shift across all candidates, so candidates are ranked by mean alone.
pub fn ei(dist: &PredictiveDistribution, incumbent: f64) -> f64 {
    if incumbent == f64::NEG_INFINITY {
        return dist.mean;
    }
    let sigma = dist.variance.max(0.0).sqrt();
    if sigma == 0.0 {
        return (dist.mean - incumbent).max(0.0);
    }
    let z = (dist.mean - incumbent) / sigma;
    (sigma * (z * normal_cdf(z) + normal_pdf(z))).max(0.0)
}

/// Upper confidence bound: mean + sqrt(beta) * std.
pub fn ucb(dist: &PredictiveDistribution, beta: f64) -> f64 {
    dist.mean + beta.sqrt() * dist.variance.max(0.0).sqrt()
}

fn check_non_empty(candidates: &CandidateSet) -> Result<()> {
    if candidates.is_empty() {
        return Err(Error::Protocol("cannot score an empty candidate set".into()));
    }
    Ok(())
}

fn pick(scores: Vec<AcquisitionScore>) -> (usize, Vec<AcquisitionScore>) {
    let raw: Vec<f64> = scores.iter().map(|s| s.score).collect();
    (argmax_first(&raw), scores)
}

/// Score every candidate with closed-form EI and return the argmax index
/// (ties break to the lowest candidate index).
pub fn evaluate_ei(
    candidates: &CandidateSet,
    gp: &GpPosterior,
    incumbent: f64,
) -> Result<(usize, Vec<AcquisitionScore>)> {
    check_non_empty(candidates)?;
    let scores = candidates
        .candidates
        .iter()
        .enumerate()
        .map(|(i, x)| {
            Ok(AcquisitionScore {
                candidate_index: i,
                score: ei(&gp.predict(x)?, incumbent),
                per_step_terms: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pick(scores))
}

/// Score every candidate with UCB and return the argmax index.
pub fn evaluate_ucb(
    candidates: &CandidateSet,
    gp: &GpPosterior,
    beta: f64,
) -> Result<(usize, Vec<AcquisitionScore>)> {
    check_non_empty(candidates)?;
    let scores = candidates
        .candidates
        .iter()
        .enumerate()
        .map(|(i, x)| {
            Ok(AcquisitionScore {
                candidate_index: i,
                score: ucb(&gp.predict(x)?, beta),
                per_step_terms: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pick(scores))
}

/// Planning acquisition: d rollouts of length h per candidate, summing
/// rollout-averaged EI terms over the horizon.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_plan(
    candidates: &CandidateSet,
    policy: &PolicyState,
    space: &SearchSpace,
    incumbent: f64,
    h: usize,
    d: usize,
    fantasized_incumbent: bool,
    rng: &mut impl RngCore,
) -> Result<(usize, Vec<AcquisitionScore>)> {
    check_non_empty(candidates)?;
    let base_gp = policy
        .gp()
        .ok_or_else(|| Error::Protocol("planning acquisition requires a surrogate".into()))?;
    let groups = rollout_batch(policy, &candidates.candidates, space, h, d, rng)?;

    // Per-rollout EI terms for steps >= 1, reconstructed by replaying each
    // trajectory's fantasy chain; computed in parallel, reduced in index
    // order for determinism.
    let per_rollout: Vec<Vec<f64>> = groups
        .par_iter()
        .flat_map(|group| group.par_iter())
        .map(|traj| -> Result<Vec<f64>> {
            let mut terms = vec![0.0; h];
            let mut gp = base_gp.clone();
            let mut running = incumbent;
            for i in 1..h {
                let prev = &traj.steps[i - 1];
                gp = gp.fantasize(&prev.x, prev.y)?;
                if fantasized_incumbent {
                    running = running.max(prev.y);
                }
                terms[i] = ei(&gp.predict(&traj.steps[i].x)?, running);
            }
            Ok(terms)
        })
        .collect::<Result<_>>()?;

    let mut scores = Vec::with_capacity(candidates.len());
    for (ci, candidate) in candidates.candidates.iter().enumerate() {
        let mut terms = vec![0.0; h];
        terms[0] = ei(&base_gp.predict(candidate)?, incumbent);
        for j in 0..d {
            for (i, t) in per_rollout[ci * d + j].iter().enumerate().skip(1) {
                terms[i] += t;
            }
        }
        for t in terms.iter_mut().skip(1) {
            *t /= d as f64;
        }
        scores.push(AcquisitionScore {
            candidate_index: ci,
            score: terms.iter().sum(),
            per_step_terms: Some(terms),
        });
    }
    Ok(pick(scores))
}
