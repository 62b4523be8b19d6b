//! Planner and policy configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the seed set is refined into the horizon-aware candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// No refinement: candidates are the raw seed set.
    None,
    FirstK,
    MaxK,
    LastK,
}

impl Criterion {
    pub fn name(&self) -> &'static str {
        match self {
            Criterion::None => "none",
            Criterion::FirstK => "first_k",
            Criterion::MaxK => "max_k",
            Criterion::LastK => "last_k",
        }
    }
}

/// Which acquisition scores the refined candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionKind {
    Ei,
    Ucb,
    Plan,
}

impl AcquisitionKind {
    pub fn name(&self) -> &'static str {
        match self {
            AcquisitionKind::Ei => "ei",
            AcquisitionKind::Ucb => "ucb",
            AcquisitionKind::Plan => "plan",
        }
    }
}

/// Tunables of the stochastic GP-UCB prior policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyParams {
    /// UCB exploration weight (score = mean + sqrt(beta) * std).
    pub ucb_beta: f64,
    /// Proposal pool size per suggestion.
    pub proposal_count: usize,
    /// Softmax temperature over standardized UCB scores.
    pub temperature: f64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            ucb_beta: 4.0,
            proposal_count: 512,
            temperature: 0.1,
        }
    }
}

impl PolicyParams {
    pub fn validate(&self) -> Result<()> {
        if self.proposal_count < 1 {
            return Err(Error::config("proposal_count", "must be >= 1"));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::config("temperature", "must be > 0"));
        }
        if !(self.ucb_beta > 0.0) {
            return Err(Error::config("ucb_beta", "must be > 0"));
        }
        Ok(())
    }
}

/// Full planner configuration: seed-set size n, refinement size k, rollout
/// horizon h, rollout count d, trial budget T.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub n_seed: usize,
    pub k_refine: usize,
    pub horizon: usize,
    pub n_rollouts: usize,
    pub budget: usize,
    pub criterion: Criterion,
    pub acquisition: AcquisitionKind,
    pub rng_seed: u64,
    /// When true, the planning acquisition tracks a running fantasized
    /// incumbent instead of holding the real best-so-far fixed.
    pub fantasized_incumbent: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            n_seed: 100,
            k_refine: 50,
            horizon: 5,
            n_rollouts: 64,
            budget: 100,
            criterion: Criterion::MaxK,
            acquisition: AcquisitionKind::Ei,
            rng_seed: 0,
            fantasized_incumbent: false,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_seed < 1 {
            return Err(Error::config("n_seed", "must be >= 1"));
        }
        if self.k_refine < 1 || self.k_refine > self.n_seed {
            return Err(Error::config(
                "k_refine",
                format!("must satisfy 1 <= k_refine <= n_seed ({})", self.n_seed),
            ));
        }
        if self.horizon < 1 {
            return Err(Error::config("horizon", "must be >= 1"));
        }
        if self.n_rollouts < 1 {
            return Err(Error::config("n_rollouts", "must be >= 1"));
        }
        if self.budget < 1 {
            return Err(Error::config("budget", "must be >= 1"));
        }
        Ok(())
    }
}
