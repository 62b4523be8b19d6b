//! Observed trajectories and predictive distributions.
//!
//! Everything is maximization: benchmark minimization problems are negated
//! at the benchmark boundary. Histories are immutable values; appending an
//! observation returns a new history.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{ParamVector, SearchSpace};

/// One completed trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: ParamVector,
    pub y: f64,
    /// 1-based, contiguous within a history.
    pub trial_index: usize,
}

impl Observation {
    pub fn new(x: ParamVector, y: f64, trial_index: usize) -> Result<Self> {
        if !y.is_finite() {
            return Err(Error::NonFinite(y));
        }
        Ok(Observation { x, y, trial_index })
    }
}

/// Study-level metadata; the task description side of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyMeta {
    pub study_id: String,
    pub objective_name: String,
    pub space: SearchSpace,
}

impl StudyMeta {
    pub fn new(study_id: &str, objective_name: &str, space: SearchSpace) -> Self {
        StudyMeta {
            study_id: study_id.to_string(),
            objective_name: objective_name.to_string(),
            space,
        }
    }
}

/// Observed trajectory plus its running incumbent.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    meta: StudyMeta,
    observations: Vec<Observation>,
    best_value: Option<f64>,
    best_x: Option<ParamVector>,
}

impl History {
    pub fn new(meta: StudyMeta) -> Self {
        History {
            meta,
            observations: Vec::new(),
            best_value: None,
            best_x: None,
        }
    }

    pub fn meta(&self) -> &StudyMeta {
        &self.meta
    }

    pub fn space(&self) -> &SearchSpace {
        &self.meta.space
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn best_value(&self) -> Option<f64> {
        self.best_value
    }

    pub fn best_x(&self) -> Option<&ParamVector> {
        self.best_x.as_ref()
    }

    /// Best observed value, with negative infinity standing in for an empty
    /// history so acquisition code can treat any observation as improvement.
    pub fn incumbent(&self) -> f64 {
        self.best_value.unwrap_or(f64::NEG_INFINITY)
    }

    /// Append an observation, returning the extended history.
    pub fn with_observation(&self, obs: Observation) -> Result<History> {
        let expected = self.observations.len();
        if obs.trial_index != expected + 1 {
            return Err(Error::TrialIndex {
                got: obs.trial_index,
                expected,
            });
        }
        if !obs.y.is_finite() {
            return Err(Error::NonFinite(obs.y));
        }
        let mut next = self.clone();
        let better = next.best_value.map_or(true, |b| obs.y > b);
        if better {
            next.best_value = Some(obs.y);
            next.best_x = Some(obs.x.clone());
        }
        next.observations.push(obs);
        Ok(next)
    }
}

/// Gaussian predictive distribution of an unknown function value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    pub mean: f64,
    pub variance: f64,
}

impl PredictiveDistribution {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() {
            return Err(Error::NonFinite(if mean.is_finite() { variance } else { mean }));
        }
        if variance < 0.0 {
            return Err(Error::Numerical(format!(
                "negative predictive variance {variance}"
            )));
        }
        Ok(PredictiveDistribution { mean, variance })
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}
