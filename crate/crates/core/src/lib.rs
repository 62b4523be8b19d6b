//! Non-myopic hyperparameter optimization through policy rollouts.
//!
//! The engine wraps a stochastic suggest/predict policy (a GP-UCB stand-in
//! for an autoregressive suggestion model) with multi-step planning:
//! candidate seed sets are refined by ranking fantasized rollouts
//! (First.k / Max.k / Last.k) and scored either myopically (EI, UCB) or with
//! a planning acquisition that sums rollout-averaged expected improvement
//! over the horizon.

pub mod acquisition;
pub mod bench;
pub mod candgen;
pub mod config;
pub mod error;
pub mod history;
mod linalg;
pub mod metrics;
pub mod optimizer;
pub mod policy;
pub mod rng;
pub mod rollout;
pub mod space;
pub mod surrogate;

pub use config::{AcquisitionKind, Criterion, PlannerConfig, PolicyParams};
pub use error::{Error, Result};
pub use history::{History, Observation, PredictiveDistribution, StudyMeta};
pub use space::{denormalize, normalize, ParamSpec, ParamVector, Scale, SearchSpace};
