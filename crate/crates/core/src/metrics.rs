//! Global sampling counters.
//!
//! The planning acquisition advertises linear O(d*h) trajectory cost per
//! candidate; these counters let tests and the CLI verify the bookkeeping
//! against actual surrogate/policy calls. Counters are process-wide, so
//! tests that assert on them must not run concurrently with other
//! counter-touching work.

use std::sync::atomic::{AtomicU64, Ordering};

static VALUE_SAMPLES: AtomicU64 = AtomicU64::new(0);
static POLICY_SUGGESTIONS: AtomicU64 = AtomicU64::new(0);
static ROLLOUTS: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Snapshot {
    /// Draws from a surrogate predictive distribution (one per fantasy value).
    pub value_samples: u64,
    /// Policy suggestion calls.
    pub policy_suggestions: u64,
    /// Completed rollout trajectories.
    pub rollouts: u64,
}

pub fn reset() {
    VALUE_SAMPLES.store(0, Ordering::SeqCst);
    POLICY_SUGGESTIONS.store(0, Ordering::SeqCst);
    ROLLOUTS.store(0, Ordering::SeqCst);
}

pub fn snapshot() -> Snapshot {
    Snapshot {
        value_samples: VALUE_SAMPLES.load(Ordering::SeqCst),
        policy_suggestions: POLICY_SUGGESTIONS.load(Ordering::SeqCst),
        rollouts: ROLLOUTS.load(Ordering::SeqCst),
    }
}

pub(crate) fn count_value_sample() {
    VALUE_SAMPLES.fetch_add(1, Ordering::Relaxed);
}

pub(crate) fn count_policy_suggestion() {
    POLICY_SUGGESTIONS.fetch_add(1, Ordering::Relaxed);
}

pub(crate) fn count_rollout() {
    ROLLOUTS.fetch_add(1, Ordering::Relaxed);
}
