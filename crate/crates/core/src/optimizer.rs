//! The outer ask/tell loop.
//!
//! Strategies assemble the pipeline: prior-only play, the EI-augmented
//! seed-set baseline, and planning variants (refinement criterion x
//! acquisition). Cold starts (fewer than two observations) fall back to
//! uniform random suggestions, as does any trial whose surrogate fails
//! numerically.

use std::time::Instant;

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{evaluate_ei, evaluate_plan, evaluate_ucb, AcquisitionScore};
use crate::candgen::{
    generate_seed_set, rank_rollouts, refine_first_k, refine_last_k, refine_max_k, CandidateSet,
};
use crate::config::{AcquisitionKind, Criterion, PlannerConfig, PolicyParams};
use crate::error::{Error, Result};
use crate::history::{History, Observation, StudyMeta};
use crate::policy::{suggest_random, PolicyState};
use crate::rng::substream;
use crate::rollout::{rollout_batch, FantasyTrajectory};
use crate::space::ParamVector;
use crate::surrogate::{fit, fit_hyperparameters, GpPosterior};

/// Observations required before the surrogate path activates.
const COLD_START_THRESHOLD: usize = 2;

/// A fully-resolved optimization strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub name: String,
    /// When false the strategy plays a single prior-policy suggestion
    /// directly (the unaugmented baseline); candidate generation and
    /// acquisition are skipped.
    pub uses_seed_set: bool,
    pub criterion: Criterion,
    pub acquisition: AcquisitionKind,
    pub planner: PlannerConfig,
    pub policy: PolicyParams,
}

impl StrategySpec {
    /// The unaugmented prior policy: sample one suggestion and play it.
    pub fn prior(planner: PlannerConfig) -> Self {
        StrategySpec {
            name: "prior".into(),
            uses_seed_set: false,
            criterion: Criterion::None,
            acquisition: AcquisitionKind::Ei,
            planner,
            policy: PolicyParams::default(),
        }
    }

    /// The augmented baseline: n seeds scored by a 1-step acquisition.
    pub fn augmented(acquisition: AcquisitionKind, planner: PlannerConfig) -> Self {
        let planner = PlannerConfig {
            criterion: Criterion::None,
            acquisition,
            ..planner
        };
        StrategySpec {
            name: format!("{}-{}", Criterion::None.name(), acquisition.name()),
            uses_seed_set: true,
            criterion: Criterion::None,
            acquisition,
            planner,
            policy: PolicyParams::default(),
        }
    }

    /// A planning strategy: rollout-refined candidates plus an acquisition.
    pub fn planning(
        criterion: Criterion,
        acquisition: AcquisitionKind,
        planner: PlannerConfig,
    ) -> Self {
        let planner = PlannerConfig {
            criterion,
            acquisition,
            ..planner
        };
        StrategySpec {
            name: format!(
                "{}{}-{}-h{}",
                criterion.name(),
                planner.k_refine,
                acquisition.name(),
                planner.horizon
            ),
            uses_seed_set: true,
            criterion,
            acquisition,
            planner,
            policy: PolicyParams::default(),
        }
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn with_policy(mut self, policy: PolicyParams) -> Self {
        self.policy = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.planner.validate()?;
        self.policy.validate()?;
        if self.criterion != self.planner.criterion {
            return Err(Error::config("criterion", "strategy/planner mismatch"));
        }
        if self.acquisition != self.planner.acquisition {
            return Err(Error::config("acquisition", "strategy/planner mismatch"));
        }
        Ok(())
    }
}

/// Diagnostics from one ask: what was generated and how it scored.
#[derive(Debug, Clone, Default)]
pub struct AskDetail {
    /// True when the trial was answered by a uniform random point because
    /// the history is too short.
    pub cold_start: bool,
    /// Set when a surrogate failure forced a random fallback.
    pub fallback: Option<String>,
    pub candidates: Option<CandidateSet>,
    pub scores: Vec<AcquisitionScore>,
    /// Refinement rollouts (one per seed) when a criterion is active.
    pub trajectories: Vec<FantasyTrajectory>,
    pub gp: Option<GpPosterior>,
}

/// Suggest the next point to evaluate.
pub fn ask(strategy: &StrategySpec, history: &History, rng: &mut ChaCha8Rng) -> Result<ParamVector> {
    ask_detailed(strategy, history, rng).map(|(x, _)| x)
}

/// [`ask`] plus diagnostics.
pub fn ask_detailed(
    strategy: &StrategySpec,
    history: &History,
    rng: &mut ChaCha8Rng,
) -> Result<(ParamVector, AskDetail)> {
    strategy.validate()?;
    let space = history.space();
    if history.len() < COLD_START_THRESHOLD {
        let x = suggest_random(space, rng);
        return Ok((
            x,
            AskDetail {
                cold_start: true,
                ..Default::default()
            },
        ));
    }
    match ask_inner(strategy, history, rng) {
        Ok(out) => Ok(out),
        Err(e) if e.is_numerical() => {
            log::warn!(
                "strategy {}: surrogate failure ({e}); falling back to a random suggestion",
                strategy.name
            );
            let x = suggest_random(space, rng);
            Ok((
                x,
                AskDetail {
                    fallback: Some(e.to_string()),
                    ..Default::default()
                },
            ))
        }
        Err(e) => Err(e),
    }
}

fn ask_inner(
    strategy: &StrategySpec,
    history: &History,
    rng: &mut ChaCha8Rng,
) -> Result<(ParamVector, AskDetail)> {
    let space = history.space();
    let planner = &strategy.planner;

    let hyper_seed = rng.next_u64();
    let kernel = fit_hyperparameters(history, hyper_seed);
    let gp = fit(history, &kernel)?;

    let policy_seed = rng.next_u64();
    let mut policy = PolicyState::new(Some(gp.clone()), strategy.policy.clone(), policy_seed);

    if !strategy.uses_seed_set {
        let x = policy.suggest(space);
        return Ok((
            x,
            AskDetail {
                gp: Some(gp),
                ..Default::default()
            },
        ));
    }

    let seeds = generate_seed_set(&mut policy, space, planner.n_seed)?;
    let (candidates, trajectories) = match strategy.criterion {
        Criterion::None => (seeds, Vec::new()),
        criterion => {
            // A single length-h rollout per seed candidate ranks the set.
            let groups = rollout_batch(
                &policy,
                &seeds.candidates,
                space,
                planner.horizon,
                1,
                rng,
            )?;
            let trajectories: Vec<FantasyTrajectory> = groups
                .into_iter()
                .map(|mut g| g.pop().expect("d = 1 rollout per seed"))
                .collect();
            let ranked = rank_rollouts(trajectories);
            let set = match criterion {
                Criterion::FirstK => refine_first_k(&ranked, &seeds, planner.k_refine)?,
                Criterion::MaxK => refine_max_k(&ranked, planner.k_refine)?,
                Criterion::LastK => refine_last_k(&ranked, planner.k_refine)?,
                Criterion::None => unreachable!(),
            };
            (set, ranked.trajectories)
        }
    };

    let incumbent = history.incumbent();
    let (best, scores) = match strategy.acquisition {
        AcquisitionKind::Ei => evaluate_ei(&candidates, &gp, incumbent)?,
        AcquisitionKind::Ucb => evaluate_ucb(&candidates, &gp, strategy.policy.ucb_beta)?,
        AcquisitionKind::Plan => evaluate_plan(
            &candidates,
            &policy,
            space,
            incumbent,
            planner.horizon,
            planner.n_rollouts,
            planner.fantasized_incumbent,
            rng,
        )?,
    };
    let x = candidates.candidates[best].clone();
    Ok((
        x,
        AskDetail {
            cold_start: false,
            fallback: None,
            candidates: Some(candidates),
            scores,
            trajectories,
            gp: Some(gp),
        },
    ))
}

/// Record an evaluation, returning the extended history.
pub fn tell(history: &History, x: ParamVector, y: f64) -> Result<History> {
    if !y.is_finite() {
        return Err(Error::NonFinite(y));
    }
    if !history.space().contains(&x) {
        return Err(Error::Protocol(format!(
            "told point {:?} lies outside the search space",
            x.values()
        )));
    }
    let obs = Observation::new(x, y, history.len() + 1)?;
    history.with_observation(obs)
}

/// One line of the study log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub best_so_far: f64,
    pub strategy: String,
    pub wall_ms: f64,
}

/// Completed study: final history plus the per-trial log.
#[derive(Debug, Clone)]
pub struct StudyRecord {
    pub history: History,
    pub trials: Vec<TrialRecord>,
}

/// Run T alternating ask/tell rounds. Fully deterministic given the seed and
/// a deterministic objective.
pub fn run_study<F: Fn(&ParamVector) -> f64>(
    strategy: &StrategySpec,
    meta: StudyMeta,
    objective: F,
    budget: usize,
    rng_seed: u64,
) -> Result<StudyRecord> {
    run_study_with(strategy, meta, objective, budget, rng_seed, |_, _| {})
}

/// [`run_study`] with a per-trial sink, called after each tell so partial
/// progress can be persisted before any later failure aborts the study.
pub fn run_study_with<F, S>(
    strategy: &StrategySpec,
    meta: StudyMeta,
    objective: F,
    budget: usize,
    rng_seed: u64,
    mut on_trial: S,
) -> Result<StudyRecord>
where
    F: Fn(&ParamVector) -> f64,
    S: FnMut(&TrialRecord, &AskDetail),
{
    if budget < 1 {
        return Err(Error::config("budget", "must be >= 1"));
    }
    strategy.validate()?;
    let mut history = History::new(meta);
    let mut trials = Vec::with_capacity(budget);
    for trial in 1..=budget {
        let started = Instant::now();
        let mut trial_rng = substream(rng_seed, &[0x5452_4941, trial as u64]);
        let (x, detail) = ask_detailed(strategy, &history, &mut trial_rng)?;
        let y = objective(&x);
        history = tell(&history, x.clone(), y)?;
        let record = TrialRecord {
            trial,
            x: x.values().to_vec(),
            y,
            best_so_far: history.best_value().expect("non-empty after tell"),
            strategy: strategy.name.clone(),
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        };
        on_trial(&record, &detail);
        trials.push(record);
    }
    Ok(StudyRecord { history, trials })
}
