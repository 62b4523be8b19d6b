//! Run configuration: JSON in, fully-resolved echo out.

use std::fs;
use std::path::{Path, PathBuf};

use planbo::config::{AcquisitionKind, Criterion, PlannerConfig, PolicyParams};
use planbo::optimizer::StrategySpec;
use serde::{Deserialize, Serialize};

/// One strategy entry. Omitted fields take the paper-scale defaults
/// (n = 100, k = 50, h = 5, d = 64, Max.k + EI).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    /// Display name; generated from the shape when omitted.
    pub name: Option<String>,
    /// Play one prior-policy suggestion per trial, skipping candidate
    /// generation and acquisition entirely.
    pub prior_only: bool,
    pub criterion: Criterion,
    pub acquisition: AcquisitionKind,
    pub n_seed: usize,
    pub k_refine: usize,
    pub horizon: usize,
    pub n_rollouts: usize,
    pub fantasized_incumbent: bool,
    pub ucb_beta: f64,
    pub proposal_count: usize,
    pub temperature: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        let planner = PlannerConfig::default();
        let policy = PolicyParams::default();
        StrategyConfig {
            name: None,
            prior_only: false,
            criterion: planner.criterion,
            acquisition: planner.acquisition,
            n_seed: planner.n_seed,
            k_refine: planner.k_refine,
            horizon: planner.horizon,
            n_rollouts: planner.n_rollouts,
            fantasized_incumbent: planner.fantasized_incumbent,
            ucb_beta: policy.ucb_beta,
            proposal_count: policy.proposal_count,
            temperature: policy.temperature,
        }
    }
}

impl StrategyConfig {
    pub fn to_spec(&self, budget: usize, rng_seed: u64) -> planbo::Result<StrategySpec> {
        let planner = PlannerConfig {
            n_seed: self.n_seed,
            k_refine: self.k_refine,
            horizon: self.horizon,
            n_rollouts: self.n_rollouts,
            budget,
            criterion: self.criterion,
            acquisition: self.acquisition,
            rng_seed,
            fantasized_incumbent: self.fantasized_incumbent,
        };
        let policy = PolicyParams {
            ucb_beta: self.ucb_beta,
            proposal_count: self.proposal_count,
            temperature: self.temperature,
        };
        let mut spec = if self.prior_only {
            StrategySpec::prior(planner)
        } else if self.criterion == Criterion::None {
            StrategySpec::augmented(self.acquisition, planner)
        } else {
            StrategySpec::planning(self.criterion, self.acquisition, planner)
        };
        spec = spec.with_policy(policy);
        if let Some(name) = &self.name {
            spec = spec.with_name(name);
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Top-level run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub functions: Vec<String>,
    pub dim: usize,
    pub seeds: Vec<u64>,
    /// Trial budget T per study.
    pub budget: usize,
    pub strategies: Vec<StrategyConfig>,
    pub out_dir: PathBuf,
    /// Worker threads; 0 lets the pool pick.
    pub workers: usize,
    pub rng_seed: u64,
    /// Record wall-clock timings in the results CSV. Off by default so the
    /// CSV bytes depend only on the configuration.
    pub measure_walltime: bool,
    pub dump_trajectories: bool,
    pub dump_scores: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            functions: vec![
                "sphere".into(),
                "rastrigin".into(),
                "rosenbrock".into(),
                "griewank".into(),
                "ackley".into(),
            ],
            dim: 4,
            seeds: (0..20).collect(),
            budget: 100,
            strategies: vec![
                StrategyConfig::default(),
                StrategyConfig {
                    criterion: Criterion::None,
                    ..Default::default()
                },
            ],
            out_dir: PathBuf::from("out"),
            workers: 0,
            rng_seed: 0,
            measure_walltime: false,
            dump_trajectories: false,
            dump_scores: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, String> {
        let text = fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("invalid config: {e}"))
    }

    /// Resolve strategy specs, enforcing every module constraint up front.
    pub fn build_strategies(&self) -> planbo::Result<Vec<StrategySpec>> {
        if self.strategies.is_empty() {
            return Err(planbo::Error::Config {
                field: "strategies".into(),
                message: "must not be empty".into(),
            });
        }
        self.strategies
            .iter()
            .map(|s| s.to_spec(self.budget, self.rng_seed))
            .collect()
    }

    pub fn to_experiment(&self) -> planbo::Result<planbo::bench::ExperimentConfig> {
        let mut cfg = planbo::bench::ExperimentConfig::new(
            self.build_strategies()?,
            self.functions.clone(),
            self.dim,
        );
        cfg.seeds = self.seeds.clone();
        cfg.budget = self.budget;
        cfg.workers = self.workers;
        cfg.base_seed = self.rng_seed;
        cfg.measure_walltime = self.measure_walltime;
        cfg.persist_dir = Some(self.out_dir.clone());
        cfg.dump_scores = self.dump_scores;
        cfg.dump_trajectories = self.dump_trajectories;
        Ok(cfg)
    }

    /// Echo the fully-resolved configuration so a rerun from the echo
    /// reproduces the results exactly.
    pub fn write_echo(&self) -> std::io::Result<()> {
        fs::create_dir_all(&self.out_dir)?;
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        fs::write(self.out_dir.join("config.json"), text)
    }
}
