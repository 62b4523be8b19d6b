//! Synthetic benchmark functions and the experiment harness.
//!
//! Functions are minimization problems in raw form with a seeded random
//! shift of the optimum; the optimizer sees the negation. The harness runs
//! the full strategy x function x seed cross product, streams per-study
//! JSON-lines logs, and emits canonical CSVs whose bytes depend only on the
//! configuration, never on worker count or completion order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::StudyMeta;
use crate::optimizer::{run_study_with, StrategySpec, TrialRecord};
use crate::rng::{mix, substream};
use crate::space::{ParamVector, SearchSpace};

/// Schwefel's optimum coordinate and per-dimension optimal value, pinned so
/// the shifted minimum evaluates to zero within f64 round-off.
const SCHWEFEL_OPT: f64 = 420.968_746_359_982_05;
const SCHWEFEL_CONST: f64 = 418.982_887_272_433_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    Sphere,
    Rastrigin,
    Rosenbrock,
    Griewank,
    Ackley,
    Schwefel,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 6] = [
        BenchmarkKind::Sphere,
        BenchmarkKind::Rastrigin,
        BenchmarkKind::Rosenbrock,
        BenchmarkKind::Griewank,
        BenchmarkKind::Ackley,
        BenchmarkKind::Schwefel,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BenchmarkKind::Sphere => "sphere",
            BenchmarkKind::Rastrigin => "rastrigin",
            BenchmarkKind::Rosenbrock => "rosenbrock",
            BenchmarkKind::Griewank => "griewank",
            BenchmarkKind::Ackley => "ackley",
            BenchmarkKind::Schwefel => "schwefel",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::config("functions", format!("unknown benchmark `{name}`")))
    }

    fn domain(&self) -> (f64, f64) {
        match self {
            BenchmarkKind::Sphere => (-5.0, 5.0),
            BenchmarkKind::Rastrigin => (-5.12, 5.12),
            BenchmarkKind::Rosenbrock => (-5.0, 10.0),
            BenchmarkKind::Griewank => (-600.0, 600.0),
            BenchmarkKind::Ackley => (-32.768, 32.768),
            BenchmarkKind::Schwefel => (-450.0, 450.0),
        }
    }

    /// Location of the canonical (unshifted) minimum, per dimension.
    fn canonical_optimum(&self) -> f64 {
        match self {
            BenchmarkKind::Rosenbrock => 1.0,
            BenchmarkKind::Schwefel => SCHWEFEL_OPT,
            _ => 0.0,
        }
    }

    /// Box the shifted optimum is sampled from. Schwefel uses a narrow
    /// window that keeps the shifted coordinate range inside the canonical
    /// domain, where its global minimum is valid.
    fn optimum_box(&self) -> (f64, f64) {
        if *self == BenchmarkKind::Schwefel {
            return (371.0, 405.0);
        }
        let (lo, hi) = self.domain();
        let margin = 0.1 * (hi - lo);
        (lo + margin, hi - margin)
    }
}

/// A shifted benchmark instance. `evaluate` is minimization in raw form;
/// the optimizer-facing objective is the negation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkFunction {
    pub kind: BenchmarkKind,
    pub dim: usize,
    pub bounds: SearchSpace,
    pub shift: Vec<f64>,
    pub known_minimum: f64,
}

/// Build a deterministic instance for (name, dim, instance_seed).
pub fn make_function(name: &str, dim: usize, instance_seed: u64) -> Result<BenchmarkFunction> {
    let kind = BenchmarkKind::from_name(name)?;
    if dim < 1 {
        return Err(Error::config("dim", "must be >= 1"));
    }
    let (lo, hi) = kind.domain();
    let bounds = SearchSpace::uniform(dim, lo, hi)?;
    let (box_lo, box_hi) = kind.optimum_box();
    let mut rng = substream(instance_seed, &[0x4245_4e43, kind as u64, dim as u64]);
    let canonical = kind.canonical_optimum();
    let shift: Vec<f64> = (0..dim)
        .map(|_| {
            let x_star = box_lo + rand::Rng::random::<f64>(&mut rng) * (box_hi - box_lo);
            x_star - canonical
        })
        .collect();
    Ok(BenchmarkFunction {
        kind,
        dim,
        bounds,
        shift,
        known_minimum: 0.0,
    })
}

impl BenchmarkFunction {
    /// The canonical instance with no shift, mostly for tests.
    pub fn unshifted(kind: BenchmarkKind, dim: usize) -> Self {
        let (lo, hi) = kind.domain();
        BenchmarkFunction {
            kind,
            dim,
            bounds: SearchSpace::uniform(dim, lo, hi).expect("valid domain"),
            shift: vec![0.0; dim],
            known_minimum: 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// Location of the shifted minimum.
    pub fn optimum(&self) -> Vec<f64> {
        let c = self.kind.canonical_optimum();
        self.shift.iter().map(|s| s + c).collect()
    }

    /// Raw minimization value.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let z: Vec<f64> = x.iter().zip(&self.shift).map(|(v, s)| v - s).collect();
        match self.kind {
            BenchmarkKind::Sphere => z.iter().map(|v| v * v).sum(),
            BenchmarkKind::Rastrigin => {
                let d = z.len() as f64;
                10.0 * d
                    + z.iter()
                        .map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos())
                        .sum::<f64>()
            }
            BenchmarkKind::Rosenbrock => z
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum(),
            BenchmarkKind::Griewank => {
                let sum: f64 = z.iter().map(|v| v * v).sum::<f64>() / 4000.0;
                let prod: f64 = z
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
                    .product();
                1.0 + sum - prod
            }
            BenchmarkKind::Ackley => {
                let d = z.len() as f64;
                let rms = (z.iter().map(|v| v * v).sum::<f64>() / d).sqrt();
                let cos_mean =
                    z.iter().map(|v| (2.0 * std::f64::consts::PI * v).cos()).sum::<f64>() / d;
                20.0 + std::f64::consts::E - 20.0 * (-0.2 * rms).exp() - cos_mean.exp()
            }
            BenchmarkKind::Schwefel => {
                SCHWEFEL_CONST * z.len() as f64
                    - z.iter().map(|v| v * v.abs().sqrt().sin()).sum::<f64>()
            }
        }
    }

    /// Maximization objective seen by the optimizer.
    pub fn objective_value(&self, x: &ParamVector) -> f64 {
        -self.evaluate(x.values())
    }
}

/// Full experiment specification.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub strategies: Vec<StrategySpec>,
    pub functions: Vec<String>,
    pub dim: usize,
    pub seeds: Vec<u64>,
    pub budget: usize,
    /// Worker threads for the cell pool; 0 uses the rayon default.
    pub workers: usize,
    pub base_seed: u64,
    /// When false (the default) the wall_ms column of the results CSV is
    /// written as zero so reruns are byte-identical; measured timings always
    /// go to the JSON-lines study logs.
    pub measure_walltime: bool,
    /// Stream per-study JSON-lines logs under this directory.
    pub persist_dir: Option<PathBuf>,
    /// Dump per-trial candidate scores to `scores/<cell>.csv` (needs
    /// `persist_dir`).
    pub dump_scores: bool,
    /// Dump refinement trajectories to `trajectories/<cell>.jsonl` (needs
    /// `persist_dir`).
    pub dump_trajectories: bool,
}

impl ExperimentConfig {
    pub fn new(strategies: Vec<StrategySpec>, functions: Vec<String>, dim: usize) -> Self {
        ExperimentConfig {
            strategies,
            functions,
            dim,
            seeds: vec![0],
            budget: 10,
            workers: 0,
            base_seed: 0,
            measure_walltime: false,
            persist_dir: None,
            dump_scores: false,
            dump_trajectories: false,
        }
    }
}

/// One (strategy, function, seed) cell of the experiment matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub strategy: String,
    pub function: String,
    pub dim: usize,
    pub seed: u64,
    pub ys: Vec<f64>,
    pub best_so_far: Vec<f64>,
    pub normalized_regret: Vec<f64>,
    pub wall_ms: Vec<f64>,
    pub error: Option<String>,
}

/// First line of each study JSON-lines log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyLogHeader {
    pub strategy: String,
    pub function: String,
    pub dim: usize,
    pub seed: u64,
    pub budget: usize,
    pub space: SearchSpace,
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// File stem for one cell's artifacts.
pub fn cell_stem(strategy: &str, function: &str, seed: u64) -> String {
    format!("{}__{}__seed{}", sanitize(strategy), sanitize(function), seed)
}

fn validate_config(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.strategies.is_empty() {
        return Err(Error::config("strategies", "must not be empty"));
    }
    if cfg.functions.is_empty() {
        return Err(Error::config("functions", "must not be empty"));
    }
    if cfg.seeds.is_empty() {
        return Err(Error::config("seeds", "must not be empty"));
    }
    if cfg.budget < 1 {
        return Err(Error::config("budget", "must be >= 1"));
    }
    if cfg.dim < 1 {
        return Err(Error::config("dim", "must be >= 1"));
    }
    for name in &cfg.functions {
        BenchmarkKind::from_name(name)?;
    }
    for s in &cfg.strategies {
        s.validate()?;
    }
    let mut names: Vec<&str> = cfg.strategies.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    if names.len() != cfg.strategies.len() {
        return Err(Error::config("strategies", "names must be unique"));
    }
    Ok(())
}

/// Execute the full cross product. Cells run concurrently; results come back
/// in canonical (strategy, function, seed) order with normalized regret
/// filled in. Individual cell failures are recorded, not fatal.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentResult>> {
    validate_config(cfg)?;
    if let Some(dir) = &cfg.persist_dir {
        fs::create_dir_all(dir.join("studies"))?;
        if cfg.dump_scores {
            fs::create_dir_all(dir.join("scores"))?;
        }
        if cfg.dump_trajectories {
            fs::create_dir_all(dir.join("trajectories"))?;
        }
    }

    let cells: Vec<(usize, usize, usize)> = (0..cfg.strategies.len())
        .flat_map(|s| {
            (0..cfg.functions.len())
                .flat_map(move |f| (0..cfg.seeds.len()).map(move |sd| (s, f, sd)))
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Numerical(format!("worker pool: {e}")))?;
    let mut results: Vec<ExperimentResult> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(si, fi, sdi)| run_cell(cfg, si, fi, sdi))
            .collect()
    });

    fill_normalized_regret(&mut results);
    Ok(results)
}

fn run_cell(cfg: &ExperimentConfig, si: usize, fi: usize, sdi: usize) -> ExperimentResult {
    let strategy = &cfg.strategies[si];
    let fname = &cfg.functions[fi];
    let seed = cfg.seeds[sdi];

    let mut result = ExperimentResult {
        strategy: strategy.name.clone(),
        function: fname.clone(),
        dim: cfg.dim,
        seed,
        ys: Vec::new(),
        best_so_far: Vec::new(),
        normalized_regret: Vec::new(),
        wall_ms: Vec::new(),
        error: None,
    };

    let function = match make_function(fname, cfg.dim, seed) {
        Ok(f) => f,
        Err(e) => {
            result.error = Some(e.to_string());
            return result;
        }
    };
    let meta = StudyMeta::new(
        &cell_stem(&strategy.name, fname, seed),
        fname,
        function.bounds.clone(),
    );

    let mut log_file = cfg.persist_dir.as_ref().and_then(|dir| {
        let path = dir
            .join("studies")
            .join(format!("{}.jsonl", cell_stem(&strategy.name, fname, seed)));
        let header = StudyLogHeader {
            strategy: strategy.name.clone(),
            function: fname.clone(),
            dim: cfg.dim,
            seed,
            budget: cfg.budget,
            space: function.bounds.clone(),
        };
        match fs::File::create(&path) {
            Ok(mut f) => {
                let ok = serde_json::to_string(&header)
                    .map(|line| writeln!(f, "{line}").is_ok())
                    .unwrap_or(false);
                ok.then_some(f)
            }
            Err(_) => None,
        }
    });

    let stem = cell_stem(&strategy.name, fname, seed);
    let mut score_file = cfg.persist_dir.as_ref().filter(|_| cfg.dump_scores).and_then(|dir| {
        let path = dir.join("scores").join(format!("{stem}.csv"));
        fs::File::create(path).ok().map(|mut f| {
            let _ = writeln!(f, "trial,candidate_index,criterion,score,per_step_terms");
            f
        })
    });
    let mut traj_file = cfg
        .persist_dir
        .as_ref()
        .filter(|_| cfg.dump_trajectories)
        .and_then(|dir| fs::File::create(dir.join("trajectories").join(format!("{stem}.jsonl"))).ok());

    let run_seed = mix(cfg.base_seed, &[si as u64, fi as u64, seed]);
    let mut records: Vec<TrialRecord> = Vec::with_capacity(cfg.budget);
    let criterion_name = strategy.criterion.name();
    let outcome = run_study_with(
        strategy,
        meta,
        |x| function.objective_value(x),
        cfg.budget,
        run_seed,
        |record, detail| {
            if let Some(f) = log_file.as_mut() {
                if let Ok(line) = serde_json::to_string(record) {
                    let _ = writeln!(f, "{line}");
                }
            }
            if let Some(f) = score_file.as_mut() {
                for s in &detail.scores {
                    let terms = s
                        .per_step_terms
                        .as_ref()
                        .map(|t| {
                            t.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
                        })
                        .unwrap_or_default();
                    let _ = writeln!(
                        f,
                        "{},{},{},{},{}",
                        record.trial, s.candidate_index, criterion_name, s.score, terms
                    );
                }
            }
            if let Some(f) = traj_file.as_mut() {
                for t in &detail.trajectories {
                    if let Ok(mut v) = serde_json::to_value(t) {
                        v["trial"] = serde_json::json!(record.trial);
                        let _ = writeln!(f, "{v}");
                    }
                }
            }
            records.push(record.clone());
        },
    );
    if let Err(e) = outcome {
        result.error = Some(e.to_string());
    }
    for r in records {
        result.ys.push(r.y);
        result.best_so_far.push(r.best_so_far);
        result
            .wall_ms
            .push(if cfg.measure_walltime { r.wall_ms } else { 0.0 });
    }
    result
}

/// Normalized regret: (f_best - f_min) / (median first-trial f - f_min),
/// clamped to [0, 1], computed per (strategy, function) across seeds.
fn fill_normalized_regret(results: &mut [ExperimentResult]) {
    let groups: Vec<(String, String)> = {
        let mut seen = Vec::new();
        for r in results.iter() {
            let key = (r.strategy.clone(), r.function.clone());
            if !seen.contains(&key) {
                seen.push(key);
            }
        }
        seen
    };
    for (strategy, function) in groups {
        let mut first_fs: Vec<f64> = results
            .iter()
            .filter(|r| r.strategy == strategy && r.function == function && r.error.is_none())
            .filter_map(|r| r.ys.first().map(|y| -y))
            .collect();
        if first_fs.is_empty() {
            continue;
        }
        first_fs.sort_by(f64::total_cmp);
        let median = if first_fs.len() % 2 == 1 {
            first_fs[first_fs.len() / 2]
        } else {
            0.5 * (first_fs[first_fs.len() / 2 - 1] + first_fs[first_fs.len() / 2])
        };
        let f_min = 0.0;
        let denom = median - f_min;
        for r in results
            .iter_mut()
            .filter(|r| r.strategy == strategy && r.function == function)
        {
            r.normalized_regret = r
                .best_so_far
                .iter()
                .map(|b| {
                    let f_best = -b;
                    if denom <= 1e-12 {
                        if f_best - f_min <= 1e-12 {
                            0.0
                        } else {
                            1.0
                        }
                    } else {
                        ((f_best - f_min) / denom).clamp(0.0, 1.0)
                    }
                })
                .collect();
        }
    }
}

/// Canonical results CSV. Failed cells are omitted from the rows.
pub fn results_to_csv(results: &[ExperimentResult]) -> String {
    let mut out = String::from("strategy,function,dim,seed,trial,y,best_so_far,normalized_regret,wall_ms\n");
    for r in results {
        if r.error.is_some() {
            continue;
        }
        for (i, y) in r.ys.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.strategy,
                r.function,
                r.dim,
                r.seed,
                i + 1,
                y,
                r.best_so_far[i],
                r.normalized_regret[i],
                r.wall_ms[i],
            ));
        }
    }
    out
}

/// Per-trial mean and standard error across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub strategy: String,
    pub function: String,
    pub trial: usize,
    pub mean_best: f64,
    pub stderr_best: f64,
    pub mean_regret: f64,
    pub stderr_regret: f64,
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Aggregate results into per-(strategy, function, trial) curves.
pub fn aggregate(results: &[ExperimentResult]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    let mut groups: Vec<(String, String)> = Vec::new();
    for r in results {
        let key = (r.strategy.clone(), r.function.clone());
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    for (strategy, function) in groups {
        let members: Vec<&ExperimentResult> = results
            .iter()
            .filter(|r| r.strategy == strategy && r.function == function && r.error.is_none())
            .collect();
        if members.is_empty() {
            continue;
        }
        let budget = members.iter().map(|r| r.best_so_far.len()).min().unwrap_or(0);
        for t in 0..budget {
            let bests: Vec<f64> = members.iter().map(|r| r.best_so_far[t]).collect();
            let regrets: Vec<f64> = members.iter().map(|r| r.normalized_regret[t]).collect();
            let (mean_best, stderr_best) = mean_and_stderr(&bests);
            let (mean_regret, stderr_regret) = mean_and_stderr(&regrets);
            rows.push(AggregateRow {
                strategy: strategy.clone(),
                function: function.clone(),
                trial: t + 1,
                mean_best,
                stderr_best,
                mean_regret,
                stderr_regret,
            });
        }
    }
    rows
}

pub fn aggregate_to_csv(rows: &[AggregateRow]) -> String {
    let mut out =
        String::from("strategy,function,trial,mean_best,stderr_best,mean_regret,stderr_regret\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.strategy, r.function, r.trial, r.mean_best, r.stderr_best, r.mean_regret, r.stderr_regret,
        ));
    }
    out
}

/// Write results and aggregate CSVs under `dir`.
pub fn write_csvs(dir: &Path, results: &[ExperimentResult]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("results.csv"), results_to_csv(results))?;
    fs::write(dir.join("aggregate.csv"), aggregate_to_csv(&aggregate(results)))?;
    Ok(())
}
