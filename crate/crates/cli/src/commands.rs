//! Subcommand implementations. Each returns a process exit code:
//! 0 success, 1 config/usage error, 2 partial cell failures.

use std::fs;
use std::path::{Path, PathBuf};

use planbo::bench::{aggregate, run_experiment, write_csvs, AggregateRow, ExperimentResult};
use planbo::optimizer::TrialRecord;

use crate::config::RunConfig;
use crate::plot::{parse_aggregate, render_function, Metric};

pub struct Overrides {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub dump_trajectories: bool,
    pub dump_scores: bool,
}

fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig, String> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(out) = &overrides.out {
        cfg.out_dir = out.clone();
    }
    if let Some(workers) = overrides.workers {
        cfg.workers = workers;
    }
    if let Some(seed) = overrides.seed {
        cfg.rng_seed = seed;
    }
    if overrides.dump_trajectories {
        cfg.dump_trajectories = true;
    }
    if overrides.dump_scores {
        cfg.dump_scores = true;
    }
    Ok(cfg)
}

fn execute(cfg: &RunConfig) -> Result<Vec<ExperimentResult>, String> {
    let experiment = cfg.to_experiment().map_err(|e| e.to_string())?;
    cfg.write_echo().map_err(|e| format!("cannot write config echo: {e}"))?;
    run_experiment(&experiment).map_err(|e| e.to_string())
}

fn report_failures(out_dir: &Path, results: &[ExperimentResult]) -> usize {
    let failures: Vec<String> = results
        .iter()
        .filter_map(|r| {
            r.error.as_ref().map(|e| {
                format!("{} / {} / seed {}: {}", r.strategy, r.function, r.seed, e)
            })
        })
        .collect();
    if !failures.is_empty() {
        let _ = fs::write(out_dir.join("failures.txt"), failures.join("\n") + "\n");
        for f in &failures {
            eprintln!("cell failed: {f}");
        }
    }
    failures.len()
}

pub fn cmd_run(config_path: &Path, overrides: &Overrides) -> i32 {
    let cfg = match load_config(config_path, overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return 1;
        }
    };
    let results = match execute(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return 1;
        }
    };
    if let Err(e) = write_csvs(&cfg.out_dir, &results) {
        eprintln!("cannot write results: {e}");
        return 1;
    }
    let ok = results.iter().filter(|r| r.error.is_none()).count();
    println!(
        "{} cells completed, results under {}",
        ok,
        cfg.out_dir.display()
    );
    if report_failures(&cfg.out_dir, &results) > 0 {
        2
    } else {
        0
    }
}

pub fn cmd_ablate_horizon(config_path: &Path, horizons: &[usize], overrides: &Overrides) -> i32 {
    let base = match load_config(config_path, overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return 1;
        }
    };
    if horizons.is_empty() {
        eprintln!("invalid config: horizons: must not be empty");
        return 1;
    }
    let root = base.out_dir.clone();
    let mut merged: Vec<(usize, AggregateRow)> = Vec::new();
    let mut failures = 0usize;
    for &h in horizons {
        let mut cfg = base.clone();
        cfg.out_dir = root.join(format!("h{h}"));
        for s in &mut cfg.strategies {
            s.horizon = h;
        }
        let results = match execute(&cfg) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("h = {h}: {e}");
                return 1;
            }
        };
        if let Err(e) = write_csvs(&cfg.out_dir, &results) {
            eprintln!("cannot write results: {e}");
            return 1;
        }
        failures += report_failures(&cfg.out_dir, &results);
        for row in aggregate(&results) {
            merged.push((h, row));
        }
    }
    let mut csv = String::from(
        "h,strategy,function,trial,mean_best,stderr_best,mean_regret,stderr_regret\n",
    );
    for (h, r) in &merged {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            h, r.strategy, r.function, r.trial, r.mean_best, r.stderr_best, r.mean_regret,
            r.stderr_regret
        ));
    }
    if let Err(e) = fs::create_dir_all(&root)
        .and_then(|_| fs::write(root.join("horizon_aggregate.csv"), csv))
    {
        eprintln!("cannot write merged aggregate: {e}");
        return 1;
    }
    println!(
        "horizon sweep {:?} complete, merged aggregate under {}",
        horizons,
        root.display()
    );
    if failures > 0 {
        2
    } else {
        0
    }
}

pub fn cmd_plot(aggregate_path: &Path, out_dir: &Path, metric: &str) -> i32 {
    let metric = match Metric::parse(metric) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("{e}");
            return 1;
        }
    };
    let text = match fs::read_to_string(aggregate_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", aggregate_path.display());
            return 1;
        }
    };
    let rows = match parse_aggregate(&text) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{}: {e}", aggregate_path.display());
            return 1;
        }
    };
    if let Err(e) = fs::create_dir_all(out_dir) {
        eprintln!("cannot create {}: {e}", out_dir.display());
        return 1;
    }
    let mut functions: Vec<String> = Vec::new();
    for r in &rows {
        if !functions.contains(&r.function) {
            functions.push(r.function.clone());
        }
    }
    for function in &functions {
        let subset: Vec<_> = rows
            .iter()
            .filter(|r| &r.function == function)
            .cloned()
            .collect();
        let svg = render_function(function, &subset, metric);
        let path = out_dir.join(format!("{function}.svg"));
        if let Err(e) = fs::write(&path, svg) {
            eprintln!("cannot write {}: {e}", path.display());
            return 1;
        }
        println!("wrote {}", path.display());
    }
    0
}

pub fn cmd_replay(log_path: &Path) -> i32 {
    let text = match fs::read_to_string(log_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", log_path.display());
            return 1;
        }
    };
    let mut lines = text.lines().enumerate();
    let header: planbo::bench::StudyLogHeader = match lines.next() {
        Some((_, line)) => match serde_json::from_str(line) {
            Ok(h) => h,
            Err(e) => {
                eprintln!("line 1: bad study header: {e}");
                return 1;
            }
        },
        None => {
            eprintln!("line 1: empty log");
            return 1;
        }
    };
    let meta = planbo::StudyMeta::new(
        &format!("replay-{}", header.strategy),
        &header.function,
        header.space.clone(),
    );
    let mut history = planbo::History::new(meta);
    let mut count = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: TrialRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("line {lineno}: bad trial record: {e}");
                return 1;
            }
        };
        if record.trial != history.len() + 1 {
            eprintln!(
                "line {lineno}: trial index {} does not follow {}",
                record.trial,
                history.len()
            );
            return 1;
        }
        history = match planbo::optimizer::tell(
            &history,
            planbo::ParamVector::new(record.x.clone()),
            record.y,
        ) {
            Ok(h) => h,
            Err(e) => {
                eprintln!("line {lineno}: {e}");
                return 1;
            }
        };
        let best = history.best_value().expect("non-empty");
        if best != record.best_so_far {
            eprintln!(
                "line {lineno}: best_so_far {} disagrees with recomputed {}",
                record.best_so_far, best
            );
            return 1;
        }
        count += 1;
    }
    if count == 0 {
        eprintln!("log contains no trials");
        return 1;
    }
    println!(
        "replayed {} / {} / seed {}: {} trials, final best {}",
        header.strategy,
        header.function,
        header.seed,
        count,
        history.best_value().unwrap()
    );
    0
}
