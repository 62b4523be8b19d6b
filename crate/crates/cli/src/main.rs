mod commands;
mod config;
mod plot;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::Overrides;

#[derive(Parser)]
#[command(
    name = "planbo",
    about = "Rollout-planning hyperparameter optimization: benchmark runner, horizon ablations, plotting, and log replay",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the strategy x function x seed experiment matrix from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = auto).
        #[arg(long)]
        workers: Option<usize>,
        /// Base RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Dump refinement trajectories per trial.
        #[arg(long)]
        dump_trajectories: bool,
        /// Dump per-candidate acquisition scores per trial.
        #[arg(long)]
        dump_scores: bool,
    },
    /// Run the experiment once per rollout horizon and merge the aggregates.
    AblateHorizon {
        #[arg(long)]
        config: PathBuf,
        /// Horizons to sweep.
        #[arg(long, value_delimiter = ',', default_values_t = vec![2usize, 3, 5, 10])]
        horizons: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        dump_trajectories: bool,
        #[arg(long)]
        dump_scores: bool,
    },
    /// Render per-function SVG curves from an aggregate CSV.
    Plot {
        #[arg(long)]
        aggregate: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Which curve to draw: best | regret.
        #[arg(long, default_value = "best")]
        metric: String,
    },
    /// Re-derive a history from a study JSON-lines log and verify invariants.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            config,
            out,
            workers,
            seed,
            dump_trajectories,
            dump_scores,
        } => commands::cmd_run(
            &config,
            &Overrides {
                out,
                workers,
                seed,
                dump_trajectories,
                dump_scores,
            },
        ),
        Command::AblateHorizon {
            config,
            horizons,
            out,
            workers,
            seed,
            dump_trajectories,
            dump_scores,
        } => commands::cmd_ablate_horizon(
            &config,
            &horizons,
            &Overrides {
                out,
                workers,
                seed,
                dump_trajectories,
                dump_scores,
            },
        ),
        Command::Plot {
            aggregate,
            out,
            metric,
        } => commands::cmd_plot(&aggregate, &out, &metric),
        Command::Replay { log } => commands::cmd_replay(&log),
    };
    std::process::exit(code);
}
