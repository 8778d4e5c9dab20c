//! Command-line front end: run experiments, re-diagnose stored runs, and
//! solve single instances.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ssp_core::agents::Algorithm;
use ssp_core::harness::{
    build_environment, diagnose_directory, run_experiment, CostFloor, ExperimentConfig, Mode,
};
use ssp_core::model::default_epsilon;
use ssp_core::planner::{model_stats, solve_optimal, SolverConfig};

#[derive(Parser)]
#[command(
    name = "ssp-lab",
    about = "Stochastic-shortest-path learning experiments: posterior sampling vs. optimism vs. certainty equivalence",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a K-episode experiment with R replications and write traces,
    /// aggregates, and a theory report to the output directory.
    Run(RunArgs),
    /// Recompute diagnostics from a stored experiment directory.
    Diagnose(DiagnoseArgs),
    /// Solve an environment exactly and dump the value solution as JSON.
    Plan(PlanArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; command-line flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Environment: random-mdp, gridworld, or an instance file path.
    #[arg(long)]
    env: Option<String>,
    /// Algorithm: psrl, optimism, or greedy.
    #[arg(long)]
    algo: Option<Algorithm>,
    /// Episodes per replication (K).
    #[arg(long)]
    episodes: Option<usize>,
    /// Number of replications (R).
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long = "env-seed")]
    env_seed: Option<u64>,
    /// Base agent seed; replication r uses base + r.
    #[arg(long = "agent-seed")]
    agent_seed: Option<u64>,
    #[arg(long = "prior-alpha")]
    prior_alpha: Option<f64>,
    /// Confidence level for the optimism baseline and diagnostics
    /// (default 1/K).
    #[arg(long)]
    delta: Option<f64>,
    /// Cost floor: "auto" for the dimension formula, or a number (0 disables).
    #[arg(long = "cost-floor")]
    cost_floor: Option<CostFloor>,
    /// frequentist (fixed instance) or bayesian (kernel drawn from the prior
    /// per replication).
    #[arg(long)]
    mode: Option<Mode>,
    /// Planner sup-norm tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long = "max-iterations")]
    max_iterations: Option<usize>,
    /// Per-episode step cap; capped episodes are flagged, not fatal.
    #[arg(long = "step-cap")]
    step_cap: Option<u64>,
    /// Worker threads for replications (0 = default).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Experiment directory written by `run`.
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Args)]
struct PlanArgs {
    /// Environment: random-mdp, gridworld, or an instance file path.
    #[arg(long)]
    env: String,
    #[arg(long = "env-seed", default_value_t = 0)]
    env_seed: u64,
    /// Cost floor applied before solving ("auto" or a number).
    #[arg(long = "cost-floor")]
    cost_floor: Option<CostFloor>,
    /// Episode count used only to resolve an "auto" cost floor.
    #[arg(long, default_value_t = 10_000)]
    episodes: usize,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Also print optimal-policy summary statistics to stderr.
    #[arg(long, default_value_t = false)]
    stats: bool,
    /// Output file for the value solution JSON.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Diagnose(args) => diagnose(args),
        Command::Plan(args) => plan(args),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .with_context(|| format!("parsing config file {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(env) = args.env {
        config.environment = env;
    }
    if let Some(algo) = args.algo {
        config.algorithm = algo;
    }
    if let Some(episodes) = args.episodes {
        config.episodes = episodes;
    }
    if let Some(runs) = args.runs {
        config.replications = runs;
    }
    if let Some(seed) = args.env_seed {
        config.env_seed = seed;
    }
    if let Some(seed) = args.agent_seed {
        config.agent_seed_base = seed;
    }
    if let Some(alpha) = args.prior_alpha {
        config.prior_alpha = alpha;
    }
    if let Some(delta) = args.delta {
        config.delta = Some(delta);
    }
    if let Some(floor) = args.cost_floor {
        config.cost_floor = floor;
    }
    if let Some(mode) = args.mode {
        config.mode = mode;
    }
    if let Some(tolerance) = args.tolerance {
        config.tolerance = tolerance;
    }
    if let Some(max_iterations) = args.max_iterations {
        config.max_iterations = max_iterations;
    }
    if let Some(step_cap) = args.step_cap {
        config.step_cap = step_cap;
    }
    if let Some(threads) = args.threads {
        config.threads = threads;
    }
    if let Some(out) = args.out {
        config.out_dir = out;
    }

    let summary = run_experiment(&config).context("experiment failed")?;
    println!(
        "env={} algo={} mode={:?} K={} R={}",
        config.environment, config.algorithm, config.mode, config.episodes, config.replications
    );
    println!("mean final regret: {}", summary.mean_final_regret());
    println!(
        "epochs: {} (bound {:.1}); coverage {:.4} (target {:.4}); slope {}",
        summary.report.epochs_observed,
        summary.report.epoch_bound,
        summary.report.coverage_rate,
        summary.report.coverage_target,
        summary
            .report
            .regret_slope
            .map(|s| format!("{s:.3}"))
            .unwrap_or_else(|| "n/a".to_string())
    );
    println!("wrote {}", summary.out_dir.display());
    Ok(())
}

fn diagnose(args: DiagnoseArgs) -> Result<()> {
    let outcome = diagnose_directory(&args.input)
        .with_context(|| format!("diagnosing {}", args.input.display()))?;
    println!("{}", serde_json::to_string_pretty(&outcome)?);
    if !outcome.epoch_bound_satisfied {
        bail!("epoch-count bound violated in at least one replication");
    }
    if !outcome.episode_counts_monotone {
        bail!("per-epoch episode counts violated the +1 growth rule");
    }
    Ok(())
}

fn plan(args: PlanArgs) -> Result<()> {
    let instance = build_environment(&args.env, args.env_seed)?;
    let floor = match args.cost_floor {
        Some(CostFloor::Auto) => {
            default_epsilon(instance.num_states(), instance.num_actions(), args.episodes)
        }
        Some(CostFloor::Value(v)) => v,
        None => 0.0,
    };
    let instance = instance.perturb_costs(floor)?;
    let config = SolverConfig {
        tolerance: args.tolerance.unwrap_or(1e-10),
        ..SolverConfig::default()
    };
    let solution = solve_optimal(&instance, &config)?;
    std::fs::write(&args.out, serde_json::to_string_pretty(&solution)?)
        .with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!(
        "solved {} states in {} iterations (residual {:e})",
        instance.num_states(),
        solution.iterations,
        solution.residual
    );
    if args.stats {
        let stats = model_stats(&instance, &config)?;
        eprintln!(
            "b_star={} t_star={} c_min={}",
            stats.b_star, stats.t_star, stats.c_min
        );
    }
    println!("wrote {}", args.out.display());
    Ok(())
}
