//! Episode and experiment execution.
//!
//! `run_episode` advances one trajectory from the initial state to the goal
//! (or the step cap); `run_replication` strings K episodes into a regret
//! trace; `run_experiment` fans replications out in parallel, aggregates, and
//! persists everything under the configured output directory.

use std::path::PathBuf;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::agents::{Agent, AgentParams, EpochRecord};
use crate::diagnostics::{self, TheoryReport};
use crate::model::{gridworld, random_mdp, SspInstance};
use crate::planner::{solve_optimal, SolverConfig};
use crate::posterior::DirichletBelief;
use crate::scalar::{cast_usize, Scalar};

use super::config::{ExperimentConfig, Mode};
use super::output;
use super::HarnessError;

/// One simulated step, for debug-level audits of an episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord<T> {
    pub state: usize,
    pub action: usize,
    pub cost: T,
    pub next_state: usize,
}

/// Result of simulating a single episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOutcome<T> {
    pub cost: T,
    pub steps: u64,
    /// The episode hit the step cap without reaching the goal.
    pub capped: bool,
}

/// Per-episode cumulative record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRow<T> {
    pub episode: usize,
    pub episode_cost: T,
    pub cum_cost: T,
    pub cum_opt_cost: T,
    pub regret: T,
    pub time_steps: u64,
    pub epochs: usize,
}

/// Full regret trace of one replication plus its run metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace<T> {
    pub rows: Vec<EpisodeRow<T>>,
    pub v_star: T,
    pub capped_episodes: usize,
    pub agent_seed: u64,
    pub config_hash: u64,
}

impl<T: Scalar> RegretTrace<T> {
    pub fn final_regret(&self) -> T {
        self.rows.last().map(|r| r.regret).unwrap_or_else(T::zero)
    }

    pub fn final_time_steps(&self) -> u64 {
        self.rows.last().map(|r| r.time_steps).unwrap_or(0)
    }

    pub fn final_epochs(&self) -> usize {
        self.rows.last().map(|r| r.epochs).unwrap_or(0)
    }

    pub fn regret_curve(&self) -> Vec<T> {
        self.rows.iter().map(|r| r.regret).collect()
    }
}

/// Fill `cum_opt_cost` and `regret` from the cumulative costs and the optimal
/// value of the initial state: `regret_k = C_k - k * v_star`.
pub fn compute_regret<T: Scalar>(trace: &mut RegretTrace<T>, v_star: T) {
    trace.v_star = v_star;
    for row in &mut trace.rows {
        row.cum_opt_cost = cast_usize::<T>(row.episode) * v_star;
        row.regret = row.cum_cost - row.cum_opt_cost;
    }
}

/// Simulate one episode: from the initial state until absorption, each step
/// runs the epoch trigger, the policy action, the true-kernel transition, and
/// the posterior/count updates, in that order.
pub fn run_episode<T: Scalar, R: Rng + ?Sized>(
    instance: &SspInstance<T>,
    agent: &mut Agent<T>,
    episode: usize,
    rng: &mut R,
    step_cap: u64,
    mut step_log: Option<&mut Vec<StepRecord<T>>>,
) -> Result<EpisodeOutcome<T>, HarnessError> {
    let goal = instance.goal();
    let mut state = instance.initial_state();
    let mut cost = T::zero();
    let mut steps = 0u64;
    loop {
        agent.step_begin(episode, rng)?;
        let action = agent.act(state);
        let next = instance.sample_successor(state, action, rng);
        let step_cost = instance.cost(state, action);
        cost += step_cost;
        steps += 1;
        agent.observe(state, action, next)?;
        if let Some(log) = step_log.as_deref_mut() {
            log.push(StepRecord {
                state,
                action,
                cost: step_cost,
                next_state: next,
            });
        }
        if next == goal {
            return Ok(EpisodeOutcome {
                cost,
                steps,
                capped: false,
            });
        }
        if steps >= step_cap {
            return Ok(EpisodeOutcome {
                cost,
                steps,
                capped: true,
            });
        }
        state = next;
    }
}

/// Run K episodes of one agent on one instance with one seed.
#[allow(clippy::too_many_arguments)]
pub fn run_replication<T: Scalar>(
    instance: &SspInstance<T>,
    params: &AgentParams<T>,
    v_star: T,
    agent_seed: u64,
    episodes: usize,
    step_cap: u64,
    config_hash: u64,
    mut step_log: Option<&mut Vec<StepRecord<T>>>,
) -> Result<(RegretTrace<T>, Vec<EpochRecord>), HarnessError> {
    let mut agent = Agent::new(instance, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(agent_seed);
    let mut rows = Vec::with_capacity(episodes);
    let mut cum_cost = T::zero();
    let mut time_steps = 0u64;
    let mut capped_episodes = 0usize;
    for episode in 1..=episodes {
        let outcome = run_episode(
            instance,
            &mut agent,
            episode,
            &mut rng,
            step_cap,
            step_log.as_deref_mut(),
        )?;
        if outcome.capped {
            capped_episodes += 1;
        }
        cum_cost += outcome.cost;
        time_steps += outcome.steps;
        rows.push(EpisodeRow {
            episode,
            episode_cost: outcome.cost,
            cum_cost,
            cum_opt_cost: T::zero(),
            regret: T::zero(),
            time_steps,
            epochs: agent.epoch.epoch_index,
        });
    }
    // The epoch-count bound is a deterministic consequence of the two
    // stopping criteria; violating it means a bookkeeping bug, so it is
    // enforced on every run (skipping degenerate horizons where ln T
    // collapses the bound).
    if time_steps >= 3 {
        let (bound, satisfied) = diagnostics::epoch_bound_check(
            agent.epoch.epoch_index,
            instance.num_states(),
            instance.num_actions(),
            episodes,
            time_steps,
        );
        if !satisfied {
            return Err(HarnessError::TheoryViolation(format!(
                "observed {} epochs, bound {bound:.3} (K={episodes}, T={time_steps})",
                agent.epoch.epoch_index
            )));
        }
    }
    let mut trace = RegretTrace {
        rows,
        v_star,
        capped_episodes,
        agent_seed,
        config_hash,
    };
    compute_regret(&mut trace, v_star);
    let log = agent.epoch_log().to_vec();
    Ok((trace, log))
}

/// Build the ground-truth environment named by the config.
pub fn build_environment(
    environment: &str,
    env_seed: u64,
) -> Result<SspInstance<f64>, HarnessError> {
    match environment {
        "random-mdp" => Ok(random_mdp(env_seed)),
        "gridworld" => Ok(gridworld()),
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                HarnessError::Config(format!("cannot read instance file '{path}': {e}"))
            })?;
            let instance: SspInstance<f64> = serde_json::from_str(&text)?;
            Ok(instance)
        }
    }
}

/// SplitMix64 step, used to derive independent seed streams.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Everything one experiment produced, already persisted under `out_dir`.
#[derive(Debug)]
pub struct ExperimentSummary {
    pub out_dir: PathBuf,
    pub instances: Vec<SspInstance<f64>>,
    pub traces: Vec<RegretTrace<f64>>,
    pub epoch_logs: Vec<Vec<EpochRecord>>,
    pub report: TheoryReport,
}

impl ExperimentSummary {
    pub fn mean_final_regret(&self) -> f64 {
        let mut finals: Vec<f64> = self.traces.iter().map(|t| t.final_regret()).collect();
        finals.sort_by(f64::total_cmp);
        finals.iter().sum::<f64>() / finals.len() as f64
    }
}

type ReplicationOutput =
    Result<(SspInstance<f64>, RegretTrace<f64>, Vec<EpochRecord>), HarnessError>;

/// Run a full experiment: R replications (in parallel), regret aggregation,
/// theory report, and persistence of every artifact.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary, HarnessError> {
    config.validate()?;
    let base = build_environment(&config.environment, config.env_seed)?;
    base.validate()?;
    let floor = config
        .cost_floor
        .resolve(base.num_states(), base.num_actions(), config.episodes);
    let base = base.perturb_costs(floor)?;
    let delta = config.resolved_delta();
    let config_hash = config.content_hash();
    let params = AgentParams {
        algorithm: config.algorithm,
        prior_alpha: config.prior_alpha,
        delta,
        planner: SolverConfig {
            tolerance: config.tolerance,
            max_iterations: config.max_iterations,
            divergence_cap: 1e9,
        },
    };

    let run_one = |r: usize| -> ReplicationOutput {
        let instance = match config.mode {
            Mode::Frequentist => base.clone(),
            Mode::Bayesian => {
                // Kernel drawn from the prior; costs stay with the generator.
                let prior =
                    DirichletBelief::new(base.num_states(), base.num_actions(), config.prior_alpha)
                        .map_err(crate::agents::AgentError::from)?;
                let mut instance_rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(config.env_seed, r as u64 + 1));
                base.with_kernel(prior.sample_kernel(&mut instance_rng))?
            }
        };
        let v_star = solve_optimal(&instance, &params.planner)?.values[instance.initial_state()];
        let agent_seed = config.agent_seed_base.wrapping_add(r as u64);
        let (trace, log) = run_replication(
            &instance,
            &params,
            v_star,
            agent_seed,
            config.episodes,
            config.step_cap,
            config_hash,
            None,
        )?;
        Ok((instance, trace, log))
    };

    let results: Vec<_> = if config.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..config.replications)
                .into_par_iter()
                .map(run_one)
                .collect()
        })
    } else {
        (0..config.replications)
            .into_par_iter()
            .map(run_one)
            .collect()
    };

    let mut instances = Vec::with_capacity(config.replications);
    let mut traces = Vec::with_capacity(config.replications);
    let mut epoch_logs = Vec::with_capacity(config.replications);
    for (index, result) in results.into_iter().enumerate() {
        let (instance, trace, log) = result.map_err(|source| HarnessError::Replication {
            index,
            source: Box::new(source),
        })?;
        instances.push(instance);
        traces.push(trace);
        epoch_logs.push(log);
    }

    let report = build_theory_report(config, &instances, &traces, &epoch_logs, delta)?;
    output::persist_experiment(config, &instances, &traces, &epoch_logs, &report)?;

    Ok(ExperimentSummary {
        out_dir: config.out_dir.clone(),
        instances,
        traces,
        epoch_logs,
        report,
    })
}

/// Pool the per-replication evidence into one report. The epoch-bound fields
/// describe the replication with the most epochs; coverage pools every
/// (epoch, state, action) triple across replications.
pub fn build_theory_report(
    config: &ExperimentConfig,
    instances: &[SspInstance<f64>],
    traces: &[RegretTrace<f64>],
    epoch_logs: &[Vec<EpochRecord>],
    delta: f64,
) -> Result<TheoryReport, HarnessError> {
    let worst = traces
        .iter()
        .enumerate()
        .max_by_key(|(_, t)| t.final_epochs())
        .ok_or_else(|| HarnessError::Config("no replications".into()))?
        .0;
    let (epoch_bound, _) = diagnostics::epoch_bound_check(
        traces[worst].final_epochs(),
        instances[worst].num_states(),
        instances[worst].num_actions(),
        config.episodes,
        traces[worst].final_time_steps(),
    );
    let mut hits = 0u64;
    let mut total = 0u64;
    for (instance, log) in instances.iter().zip(epoch_logs) {
        let (h, t) = diagnostics::coverage_counts(instance, log, delta);
        hits += h;
        total += t;
    }
    let coverage_rate = if total == 0 {
        1.0
    } else {
        hits as f64 / total as f64
    };
    let curves: Vec<Vec<f64>> = traces.iter().map(|t| t.regret_curve()).collect();
    let regret_slope =
        diagnostics::regret_slope(&curves, &diagnostics::default_checkpoints(config.episodes)).ok();
    Ok(TheoryReport {
        epochs_observed: traces[worst].final_epochs(),
        epoch_bound,
        coverage_rate,
        coverage_target: 1.0 - delta,
        regret_slope,
        time_steps: traces[worst].final_time_steps(),
    })
}
