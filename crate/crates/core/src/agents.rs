//! Learning agents sharing one epoch schedule.
//!
//! All three agents follow the same two stopping criteria for epochs: a new
//! epoch starts when the episodes completed in the current epoch exceed the
//! count of the previous epoch, or when the visit count of any state-action
//! pair doubles relative to its epoch-start snapshot. They differ only in how
//! the policy is computed at an epoch start:
//!
//! * `psrl` plans against a kernel sampled from the Dirichlet posterior;
//! * `greedy` plans against the posterior mean (certainty equivalence);
//! * `optimism` plans against the most favorable kernel inside a per-entry
//!   Bernstein confidence set around the empirical transition probabilities.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::str::FromStr;
use thiserror::Error;

use crate::model::{ModelError, SspInstance};
use crate::planner::{solve_optimal, PlannerError, SolverConfig, ValueSolution};
use crate::posterior::{DirichletBelief, PosteriorError};
use crate::scalar::{cast, cast_usize, Scalar};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("planner failed at epoch start: {0}")]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
    #[error("sampled kernel rejected: {0}")]
    Model(#[from] ModelError),
    #[error("epoch bookkeeping violated: {0}")]
    Bookkeeping(String),
    #[error("invalid agent parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Psrl,
    Optimism,
    Greedy,
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "psrl" => Ok(Algorithm::Psrl),
            "optimism" => Ok(Algorithm::Optimism),
            "greedy" => Ok(Algorithm::Greedy),
            other => Err(format!(
                "unknown algorithm '{other}' (expected psrl|optimism|greedy)"
            )),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Psrl => "psrl",
            Algorithm::Optimism => "optimism",
            Algorithm::Greedy => "greedy",
        })
    }
}

/// Why an epoch started.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriggerReason {
    Init,
    Episodes,
    Doubling,
}

impl std::fmt::Display for TriggerReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TriggerReason::Init => "init",
            TriggerReason::Episodes => "episodes",
            TriggerReason::Doubling => "doubling",
        })
    }
}

/// Epoch bookkeeping: index, start markers, visit counts and the snapshot
/// frozen at the epoch start, plus the policy in force.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochState {
    pub epoch_index: usize,
    /// Time step at which the current epoch started (time starts at 1).
    pub epoch_start_time: u64,
    /// Episode during which the current epoch started.
    pub epoch_start_episode: usize,
    /// Episodes completed in the previous epoch.
    pub prev_epoch_episodes: usize,
    /// Visits per state-action pair so far (before the current time step).
    pub visit_counts: Vec<u64>,
    /// Visit counts frozen when the current epoch started.
    pub visit_snapshot: Vec<u64>,
    /// Action per state; empty until the first epoch begins.
    pub current_policy: Vec<usize>,
}

impl EpochState {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        EpochState {
            epoch_index: 0,
            epoch_start_time: 0,
            epoch_start_episode: 0,
            prev_epoch_episodes: 0,
            visit_counts: vec![0; num_states * num_actions],
            visit_snapshot: vec![0; num_states * num_actions],
            current_policy: Vec::new(),
        }
    }

    /// Epoch trigger, evaluated at the top of every time step: episodes in
    /// the current epoch exceed the previous epoch's count, or some pair's
    /// visits more than doubled since the snapshot. Both inequalities strict.
    pub fn should_start_new_epoch(&self, episode: usize) -> bool {
        episode - self.epoch_start_episode > self.prev_epoch_episodes
            || self.doubled_pair().is_some()
    }

    fn doubled_pair(&self) -> Option<usize> {
        self.visit_counts
            .iter()
            .zip(&self.visit_snapshot)
            .position(|(&n, &snap)| n > 2 * snap)
    }

    /// Post-trigger invariant: no pair with a positive snapshot may exceed
    /// twice its snapshot, and pairs with a zero snapshot may hold at most
    /// one visit.
    pub fn check_snapshot_invariant(&self) -> Result<(), AgentError> {
        for (idx, (&n, &snap)) in self
            .visit_counts
            .iter()
            .zip(&self.visit_snapshot)
            .enumerate()
        {
            let ok = if snap == 0 { n <= 1 } else { n <= 2 * snap };
            if !ok {
                return Err(AgentError::Bookkeeping(format!(
                    "pair {idx}: visits {n} exceed doubling budget of snapshot {snap}"
                )));
            }
        }
        Ok(())
    }

    pub fn record_visit(&mut self, state: usize, action: usize, num_actions: usize) {
        self.visit_counts[state * num_actions + action] += 1;
    }
}

/// One row per epoch, emitted to the trace sink. The count snapshots back
/// the coverage diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub index: usize,
    pub start_time: u64,
    pub start_episode: usize,
    /// Episode count of the epoch that just closed.
    pub prev_episodes: usize,
    pub trigger: TriggerReason,
    pub visit_snapshot: Vec<u64>,
    pub successor_snapshot: Vec<u64>,
}

/// Bernstein confidence-set geometry for a state-action pair with `n`
/// epoch-start visits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceParams<T> {
    pub delta: T,
    pub num_states: usize,
    pub num_actions: usize,
}

impl<T: Scalar> ConfidenceParams<T> {
    pub fn n_plus(n: u64) -> u64 {
        n.max(1)
    }

    /// `ln(S A n+ / delta) / n+`.
    pub fn radius_term(&self, n: u64) -> T {
        let n_plus = cast::<T>(Self::n_plus(n) as f64);
        let arg = cast_usize::<T>(self.num_states * self.num_actions) * n_plus / self.delta;
        arg.ln() / n_plus
    }

    /// Per-entry radius `4 sqrt(theta_hat * A) + 28 A` around an empirical
    /// transition probability.
    pub fn entry_radius(&self, theta_hat: T, radius_term: T) -> T {
        cast::<T>(4.0) * (theta_hat * radius_term).sqrt() + cast::<T>(28.0) * radius_term
    }
}

/// Whether `theta_row` deviates from the empirical row by at most the
/// per-entry Bernstein radius in every coordinate.
pub fn in_confidence_set<T: Scalar>(
    theta_row: &[T],
    theta_hat_row: &[T],
    n: u64,
    num_states: usize,
    num_actions: usize,
    delta: T,
) -> bool {
    let params = ConfidenceParams {
        delta,
        num_states,
        num_actions,
    };
    let a_term = params.radius_term(n);
    theta_row
        .iter()
        .zip(theta_hat_row)
        .all(|(&p, &p_hat)| (p - p_hat).abs() <= params.entry_radius(p_hat, a_term))
}

/// Empirical transition rows from integer visit data; rows with zero visits
/// are all-zero (their confidence radius covers the whole simplex anyway).
pub fn empirical_kernel<T: Scalar>(
    visit_counts: &[u64],
    successor_counts: &[u64],
    num_states: usize,
    num_actions: usize,
) -> Vec<T> {
    let row_len = num_states + 1;
    let mut kernel = vec![T::zero(); num_states * num_actions * row_len];
    for pair in 0..num_states * num_actions {
        let n = visit_counts[pair];
        if n == 0 {
            continue;
        }
        let denom = cast::<T>(n as f64);
        for next in 0..row_len {
            kernel[pair * row_len + next] =
                cast::<T>(successor_counts[pair * row_len + next] as f64) / denom;
        }
    }
    kernel
}

/// Extended value iteration against the most favorable kernel inside the
/// per-entry Bernstein set: each sweep rebuilds, for every pair, the row that
/// moves mass (up to that entry's radius) onto the successor with the lowest
/// current value and strips it from the highest-value successors, clipping to
/// `[0, 1]`; iteration continues until the joint fixed point stabilizes.
pub fn optimistic_value_iteration<T: Scalar>(
    costs: &[T],
    visit_counts: &[u64],
    successor_counts: &[u64],
    num_states: usize,
    num_actions: usize,
    confidence: &ConfidenceParams<T>,
    config: &SolverConfig<T>,
) -> Result<ValueSolution<T>, PlannerError> {
    config.validate()?;
    let row_len = num_states + 1;
    let theta_hat = empirical_kernel::<T>(visit_counts, successor_counts, num_states, num_actions);
    let mut radii = Vec::with_capacity(theta_hat.len());
    for pair in 0..num_states * num_actions {
        let a_term = confidence.radius_term(visit_counts[pair]);
        for next in 0..row_len {
            radii.push(confidence.entry_radius(theta_hat[pair * row_len + next], a_term));
        }
    }

    let mut values = vec![T::zero(); num_states];
    let mut order: Vec<usize> = (0..row_len).collect();
    let mut row_buf = vec![T::zero(); row_len];
    let mut residual = T::infinity();
    let value_of = |values: &[T], idx: usize| {
        if idx == num_states {
            T::zero()
        } else {
            values[idx]
        }
    };

    for iteration in 1..=config.max_iterations {
        // Successors ordered by current value, goal (value 0) included; ties
        // break toward the smaller index.
        order.sort_by(|&a, &b| {
            value_of(&values, a)
                .partial_cmp(&value_of(&values, b))
                .unwrap()
                .then(a.cmp(&b))
        });
        let best = order[0];

        let mut next_values = Vec::with_capacity(num_states);
        let mut policy = Vec::with_capacity(num_states);
        for s in 0..num_states {
            let mut best_q = T::infinity();
            let mut best_action = 0;
            for a in 0..num_actions {
                let pair = s * num_actions + a;
                let base = pair * row_len;
                row_buf.copy_from_slice(&theta_hat[base..base + row_len]);
                row_buf[best] = (row_buf[best] + radii[base + best]).min(T::one());
                let mut excess = row_buf.iter().copied().sum::<T>() - T::one();
                for &idx in order.iter().rev() {
                    if excess <= T::zero() {
                        break;
                    }
                    if idx == best {
                        continue;
                    }
                    let take = row_buf[idx].min(excess);
                    row_buf[idx] -= take;
                    excess -= take;
                }
                if excess < T::zero() {
                    // Sub-stochastic leftovers (possible only when the radius
                    // cannot fill the row) go to the preferred successor.
                    row_buf[best] -= excess;
                }
                let mut expected = T::zero();
                for (next, &p) in row_buf[..num_states].iter().enumerate() {
                    expected += p * values[next];
                }
                let q = costs[pair] + expected;
                if q < best_q {
                    best_q = q;
                    best_action = a;
                }
            }
            next_values.push(best_q);
            policy.push(best_action);
        }

        residual = values
            .iter()
            .zip(&next_values)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max);
        let max_value = next_values.iter().copied().fold(T::zero(), T::max);
        if max_value > config.divergence_cap {
            return Err(PlannerError::Divergence {
                value: max_value.to_f64().unwrap_or(f64::NAN),
                cap: config.divergence_cap.to_f64().unwrap_or(f64::NAN),
                iterations: iteration,
            });
        }
        values = next_values;
        if residual <= config.tolerance {
            return Ok(ValueSolution {
                values,
                policy,
                residual,
                iterations: iteration,
            });
        }
    }
    Err(PlannerError::MaxIterations {
        residual: residual.to_f64().unwrap_or(f64::NAN),
        tolerance: config.tolerance.to_f64().unwrap_or(f64::NAN),
        iterations: config.max_iterations,
    })
}

/// Agent construction parameters.
#[derive(Debug, Clone)]
pub struct AgentParams<T> {
    pub algorithm: Algorithm,
    pub prior_alpha: T,
    pub delta: T,
    pub planner: SolverConfig<T>,
}

/// A learning agent: belief, epoch state machine, and per-epoch policy
/// computation. The agent sees the instance's dimensions and cost table only;
/// the true kernel stays with the environment.
#[derive(Debug, Clone)]
pub struct Agent<T> {
    algorithm: Algorithm,
    num_states: usize,
    num_actions: usize,
    costs: Vec<T>,
    initial_state: usize,
    delta: T,
    planner_config: SolverConfig<T>,
    pub epoch: EpochState,
    belief: DirichletBelief<T>,
    successor_counts: Vec<u64>,
    time: u64,
    log: Vec<EpochRecord>,
}

impl<T: Scalar> Agent<T> {
    pub fn new(instance: &SspInstance<T>, params: &AgentParams<T>) -> Result<Self, AgentError> {
        if params.delta <= T::zero() || params.delta >= T::one() || params.delta.is_nan() {
            return Err(AgentError::InvalidParams(format!(
                "delta must lie in (0, 1), got {}",
                params.delta
            )));
        }
        let num_states = instance.num_states();
        let num_actions = instance.num_actions();
        Ok(Agent {
            algorithm: params.algorithm,
            num_states,
            num_actions,
            costs: instance.costs().to_vec(),
            initial_state: instance.initial_state(),
            delta: params.delta,
            planner_config: params.planner,
            epoch: EpochState::new(num_states, num_actions),
            belief: DirichletBelief::new(num_states, num_actions, params.prior_alpha)?,
            successor_counts: vec![0; num_states * num_actions * (num_states + 1)],
            time: 1,
            log: Vec::new(),
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn belief(&self) -> &DirichletBelief<T> {
        &self.belief
    }

    pub fn successor_counts(&self) -> &[u64] {
        &self.successor_counts
    }

    pub fn epoch_log(&self) -> &[EpochRecord] {
        &self.log
    }

    /// Current time step (starts at 1, advances with every observation).
    pub fn time(&self) -> u64 {
        self.time
    }

    /// Top-of-step hook: evaluate both epoch triggers before any action is
    /// selected, begin a new epoch if either fires, then verify the doubling
    /// invariant. Returns the trigger reason when an epoch started.
    pub fn step_begin<R: Rng + ?Sized>(
        &mut self,
        episode: usize,
        rng: &mut R,
    ) -> Result<Option<TriggerReason>, AgentError> {
        let trigger = if self.epoch.epoch_index == 0 {
            Some(TriggerReason::Init)
        } else if episode - self.epoch.epoch_start_episode > self.epoch.prev_epoch_episodes {
            Some(TriggerReason::Episodes)
        } else if self.epoch.should_start_new_epoch(episode) {
            Some(TriggerReason::Doubling)
        } else {
            None
        };
        if let Some(reason) = trigger {
            self.begin_epoch(episode, reason, rng)?;
        }
        self.epoch.check_snapshot_invariant()?;
        Ok(trigger)
    }

    /// Close the current epoch and open the next: record the closing epoch's
    /// episode count, freeze the visit snapshot, and recompute the policy
    /// according to the algorithm. Planner failures abort the run; the draw
    /// is never retried.
    pub fn begin_epoch<R: Rng + ?Sized>(
        &mut self,
        episode: usize,
        trigger: TriggerReason,
        rng: &mut R,
    ) -> Result<(), AgentError> {
        let closing_episodes = episode - self.epoch.epoch_start_episode;
        if self.epoch.epoch_index > 0 && closing_episodes > self.epoch.prev_epoch_episodes + 1 {
            return Err(AgentError::Bookkeeping(format!(
                "epoch {} closed with {} episodes, exceeding previous count {} + 1",
                self.epoch.epoch_index, closing_episodes, self.epoch.prev_epoch_episodes
            )));
        }
        self.epoch.prev_epoch_episodes = closing_episodes;
        self.epoch.epoch_index += 1;
        self.epoch.epoch_start_time = self.time;
        self.epoch.epoch_start_episode = episode;
        self.epoch.visit_snapshot = self.epoch.visit_counts.clone();

        let solution = match self.algorithm {
            Algorithm::Psrl => {
                let kernel = self.belief.sample_kernel(rng);
                self.solve_on_kernel(kernel)?
            }
            Algorithm::Greedy => self.solve_on_kernel(self.belief.posterior_mean())?,
            Algorithm::Optimism => optimistic_value_iteration(
                &self.costs,
                &self.epoch.visit_snapshot,
                &self.successor_counts,
                self.num_states,
                self.num_actions,
                &ConfidenceParams {
                    delta: self.delta,
                    num_states: self.num_states,
                    num_actions: self.num_actions,
                },
                &self.planner_config,
            )?,
        };
        self.epoch.current_policy = solution.policy;

        self.log.push(EpochRecord {
            index: self.epoch.epoch_index,
            start_time: self.epoch.epoch_start_time,
            start_episode: self.epoch.epoch_start_episode,
            prev_episodes: self.epoch.prev_epoch_episodes,
            trigger,
            visit_snapshot: self.epoch.visit_snapshot.clone(),
            successor_snapshot: self.successor_counts.clone(),
        });
        Ok(())
    }

    fn solve_on_kernel(&self, kernel: Vec<T>) -> Result<ValueSolution<T>, AgentError> {
        let planning_instance = SspInstance::new(
            self.num_states,
            self.num_actions,
            self.costs.clone(),
            kernel,
            self.initial_state,
        )?;
        Ok(solve_optimal(&planning_instance, &self.planner_config)?)
    }

    /// Action in force for `state` under the current epoch's policy.
    pub fn act(&self, state: usize) -> usize {
        self.epoch.current_policy[state]
    }

    /// Record an observed transition: conjugate belief update plus visit and
    /// successor counters, then advance time.
    pub fn observe(
        &mut self,
        state: usize,
        action: usize,
        successor: usize,
    ) -> Result<(), AgentError> {
        self.belief.update(state, action, successor)?;
        self.successor_counts
            [(state * self.num_actions + action) * (self.num_states + 1) + successor] += 1;
        self.epoch.record_visit(state, action, self.num_actions);
        self.time += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gridworld;
    use crate::planner::solve_optimal;
    use crate::testutil::{chain, goal_weighted_instance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(algorithm: Algorithm) -> AgentParams<f64> {
        AgentParams {
            algorithm,
            prior_alpha: 0.1,
            delta: 0.1,
            planner: SolverConfig::default(),
        }
    }

    #[test]
    fn first_step_always_starts_an_epoch() {
        let state = EpochState::new(2, 2);
        assert!(state.should_start_new_epoch(1));
    }

    #[test]
    fn doubling_trigger_uses_strict_inequality() {
        let mut state = EpochState::new(1, 1);
        state.visit_snapshot = vec![2];
        state.visit_counts = vec![4];
        state.prev_epoch_episodes = 100;
        state.epoch_start_episode = 1;
        assert!(!state.should_start_new_epoch(1));
        state.visit_counts = vec![5];
        assert!(state.should_start_new_epoch(1));
    }

    #[test]
    fn episode_trigger_boundary_is_strict() {
        let mut state = EpochState::new(1, 1);
        state.epoch_index = 3;
        state.epoch_start_episode = 10;
        state.prev_epoch_episodes = 4;
        state.visit_snapshot = vec![5];
        state.visit_counts = vec![6];
        // k - k_epoch equals the previous count exactly: no trigger.
        assert!(!state.should_start_new_epoch(14));
        assert!(state.should_start_new_epoch(15));
    }

    #[test]
    fn snapshot_invariant_flags_violations() {
        let mut state = EpochState::new(1, 2);
        state.visit_snapshot = vec![0, 3];
        state.visit_counts = vec![1, 6];
        state.check_snapshot_invariant().unwrap();
        state.visit_counts = vec![2, 6];
        assert!(state.check_snapshot_invariant().is_err());
        state.visit_counts = vec![1, 7];
        assert!(state.check_snapshot_invariant().is_err());
    }

    #[test]
    fn concentrated_belief_recovers_the_true_optimal_policy() {
        let inst = goal_weighted_instance::<f64>(3, 2, 9, 0.3);
        // Feed each row ~1e5 observations proportional to the true kernel so
        // the posterior concentrates on the truth.
        let feed = |agent: &mut Agent<f64>| {
            for s in 0..3 {
                for a in 0..2 {
                    for (next, &p) in inst.kernel_row(s, a).to_vec().iter().enumerate() {
                        for _ in 0..(p * 1e5).round() as u64 {
                            agent.observe(s, a, next).unwrap();
                        }
                    }
                }
            }
        };
        let truth = solve_optimal(&inst, &SolverConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);

        let mut agent = Agent::new(&inst, &params(Algorithm::Psrl)).unwrap();
        feed(&mut agent);
        agent.begin_epoch(1, TriggerReason::Init, &mut rng).unwrap();
        assert_eq!(agent.epoch.current_policy, truth.policy);

        let mut greedy = Agent::new(&inst, &params(Algorithm::Greedy)).unwrap();
        feed(&mut greedy);
        greedy
            .begin_epoch(1, TriggerReason::Init, &mut rng)
            .unwrap();
        assert_eq!(greedy.epoch.current_policy, truth.policy);
    }

    #[test]
    fn closing_an_epoch_records_its_episode_count() {
        let inst = goal_weighted_instance::<f64>(3, 2, 2, 0.3);
        let mut agent = Agent::new(&inst, &params(Algorithm::Greedy)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        agent.begin_epoch(2, TriggerReason::Init, &mut rng).unwrap();
        // Three episodes complete before the next trigger.
        agent
            .begin_epoch(5, TriggerReason::Episodes, &mut rng)
            .unwrap();
        assert_eq!(agent.epoch.prev_epoch_episodes, 3);
        assert_eq!(agent.epoch.epoch_start_episode, 5);
    }

    #[test]
    fn fresh_greedy_agent_plans_on_the_uniform_kernel() {
        let inst = goal_weighted_instance::<f64>(3, 2, 6, 0.2);
        let mut agent = Agent::new(&inst, &params(Algorithm::Greedy)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        agent.begin_epoch(1, TriggerReason::Init, &mut rng).unwrap();
        // The fresh posterior mean is the uniform kernel over S+1 outcomes.
        let uniform = vec![0.25f64; 3 * 2 * 4];
        let uniform_instance = inst.with_kernel(uniform).unwrap();
        let expected = solve_optimal(&uniform_instance, &SolverConfig::default()).unwrap();
        assert_eq!(agent.epoch.current_policy, expected.policy);
    }

    #[test]
    fn act_is_stationary_within_an_epoch() {
        let inst = chain::<f64>();
        let mut agent = Agent::new(&inst, &params(Algorithm::Psrl)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        agent.step_begin(1, &mut rng).unwrap();
        let a1 = agent.act(0);
        let a2 = agent.act(0);
        assert_eq!(a1, a2);
        assert_eq!(agent.epoch_log().len(), 1);
        assert_eq!(agent.epoch_log()[0].trigger, TriggerReason::Init);
        assert_eq!(agent.epoch_log()[0].prev_episodes, 1);
    }

    #[test]
    fn confidence_set_accepts_exact_match_and_small_samples() {
        let theta = [0.25, 0.25, 0.5];
        assert!(in_confidence_set(&theta, &theta, 1000, 2, 2, 0.1));
        // n = 100: radius at theta_hat = 0.5 is about 3.14, so any
        // probability coordinate passes.
        let params = ConfidenceParams::<f64> {
            delta: 0.1,
            num_states: 2,
            num_actions: 2,
        };
        let a_term = params.radius_term(100);
        assert!((a_term - 0.08294049640102027).abs() < 1e-12);
        assert!((params.entry_radius(0.5, a_term) - 3.1369037066779732).abs() < 1e-10);
        let far = [1.0, 0.0, 0.0];
        let hat = [0.5, 0.25, 0.25];
        assert!(in_confidence_set(&far, &hat, 100, 2, 2, 0.1));
    }

    #[test]
    fn confidence_set_rejects_large_deviation_at_large_n() {
        let params = ConfidenceParams::<f64> {
            delta: 0.1,
            num_states: 2,
            num_actions: 2,
        };
        let a_term = params.radius_term(1_000_000);
        assert!((a_term - 1.7504390012078213e-5).abs() < 1e-15);
        let radius = params.entry_radius(0.5, a_term);
        assert!((radius - 0.012323766488429368).abs() < 1e-12);
        let theta = [0.6, 0.2, 0.2];
        let hat = [0.5, 0.3, 0.2];
        assert!(!in_confidence_set(&theta, &hat, 1_000_000, 2, 2, 0.1));
    }

    #[test]
    fn radius_term_uses_n_floor_of_one() {
        let params = ConfidenceParams::<f64> {
            delta: 0.5,
            num_states: 2,
            num_actions: 2,
        };
        assert_eq!(params.radius_term(0), params.radius_term(1));
        assert_eq!(ConfidenceParams::<f64>::n_plus(0), 1);
        assert_eq!(ConfidenceParams::<f64>::n_plus(7), 7);
    }

    #[test]
    fn optimism_with_no_data_plans_straight_to_the_goal() {
        let inst = goal_weighted_instance::<f64>(3, 2, 1, 0.2);
        // Make costs strictly positive so the goal is the unique best successor.
        let costs: Vec<f64> = inst.costs().iter().map(|c| c.max(0.05)).collect();
        let visit = vec![0u64; 6];
        let succ = vec![0u64; 6 * 4];
        let conf = ConfidenceParams {
            delta: 0.1,
            num_states: 3,
            num_actions: 2,
        };
        let sol = optimistic_value_iteration(
            &costs,
            &visit,
            &succ,
            3,
            2,
            &conf,
            &SolverConfig::default(),
        )
        .unwrap();
        for s in 0..3 {
            let min_cost = costs[s * 2].min(costs[s * 2 + 1]);
            assert!(
                (sol.values[s] - min_cost).abs() < 1e-9,
                "state {s}: optimistic value {} vs min cost {min_cost}",
                sol.values[s]
            );
        }
    }

    #[test]
    fn optimistic_removal_strips_mass_from_the_worst_successor_first() {
        // Two states, one action. State 1 always reaches the goal, so its
        // optimistic value is exactly its cost. State 0 splits mass
        // [0.1 self, 0.8 state1, 0.1 goal]; the extra goal radius must be
        // removed from the highest-value successor (the self loop), giving
        // the closed form V0 = (c0 + 0.8 c1) / (0.9 + r_goal).
        let n = 1_000_000u64;
        let visit = [n, n];
        let succ = [n / 10, 8 * n / 10, n / 10, 0, 0, n];
        let costs: [f64; 2] = [1.0, 0.2];
        let conf = ConfidenceParams {
            delta: 0.1,
            num_states: 2,
            num_actions: 1,
        };
        let sol = optimistic_value_iteration(
            &costs,
            &visit,
            &succ,
            2,
            1,
            &conf,
            &SolverConfig::default(),
        )
        .unwrap();
        assert!((sol.values[1] - 0.2).abs() < 1e-12);
        let a_term = (2.0f64 * 1.0 * n as f64 / 0.1).ln() / n as f64;
        let r_goal = 4.0 * (0.1 * a_term).sqrt() + 28.0 * a_term;
        let expected0 = (1.0 + 0.8 * 0.2) / (0.9 + r_goal);
        assert!(
            (sol.values[0] - expected0).abs() < 1e-8,
            "state 0: {} vs closed form {expected0}",
            sol.values[0]
        );
    }

    #[test]
    fn optimistic_fixed_point_matches_closed_form_on_one_state() {
        // One state, one action, half the mass on the goal. With n = 1e6 the
        // radius is small and the optimistic row moves exactly the per-entry
        // radius of the goal coordinate onto the goal, giving
        // V = 1 / (0.5 + radius).
        let n = 1_000_000u64;
        let visit = [n];
        let succ = [n / 2, n / 2];
        let conf = ConfidenceParams {
            delta: 0.1,
            num_states: 1,
            num_actions: 1,
        };
        let sol = optimistic_value_iteration(
            &[1.0],
            &visit,
            &succ,
            1,
            1,
            &conf,
            &SolverConfig::default(),
        )
        .unwrap();
        let a_term = (1.0f64 * 1.0 * n as f64 / 0.1).ln() / n as f64;
        let radius = 4.0 * (0.5 * a_term).sqrt() + 28.0 * a_term;
        let expected = 1.0 / (0.5 + radius);
        assert!(
            (sol.values[0] - expected).abs() < 1e-8,
            "optimistic value {} vs closed form {expected}",
            sol.values[0]
        );
        assert!(sol.values[0] < 2.0); // true value is 1 / 0.5
    }

    #[test]
    fn optimistic_values_lower_bound_the_truth_under_exact_counts() {
        let inst = chain::<f64>();
        // Exact empirical kernel: counts proportional to the deterministic rows.
        let n = 1_000_000u64;
        let visit = vec![n, n];
        let mut succ = vec![0u64; 2 * 3];
        succ[1] = n; // row of state 0: everything lands in state 1
        succ[5] = n; // row of state 1: everything lands in the goal
        let conf = ConfidenceParams {
            delta: 0.01,
            num_states: 2,
            num_actions: 1,
        };
        let sol = optimistic_value_iteration(
            inst.costs(),
            &visit,
            &succ,
            2,
            1,
            &conf,
            &SolverConfig::default(),
        )
        .unwrap();
        let truth = solve_optimal(&inst, &SolverConfig::default()).unwrap();
        for (o, t) in sol.values.iter().zip(&truth.values) {
            assert!(o <= t);
        }
        // Values stay close to the truth once counts are large.
        assert!((sol.values[0] - truth.values[0]).abs() < 0.2);
    }

    #[test]
    fn gridworld_agents_run_deterministically() {
        let g = gridworld::<f64>();
        let run = |seed: u64| -> Vec<usize> {
            let mut agent = Agent::new(&g, &params(Algorithm::Psrl)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut visited = Vec::new();
            for episode in 1..=3usize {
                let mut s = g.initial_state();
                for _ in 0..200 {
                    agent.step_begin(episode, &mut rng).unwrap();
                    let a = agent.act(s);
                    let next = g.sample_successor(s, a, &mut rng);
                    agent.observe(s, a, next).unwrap();
                    visited.push(a);
                    if next == g.goal() {
                        break;
                    }
                    s = next;
                }
            }
            visited
        };
        assert_eq!(run(11), run(11));
    }
}
