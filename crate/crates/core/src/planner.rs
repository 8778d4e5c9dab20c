//! Bellman solver for SSP instances.
//!
//! `solve_optimal` runs value iteration from `V = 0` until the sup-norm
//! residual drops below tolerance; `evaluate_policy` solves the absorbing
//! linear system directly and doubles as an independent oracle for tests.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelStats, SspInstance};
use crate::scalar::{cast, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("divergence: value {value} exceeded cap {cap} after {iterations} iterations")]
    Divergence {
        value: f64,
        cap: f64,
        iterations: usize,
    },
    #[error("max-iterations: residual {residual} still above tolerance {tolerance} after {iterations} iterations")]
    MaxIterations {
        residual: f64,
        tolerance: f64,
        iterations: usize,
    },
    #[error("improper-policy: {reason}")]
    ImproperPolicy { reason: String },
    #[error("invalid solver config: {0}")]
    Config(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
}

/// Stopping parameters for value iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig<T> {
    /// Sup-norm residual threshold.
    pub tolerance: T,
    pub max_iterations: usize,
    /// Abort threshold on the largest value; converts improper models into a
    /// typed error instead of an endless loop.
    pub divergence_cap: T,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            tolerance: cast(1e-10),
            max_iterations: 1_000_000,
            divergence_cap: cast(1e9),
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<(), PlannerError> {
        if self.tolerance <= T::zero() || self.tolerance.is_nan() {
            return Err(PlannerError::Config("tolerance must be > 0".into()));
        }
        if self.max_iterations == 0 {
            return Err(PlannerError::Config("max_iterations must be >= 1".into()));
        }
        if self.divergence_cap <= T::zero() || self.divergence_cap.is_nan() {
            return Err(PlannerError::Config("divergence_cap must be > 0".into()));
        }
        Ok(())
    }
}

/// Converged value vector with the greedy policy realizing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueSolution<T> {
    /// Optimal cost-to-go per non-goal state; the goal is implicitly zero.
    pub values: Vec<T>,
    /// Greedy action per state, ties broken toward the smallest index.
    pub policy: Vec<usize>,
    /// Final sup-norm Bellman residual.
    pub residual: T,
    pub iterations: usize,
}

/// One Bellman sweep: `min_a { c(s,a) + sum_{s'} theta(s'|s,a) V(s') }` per
/// state, with `V(goal) = 0`. Returns the updated values and the greedy
/// policy (ties toward the smallest action index).
pub fn bellman_backup<T: Scalar>(instance: &SspInstance<T>, values: &[T]) -> (Vec<T>, Vec<usize>) {
    let s_count = instance.num_states();
    let a_count = instance.num_actions();
    let mut out = Vec::with_capacity(s_count);
    let mut policy = Vec::with_capacity(s_count);
    for s in 0..s_count {
        let mut best = T::infinity();
        let mut best_action = 0;
        for a in 0..a_count {
            let row = instance.kernel_row(s, a);
            let mut expected = T::zero();
            for (next, &p) in row[..s_count].iter().enumerate() {
                expected += p * values[next];
            }
            let q = instance.cost(s, a) + expected;
            if q < best {
                best = q;
                best_action = a;
            }
        }
        out.push(best);
        policy.push(best_action);
    }
    (out, policy)
}

/// Solve the Bellman optimality equations by value iteration from `V = 0`.
pub fn solve_optimal<T: Scalar>(
    instance: &SspInstance<T>,
    config: &SolverConfig<T>,
) -> Result<ValueSolution<T>, PlannerError> {
    config.validate()?;
    let mut values = vec![T::zero(); instance.num_states()];
    let mut residual = T::infinity();
    for iteration in 1..=config.max_iterations {
        let (next, policy) = bellman_backup(instance, &values);
        residual = values
            .iter()
            .zip(&next)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max);
        let max_value = next.iter().copied().fold(T::zero(), T::max);
        if max_value > config.divergence_cap {
            return Err(PlannerError::Divergence {
                value: max_value.to_f64().unwrap_or(f64::NAN),
                cap: config.divergence_cap.to_f64().unwrap_or(f64::NAN),
                iterations: iteration,
            });
        }
        values = next;
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

fn check_policy<T: Scalar>(
    instance: &SspInstance<T>,
    policy: &[usize],
) -> Result<(), PlannerError> {
    if policy.len() != instance.num_states() {
        return Err(PlannerError::InvalidPolicy(format!(
            "length {} does not match {} states",
            policy.len(),
            instance.num_states()
        )));
    }
    if let Some((s, &a)) = policy
        .iter()
        .enumerate()
        .find(|(_, &a)| a >= instance.num_actions())
    {
        return Err(PlannerError::InvalidPolicy(format!(
            "action {} at state {} out of range",
            a, s
        )));
    }
    Ok(())
}

/// Solve `(I - P_pi) x = rhs` where `P_pi` is the sub-kernel over non-goal
/// successors under `policy`. Gaussian elimination with partial pivoting; a
/// vanishing pivot means the chain under `policy` has a recurrent class that
/// never reaches the goal.
fn solve_absorbing_system<T: Scalar>(
    instance: &SspInstance<T>,
    policy: &[usize],
    rhs: &[T],
) -> Result<Vec<T>, PlannerError> {
    let n = instance.num_states();
    let mut m = vec![T::zero(); n * n];
    let mut b = rhs.to_vec();
    for s in 0..n {
        let row = instance.kernel_row(s, policy[s]);
        for next in 0..n {
            m[s * n + next] = if s == next {
                T::one() - row[next]
            } else {
                -row[next]
            };
        }
    }
    let pivot_floor = T::epsilon() * cast::<T>(16.0);
    for col in 0..n {
        let (pivot_row, pivot_abs) = (col..n)
            .map(|r| (r, m[r * n + col].abs()))
            .fold((col, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pivot_abs <= pivot_floor {
            return Err(PlannerError::ImproperPolicy {
                reason: "singular linear system: some state never reaches the goal".into(),
            });
        }
        if pivot_row != col {
            for k in 0..n {
                m.swap(col * n + k, pivot_row * n + k);
            }
            b.swap(col, pivot_row);
        }
        let pivot = m[col * n + col];
        for r in (col + 1)..n {
            let factor = m[r * n + col] / pivot;
            if factor == T::zero() {
                continue;
            }
            for k in col..n {
                let upper = m[col * n + k];
                m[r * n + k] -= factor * upper;
            }
            let pivot_rhs = b[col];
            b[r] -= factor * pivot_rhs;
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= m[row * n + k] * x[k];
        }
        x[row] = acc / m[row * n + row];
    }
    Ok(x)
}

/// Exact value of a fixed stationary policy via a direct linear solve.
pub fn evaluate_policy<T: Scalar>(
    instance: &SspInstance<T>,
    policy: &[usize],
) -> Result<Vec<T>, PlannerError> {
    check_policy(instance, policy)?;
    let rhs: Vec<T> = (0..instance.num_states())
        .map(|s| instance.cost(s, policy[s]))
        .collect();
    let values = solve_absorbing_system(instance, policy, &rhs)?;
    finish_policy_values(values)
}

/// Expected number of steps to absorption from each state under `policy`.
pub fn expected_hitting_times<T: Scalar>(
    instance: &SspInstance<T>,
    policy: &[usize],
) -> Result<Vec<T>, PlannerError> {
    check_policy(instance, policy)?;
    let rhs = vec![T::one(); instance.num_states()];
    let values = solve_absorbing_system(instance, policy, &rhs)?;
    finish_policy_values(values)
}

fn finish_policy_values<T: Scalar>(mut values: Vec<T>) -> Result<Vec<T>, PlannerError> {
    let negative_floor = -T::epsilon().sqrt();
    let cap: T = SolverConfig::<T>::default().divergence_cap;
    for v in &values {
        if !v.is_finite() || *v > cap {
            return Err(PlannerError::ImproperPolicy {
                reason: "value beyond divergence cap".into(),
            });
        }
        if *v < negative_floor {
            return Err(PlannerError::ImproperPolicy {
                reason: "negative solution of the absorbing system".into(),
            });
        }
    }
    for v in &mut values {
        *v = v.max(T::zero());
    }
    Ok(values)
}

/// Optimal-policy summary statistics of an instance.
pub fn model_stats<T: Scalar>(
    instance: &SspInstance<T>,
    config: &SolverConfig<T>,
) -> Result<ModelStats<T>, PlannerError> {
    let solution = solve_optimal(instance, config)?;
    let b_star = solution.values.iter().copied().fold(T::zero(), T::max);
    let hitting = expected_hitting_times(instance, &solution.policy)?;
    let t_star = hitting.iter().copied().fold(T::zero(), T::max);
    Ok(ModelStats {
        b_star,
        t_star,
        c_min: instance.min_cost(),
    })
}
