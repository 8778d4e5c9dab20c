//! SSP domain model: instances, validation, benchmark generators, and the
//! cost-floor perturbation.
//!
//! An instance has `S` non-goal states indexed `0..S`, `A` actions, a known
//! cost table in `[0, 1]`, and a transition kernel over the `S + 1` outcomes
//! `0..=S` where index `S` is the absorbing goal. The goal has no rows of its
//! own; absorption is handled by episode termination.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{cast, cast_usize, Scalar};

/// Validation and construction failures for SSP instances.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("num_states and num_actions must be positive")]
    EmptyDimensions,
    #[error("{table} has {actual} entries, expected {expected}")]
    Shape {
        table: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("kernel row sum violated at (s={state}, a={action}): sum {sum} differs from 1 by more than {tolerance}")]
    RowSum {
        state: usize,
        action: usize,
        sum: f64,
        tolerance: f64,
    },
    #[error("negative kernel entry at (s={state}, a={action}, s'={successor}): {value}")]
    NegativeKernelEntry {
        state: usize,
        action: usize,
        successor: usize,
        value: f64,
    },
    #[error("cost range violated at (s={state}, a={action}): {value} not in [0, 1]")]
    CostRange {
        state: usize,
        action: usize,
        value: f64,
    },
    #[error("initial state {initial_state} out of range for {num_states} states")]
    InitialStateRange {
        initial_state: usize,
        num_states: usize,
    },
    #[error("non-finite entry in {table} at flat index {index}")]
    NonFinite { table: &'static str, index: usize },
    #[error("cost floor epsilon {value} outside [0, 1]")]
    EpsilonRange { value: f64 },
}

/// Row-sum tolerance scaled to the scalar width: `1e-12` for `f64`, looser
/// for narrower types where normalization noise is larger.
pub fn row_sum_tolerance<T: Scalar>(row_len: usize) -> T {
    let structural: T = cast(1e-12);
    let machine = T::epsilon() * cast::<T>(32.0) * cast_usize::<T>(row_len);
    structural.max(machine)
}

/// A ground-truth stochastic shortest path instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    into = "InstanceRepr<T>",
    try_from = "InstanceRepr<T>",
    bound(serialize = "T: Scalar", deserialize = "T: Scalar")
)]
pub struct SspInstance<T: Scalar> {
    num_states: usize,
    num_actions: usize,
    /// `S x A`, row-major.
    cost: Vec<T>,
    /// `S x A x (S + 1)`, row-major; last successor index is the goal.
    kernel: Vec<T>,
    initial_state: usize,
}

/// JSON wire form: nested arrays, field names fixed by the file format.
#[derive(Serialize, Deserialize)]
struct InstanceRepr<T> {
    num_states: usize,
    num_actions: usize,
    cost: Vec<Vec<T>>,
    kernel: Vec<Vec<Vec<T>>>,
    initial_state: usize,
}

impl<T: Scalar> From<SspInstance<T>> for InstanceRepr<T> {
    fn from(inst: SspInstance<T>) -> Self {
        let s = inst.num_states;
        let a = inst.num_actions;
        let row = s + 1;
        InstanceRepr {
            num_states: s,
            num_actions: a,
            cost: (0..s)
                .map(|i| inst.cost[i * a..(i + 1) * a].to_vec())
                .collect(),
            kernel: (0..s)
                .map(|i| {
                    (0..a)
                        .map(|j| {
                            let base = (i * a + j) * row;
                            inst.kernel[base..base + row].to_vec()
                        })
                        .collect()
                })
                .collect(),
            initial_state: inst.initial_state,
        }
    }
}

impl<T: Scalar> TryFrom<InstanceRepr<T>> for SspInstance<T> {
    type Error = ModelError;

    fn try_from(repr: InstanceRepr<T>) -> Result<Self, ModelError> {
        let cost: Vec<T> = repr.cost.into_iter().flatten().collect();
        let kernel: Vec<T> = repr.kernel.into_iter().flatten().flatten().collect();
        SspInstance::new(
            repr.num_states,
            repr.num_actions,
            cost,
            kernel,
            repr.initial_state,
        )
    }
}

impl<T: Scalar> SspInstance<T> {
    /// Build and validate an instance from flat row-major tables.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        cost: Vec<T>,
        kernel: Vec<T>,
        initial_state: usize,
    ) -> Result<Self, ModelError> {
        let inst = SspInstance {
            num_states,
            num_actions,
            cost,
            kernel,
            initial_state,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Re-check every instance invariant, reporting the first violation with
    /// its `(s, a)` coordinates.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.num_states == 0 || self.num_actions == 0 {
            return Err(ModelError::EmptyDimensions);
        }
        let s = self.num_states;
        let a = self.num_actions;
        let row = s + 1;
        if self.cost.len() != s * a {
            return Err(ModelError::Shape {
                table: "cost",
                expected: s * a,
                actual: self.cost.len(),
            });
        }
        if self.kernel.len() != s * a * row {
            return Err(ModelError::Shape {
                table: "kernel",
                expected: s * a * row,
                actual: self.kernel.len(),
            });
        }
        if self.initial_state >= s {
            return Err(ModelError::InitialStateRange {
                initial_state: self.initial_state,
                num_states: s,
            });
        }
        let tol = row_sum_tolerance::<T>(row);
        for state in 0..s {
            for action in 0..a {
                let c = self.cost[state * a + action];
                if !c.is_finite() {
                    return Err(ModelError::NonFinite {
                        table: "cost",
                        index: state * a + action,
                    });
                }
                if c < T::zero() || c > T::one() {
                    return Err(ModelError::CostRange {
                        state,
                        action,
                        value: c.to_f64().unwrap_or(f64::NAN),
                    });
                }
                let base = (state * a + action) * row;
                let mut sum = T::zero();
                for (successor, &p) in self.kernel[base..base + row].iter().enumerate() {
                    if !p.is_finite() {
                        return Err(ModelError::NonFinite {
                            table: "kernel",
                            index: base + successor,
                        });
                    }
                    if p < T::zero() {
                        return Err(ModelError::NegativeKernelEntry {
                            state,
                            action,
                            successor,
                            value: p.to_f64().unwrap_or(f64::NAN),
                        });
                    }
                    sum += p;
                }
                if (sum - T::one()).abs() > tol {
                    return Err(ModelError::RowSum {
                        state,
                        action,
                        sum: sum.to_f64().unwrap_or(f64::NAN),
                        tolerance: tol.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// The absorbing goal index, by convention `num_states`.
    pub fn goal(&self) -> usize {
        self.num_states
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn cost(&self, state: usize, action: usize) -> T {
        self.cost[state * self.num_actions + action]
    }

    pub fn costs(&self) -> &[T] {
        &self.cost
    }

    /// Transition probabilities over `0..=S` for one state-action pair.
    pub fn kernel_row(&self, state: usize, action: usize) -> &[T] {
        let row = self.num_states + 1;
        let base = (state * self.num_actions + action) * row;
        &self.kernel[base..base + row]
    }

    pub fn kernel(&self) -> &[T] {
        &self.kernel
    }

    /// Minimum cost entry over all state-action pairs.
    pub fn min_cost(&self) -> T {
        self.cost
            .iter()
            .copied()
            .fold(T::infinity(), |acc, c| acc.min(c))
    }

    /// Draw the next state (possibly the goal) from the true kernel.
    pub fn sample_successor<R: Rng + ?Sized>(
        &self,
        state: usize,
        action: usize,
        rng: &mut R,
    ) -> usize {
        let row = self.kernel_row(state, action);
        let u = T::sample_unit(rng);
        let mut acc = T::zero();
        let mut last_positive = self.goal();
        for (i, &p) in row.iter().enumerate() {
            if p > T::zero() {
                acc += p;
                last_positive = i;
                if u < acc {
                    return i;
                }
            }
        }
        last_positive
    }

    /// Copy with costs floored entrywise at `epsilon`; the kernel is unchanged.
    pub fn perturb_costs(&self, epsilon: T) -> Result<SspInstance<T>, ModelError> {
        if epsilon < T::zero() || epsilon > T::one() || epsilon.is_nan() {
            return Err(ModelError::EpsilonRange {
                value: epsilon.to_f64().unwrap_or(f64::NAN),
            });
        }
        let mut out = self.clone();
        for c in &mut out.cost {
            *c = c.max(epsilon);
        }
        Ok(out)
    }

    /// Copy with the kernel replaced; dimensions and costs are kept.
    pub fn with_kernel(&self, kernel: Vec<T>) -> Result<SspInstance<T>, ModelError> {
        SspInstance::new(
            self.num_states,
            self.num_actions,
            self.cost.clone(),
            kernel,
            self.initial_state,
        )
    }
}

/// Summary statistics of an instance under its optimal policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelStats<T> {
    /// Maximum optimal cost-to-go over states.
    pub b_star: T,
    /// Maximum expected goal-hitting time of the optimal policy over states.
    pub t_star: T,
    /// Minimum cost entry.
    pub c_min: T,
}

/// Cost floor from the problem dimensions: `(S^2 A / K)^(2/3)`.
pub fn default_epsilon<T: Scalar>(num_states: usize, num_actions: usize, episodes: usize) -> T {
    let ratio = cast_usize::<T>(num_states * num_states * num_actions) / cast_usize::<T>(episodes);
    ratio.powf(cast::<T>(2.0) / cast::<T>(3.0))
}

/// A uniformly random instance: kernel rows drawn uniformly from the
/// probability simplex over `S + 1` outcomes, costs uniform on `[0, 1]`.
/// Pure function of the seed.
pub fn random_instance<T: Scalar>(
    num_states: usize,
    num_actions: usize,
    seed: u64,
) -> SspInstance<T> {
    assert!(num_states > 0 && num_actions > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let row = num_states + 1;
    let mut kernel = Vec::with_capacity(num_states * num_actions * row);
    for _ in 0..num_states * num_actions {
        let mut entries = Vec::with_capacity(row);
        let mut total = T::zero();
        for _ in 0..row {
            let mut g = T::sample_standard_gamma(&mut rng, T::one());
            while g <= T::zero() {
                g = T::sample_standard_gamma(&mut rng, T::one());
            }
            total += g;
            entries.push(g);
        }
        kernel.extend(entries.into_iter().map(|g| g / total));
    }
    let cost = (0..num_states * num_actions)
        .map(|_| T::sample_unit(&mut rng))
        .collect();
    SspInstance::new(num_states, num_actions, cost, kernel, 0)
        .expect("randomly generated instance is valid by construction")
}

/// The 8-state, 2-action benchmark with uniformly random kernel and costs.
pub fn random_mdp<T: Scalar>(seed: u64) -> SspInstance<T> {
    random_instance(8, 2, seed)
}

pub const GRID_ROWS: usize = 3;
pub const GRID_COLS: usize = 4;
pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;
pub const UP: usize = 2;
pub const DOWN: usize = 3;

/// The 3x4 grid benchmark: 11 non-goal cells plus the goal at the bottom-right
/// corner, 4 actions, unit costs. The intended move succeeds with probability
/// 0.85 and each of the other three directions occurs with probability 0.05;
/// any move off the boundary leaves the agent in place.
pub fn gridworld<T: Scalar>() -> SspInstance<T> {
    let cells = GRID_ROWS * GRID_COLS;
    let goal_cell = cells - 1;
    let num_states = cells - 1;
    let num_actions = 4;
    let row_len = num_states + 1;

    // Cells are numbered row-major; the goal is the last cell, so non-goal
    // cell ids coincide with state indices and the goal maps to index S.
    let target = |cell: usize, dir: usize| -> usize {
        let (r, c) = (cell / GRID_COLS, cell % GRID_COLS);
        match dir {
            LEFT if c > 0 => cell - 1,
            RIGHT if c + 1 < GRID_COLS => cell + 1,
            UP if r > 0 => cell - GRID_COLS,
            DOWN if r + 1 < GRID_ROWS => cell + GRID_COLS,
            _ => cell,
        }
    };

    let intended: T = cast(0.85);
    let slip: T = cast(0.05);
    let mut kernel = vec![T::zero(); num_states * num_actions * row_len];
    for state in 0..num_states {
        for action in 0..num_actions {
            let base = (state * num_actions + action) * row_len;
            for dir in 0..4 {
                let mass = if dir == action { intended } else { slip };
                let dest = target(state, dir);
                let idx = if dest == goal_cell { num_states } else { dest };
                kernel[base + idx] += mass;
            }
        }
    }
    let cost = vec![T::one(); num_states * num_actions];
    SspInstance::new(num_states, num_actions, cost, kernel, 0)
        .expect("gridworld construction is valid")
}
