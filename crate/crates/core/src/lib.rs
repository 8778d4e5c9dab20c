//! Simulation lab for online learning in stochastic shortest path problems.
//!
//! The crate provides:
//!
//! * [`model`] - SSP instances, validation, the two benchmark environments
//!   (a uniformly random 8x2 MDP and a 3x4 slippery gridworld), and the
//!   cost-floor perturbation;
//! * [`planner`] - value iteration for the Bellman optimality equations and
//!   an exact linear-solve policy evaluator;
//! * [`posterior`] - the per-pair Dirichlet conjugate posterior over the
//!   unknown transition kernel;
//! * [`agents`] - a posterior-sampling agent and two baselines (Bernstein-set
//!   optimism, certainty equivalence) sharing one epoch schedule;
//! * [`diagnostics`] - executable checks: epoch-count bound, confidence-set
//!   coverage, regret-growth exponent;
//! * [`harness`] - K-episode experiments with replications, CSV/JSON
//!   persistence, and re-diagnosis of stored runs.
//!
//! All numeric code is generic over [`scalar::Scalar`]; the aliases below
//! pin the two supported widths.

pub mod agents;
pub mod diagnostics;
pub mod harness;
pub mod model;
pub mod planner;
pub mod posterior;
pub mod scalar;

pub use scalar::Scalar;

/// Double-precision instantiations (the harness and CLI lane).
pub type SspInstance64 = model::SspInstance<f64>;
pub type ModelStats64 = model::ModelStats<f64>;
pub type SolverConfig64 = planner::SolverConfig<f64>;
pub type ValueSolution64 = planner::ValueSolution<f64>;
pub type DirichletBelief64 = posterior::DirichletBelief<f64>;
pub type Agent64 = agents::Agent<f64>;
pub type AgentParams64 = agents::AgentParams<f64>;
pub type RegretTrace64 = harness::RegretTrace<f64>;

/// Single-precision instantiations.
pub type SspInstance32 = model::SspInstance<f32>;
pub type SolverConfig32 = planner::SolverConfig<f32>;
pub type ValueSolution32 = planner::ValueSolution<f32>;
pub type DirichletBelief32 = posterior::DirichletBelief<f32>;
