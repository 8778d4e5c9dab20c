//! Executable checks of the theory the simulations can actually verify: the
//! deterministic epoch-count bound, confidence-set coverage of the true
//! kernel, and the growth exponent of the regret curve.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{in_confidence_set, EpochRecord};
use crate::model::SspInstance;
use crate::scalar::{cast, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("no traces supplied")]
    Empty,
    #[error("checkpoint {checkpoint} exceeds trace length {len}")]
    CheckpointRange { checkpoint: usize, len: usize },
    #[error("only {0} checkpoints with positive mean regret; at least 3 required for a slope fit")]
    TooFewCheckpoints(usize),
}

/// Aggregated theory verdicts for one experiment, serialized next to the run
/// CSVs. When an experiment has several replications, `epochs_observed`,
/// `epoch_bound`, and `time_steps` describe the replication with the most
/// epochs; `coverage_rate` pools every (epoch, state, action) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub epochs_observed: usize,
    pub epoch_bound: f64,
    pub coverage_rate: f64,
    pub coverage_target: f64,
    pub regret_slope: Option<f64>,
    pub time_steps: u64,
}

/// Deterministic bound on the number of epochs after `K` episodes and `T`
/// time steps: `sqrt(2 S A K ln T) + S A ln T`. Returns the bound and
/// whether the observed count satisfies it.
pub fn epoch_bound_check(
    epochs_observed: usize,
    num_states: usize,
    num_actions: usize,
    episodes: usize,
    time_steps: u64,
) -> (f64, bool) {
    let sa = (num_states * num_actions) as f64;
    let log_t = (time_steps as f64).ln();
    let bound = (2.0 * sa * episodes as f64 * log_t).sqrt() + sa * log_t;
    (bound, epochs_observed as f64 <= bound)
}

/// Fraction of (epoch, state, action) triples whose true transition row lies
/// inside the Bernstein set built from that epoch's snapshot counts.
pub fn coverage_check<T: Scalar>(
    instance: &SspInstance<T>,
    epochs: &[EpochRecord],
    delta: T,
) -> f64 {
    let (hits, total) = coverage_counts(instance, epochs, delta);
    if total == 0 {
        return 1.0;
    }
    hits as f64 / total as f64
}

/// Raw hit/total counts behind `coverage_check`; used to pool across
/// replications.
pub fn coverage_counts<T: Scalar>(
    instance: &SspInstance<T>,
    epochs: &[EpochRecord],
    delta: T,
) -> (u64, u64) {
    let s_count = instance.num_states();
    let a_count = instance.num_actions();
    let row_len = s_count + 1;
    let mut hits = 0u64;
    let mut total = 0u64;
    let mut emp_row = vec![T::zero(); row_len];
    for record in epochs {
        for state in 0..s_count {
            for action in 0..a_count {
                let pair = state * a_count + action;
                let n = record.visit_snapshot[pair];
                for (i, entry) in emp_row.iter_mut().enumerate() {
                    *entry = if n == 0 {
                        T::zero()
                    } else {
                        cast::<T>(record.successor_snapshot[pair * row_len + i] as f64)
                            / cast::<T>(n as f64)
                    };
                }
                total += 1;
                if in_confidence_set(
                    instance.kernel_row(state, action),
                    &emp_row,
                    n,
                    s_count,
                    a_count,
                    delta,
                ) {
                    hits += 1;
                }
            }
        }
    }
    (hits, total)
}

/// Least-squares slope of `ln(mean regret)` against `ln K` over the given
/// episode checkpoints. Checkpoints whose mean regret is not positive are
/// dropped; at least three must survive.
pub fn regret_slope<T: Scalar>(
    regret_curves: &[Vec<T>],
    checkpoints: &[usize],
) -> Result<f64, DiagnosticsError> {
    if regret_curves.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    let mut points = Vec::new();
    for &k in checkpoints {
        for curve in regret_curves {
            if k == 0 || k > curve.len() {
                return Err(DiagnosticsError::CheckpointRange {
                    checkpoint: k,
                    len: curve.len(),
                });
            }
        }
        let mean = regret_curves
            .iter()
            .map(|curve| curve[k - 1].to_f64().unwrap_or(f64::NAN))
            .sum::<f64>()
            / regret_curves.len() as f64;
        if mean > 0.0 {
            points.push(((k as f64).ln(), mean.ln()));
        }
    }
    if points.len() < 3 {
        return Err(DiagnosticsError::TooFewCheckpoints(points.len()));
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Default slope checkpoints for a `K`-episode run: `K/16`, `K/4`, `K`.
pub fn default_checkpoints(episodes: usize) -> Vec<usize> {
    if episodes < 16 {
        return vec![episodes];
    }
    vec![episodes / 16, episodes / 4, episodes]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::TriggerReason;

    #[test]
    fn epoch_bound_matches_direct_evaluation() {
        let (bound, ok) = epoch_bound_check(2000, 8, 2, 10_000, 50_000);
        assert!((bound - 2033.849923795517).abs() < 1e-9);
        assert!(ok);
        let (_, bad) = epoch_bound_check(2100, 8, 2, 10_000, 50_000);
        assert!(!bad);
    }

    #[test]
    fn one_epoch_always_satisfies_the_bound() {
        for (s, a, k, t) in [(1, 1, 1, 3), (2, 2, 5, 10), (8, 2, 100, 400)] {
            let (bound, ok) = epoch_bound_check(1, s, a, k, t);
            assert!(ok, "bound {bound} below 1 for ({s},{a},{k},{t})");
        }
    }

    #[test]
    fn epoch_bound_is_nondecreasing_in_every_argument() {
        let base = epoch_bound_check(1, 4, 2, 100, 1000).0;
        assert!(epoch_bound_check(1, 5, 2, 100, 1000).0 >= base);
        assert!(epoch_bound_check(1, 4, 3, 100, 1000).0 >= base);
        assert!(epoch_bound_check(1, 4, 2, 200, 1000).0 >= base);
        assert!(epoch_bound_check(1, 4, 2, 100, 2000).0 >= base);
    }

    #[test]
    fn exact_power_laws_recover_their_exponent() {
        let k_max = 5000usize;
        for (p, c) in [(0.5, 3.0), (1.0, 0.7)] {
            let curve: Vec<f64> = (1..=k_max).map(|k| c * (k as f64).powf(p)).collect();
            let slope = regret_slope(&[curve], &[100, 400, 1600, 4900]).unwrap();
            assert!((slope - p).abs() < 1e-9, "slope {slope} vs exponent {p}");
        }
    }

    #[test]
    fn nonpositive_checkpoints_are_dropped_and_underflow_errors() {
        let mut curve = vec![0.0; 100];
        for (k, entry) in curve.iter_mut().enumerate().skip(50) {
            *entry = (k as f64).sqrt();
        }
        // Checkpoints 10 and 20 have zero regret and are dropped.
        let err = regret_slope(&[curve.clone()], &[10, 20, 60, 90]).unwrap_err();
        assert_eq!(err, DiagnosticsError::TooFewCheckpoints(2));
        let ok = regret_slope(&[curve], &[60, 70, 80, 90]);
        assert!(ok.is_ok());
    }

    #[test]
    fn checkpoint_past_the_trace_is_an_error() {
        let curve = vec![1.0; 10];
        assert!(matches!(
            regret_slope(&[curve], &[5, 8, 20]),
            Err(DiagnosticsError::CheckpointRange { checkpoint: 20, .. })
        ));
    }

    #[test]
    fn zero_visit_epochs_are_always_covered() {
        let inst = crate::model::random_mdp::<f64>(3);
        let pairs = inst.num_states() * inst.num_actions();
        let record = EpochRecord {
            index: 1,
            start_time: 1,
            start_episode: 1,
            prev_episodes: 1,
            trigger: TriggerReason::Init,
            visit_snapshot: vec![0; pairs],
            successor_snapshot: vec![0; pairs * (inst.num_states() + 1)],
        };
        let rate = coverage_check(&inst, &[record], 0.1);
        assert_eq!(rate, 1.0);
    }

    #[test]
    fn default_checkpoints_follow_the_quartering_rule() {
        assert_eq!(default_checkpoints(10_000), vec![625, 2500, 10_000]);
        assert_eq!(default_checkpoints(8), vec![8]);
    }

    #[test]
    fn coverage_drops_when_checked_against_the_wrong_instance() {
        use crate::agents::{AgentParams, Algorithm};
        use crate::harness::run_replication;
        use crate::planner::SolverConfig;

        let matched = crate::model::random_mdp::<f64>(5);
        let mismatched = crate::model::random_mdp::<f64>(77);
        let params = AgentParams {
            algorithm: Algorithm::Psrl,
            prior_alpha: 0.1,
            delta: 0.05,
            planner: SolverConfig::default(),
        };
        let (_, log) =
            run_replication(&matched, &params, 0.0, 3, 4_000, 1_000_000, 0, None).unwrap();
        let matched_rate = coverage_check(&matched, &log, 0.05);
        let mismatched_rate = coverage_check(&mismatched, &log, 0.05);
        assert!(matched_rate >= 0.95, "matched rate {matched_rate}");
        assert!(
            mismatched_rate < matched_rate,
            "mismatched {mismatched_rate} vs matched {matched_rate}"
        );
    }
}
