//! Re-run diagnostics over a stored experiment directory.
//!
//! Works from the persisted artifacts alone: trace CSVs give the regret
//! curves, epoch counts, and time steps; epoch CSVs give the bookkeeping
//! sequence. Coverage needs per-epoch count snapshots that the external
//! files do not carry, so the stored `theory_report.json` value is reported
//! as-is.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, TheoryReport};
use crate::model::SspInstance;

use super::config::{ExperimentConfig, Mode};
use super::output;
use super::HarnessError;

/// Diagnostics recomputed from stored traces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnoseOutcome {
    pub replications: usize,
    pub report: TheoryReport,
    /// Observed epochs stayed below the bound in every replication.
    pub epoch_bound_satisfied: bool,
    /// Every stored epoch's episode count exceeded its predecessor by at
    /// most one.
    pub episode_counts_monotone: bool,
}

pub fn diagnose_directory(dir: &Path) -> Result<DiagnoseOutcome, HarnessError> {
    let config_text = fs::read_to_string(dir.join("config.json"))?;
    let config: ExperimentConfig = serde_json::from_str(&config_text)?;
    let indices = output::replication_indices(dir)?;
    if indices.is_empty() {
        return Err(HarnessError::Format(format!(
            "no run_r*.csv files in {}",
            dir.display()
        )));
    }

    let mut traces = Vec::with_capacity(indices.len());
    let mut bound_ok = true;
    let mut monotone_ok = true;
    let mut worst: Option<(usize, usize, u64, f64)> = None; // (epochs, states*actions marker, T, bound)

    for &r in &indices {
        let (trace_path, epochs_path, _) = output::experiment_paths(dir, r);
        let trace = output::read_trace_csv(&trace_path)?;
        let log = output::read_epochs_csv(&epochs_path)?;
        let instance = load_instance_for(dir, &config, r)?;

        let epochs = trace.final_epochs();
        let time_steps = trace.final_time_steps();
        let (bound, satisfied) = diagnostics::epoch_bound_check(
            epochs,
            instance.num_states(),
            instance.num_actions(),
            config.episodes,
            time_steps,
        );
        bound_ok &= satisfied;
        if worst.map(|w| epochs > w.0).unwrap_or(true) {
            worst = Some((epochs, r, time_steps, bound));
        }
        for pair in log.windows(2) {
            if pair[1].prev_episodes > pair[0].prev_episodes + 1 {
                monotone_ok = false;
            }
        }
        traces.push(trace);
    }

    let stored_report: Option<TheoryReport> = fs::read_to_string(dir.join("theory_report.json"))
        .ok()
        .and_then(|text| serde_json::from_str(&text).ok());
    let delta = config.resolved_delta();
    let curves: Vec<Vec<f64>> = traces.iter().map(|t| t.regret_curve()).collect();
    let regret_slope =
        diagnostics::regret_slope(&curves, &diagnostics::default_checkpoints(config.episodes)).ok();
    let (epochs_observed, _, time_steps, epoch_bound) = worst.expect("at least one replication");

    Ok(DiagnoseOutcome {
        replications: indices.len(),
        report: TheoryReport {
            epochs_observed,
            epoch_bound,
            coverage_rate: stored_report
                .as_ref()
                .map(|r| r.coverage_rate)
                .unwrap_or(f64::NAN),
            coverage_target: 1.0 - delta,
            regret_slope,
            time_steps,
        },
        epoch_bound_satisfied: bound_ok,
        episode_counts_monotone: monotone_ok,
    })
}

fn load_instance_for(
    dir: &Path,
    config: &ExperimentConfig,
    replication: usize,
) -> Result<SspInstance<f64>, HarnessError> {
    let path = match config.mode {
        Mode::Frequentist => dir.join("instance.json"),
        Mode::Bayesian => dir.join(format!("instance_r{replication}.json")),
    };
    let text = fs::read_to_string(&path)?;
    Ok(serde_json::from_str(&text)?)
}
