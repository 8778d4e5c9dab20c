//! File formats: per-replication trace CSVs, epoch logs, the aggregate
//! regret CSV with its normal-approximation confidence band, and JSON
//! sidecars (resolved config, instances, metadata, theory report).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{EpochRecord, TriggerReason};
use crate::diagnostics::TheoryReport;
use crate::model::SspInstance;
use crate::scalar::Scalar;

use super::config::{ExperimentConfig, Mode};
use super::run::{EpisodeRow, RegretTrace};
use super::HarnessError;

pub const TRACE_HEADER: &str =
    "episode,episode_cost,cum_cost,cum_opt_cost,regret,time_steps,epochs";
pub const AGGREGATE_HEADER: &str = "episode,mean_regret,ci_low,ci_high";
pub const EPOCH_HEADER: &str = "epoch,start_time,start_episode,prev_episodes,trigger";

/// Past this many episodes the aggregate is subsampled to evenly spaced
/// checkpoints to keep the file size bounded.
const AGGREGATE_FULL_LIMIT: usize = 100_000;
const AGGREGATE_CHECKPOINTS: usize = 10_000;

/// One aggregate row; the band is absent when only one replication ran.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow<T> {
    pub episode: usize,
    pub mean_regret: T,
    pub ci_low: Option<T>,
    pub ci_high: Option<T>,
}

/// Mean regret per episode with a 95% normal-approximation band. Replicate
/// values are totally ordered before summation so the aggregate is invariant
/// under permutations of the replication seeds.
pub fn aggregate_regret<T: Scalar>(traces: &[RegretTrace<T>]) -> Vec<AggregateRow<T>> {
    let episodes = traces.iter().map(|t| t.rows.len()).min().unwrap_or(0);
    let r = traces.len();
    let mut out = Vec::with_capacity(episodes);
    let mut values = vec![T::zero(); r];
    for k in 0..episodes {
        for (slot, trace) in values.iter_mut().zip(traces) {
            *slot = trace.rows[k].regret;
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("regret values are finite"));
        let mean = values.iter().copied().sum::<T>() / crate::scalar::cast_usize::<T>(r);
        let (ci_low, ci_high) = if r >= 2 {
            let ss = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>();
            let sd = (ss / crate::scalar::cast_usize::<T>(r - 1)).sqrt();
            let half =
                crate::scalar::cast::<T>(1.96) * sd / crate::scalar::cast_usize::<T>(r).sqrt();
            (Some(mean - half), Some(mean + half))
        } else {
            (None, None)
        };
        out.push(AggregateRow {
            episode: k + 1,
            mean_regret: mean,
            ci_low,
            ci_high,
        });
    }
    out
}

fn subsampled_indices(total: usize) -> Vec<usize> {
    if total <= AGGREGATE_FULL_LIMIT {
        return (0..total).collect();
    }
    let mut indices: Vec<usize> = (1..=AGGREGATE_CHECKPOINTS)
        .map(|i| i * total / AGGREGATE_CHECKPOINTS - 1)
        .collect();
    indices.dedup();
    indices
}

pub fn write_trace_csv<T: Scalar>(path: &Path, trace: &RegretTrace<T>) -> Result<(), HarnessError> {
    let mut text = String::with_capacity(trace.rows.len() * 48 + 64);
    text.push_str(TRACE_HEADER);
    text.push('\n');
    for row in &trace.rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.episode,
            row.episode_cost,
            row.cum_cost,
            row.cum_opt_cost,
            row.regret,
            row.time_steps,
            row.epochs
        ));
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn write_aggregate_csv<T: Scalar>(
    path: &Path,
    traces: &[RegretTrace<T>],
) -> Result<(), HarnessError> {
    let rows = aggregate_regret(traces);
    let mut text = String::with_capacity(rows.len() * 32 + 64);
    text.push_str(AGGREGATE_HEADER);
    text.push('\n');
    for idx in subsampled_indices(rows.len()) {
        let row = &rows[idx];
        match (row.ci_low, row.ci_high) {
            (Some(lo), Some(hi)) => text.push_str(&format!(
                "{},{},{},{}\n",
                row.episode, row.mean_regret, lo, hi
            )),
            _ => text.push_str(&format!("{},{},,\n", row.episode, row.mean_regret)),
        }
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn write_epochs_csv(path: &Path, log: &[EpochRecord]) -> Result<(), HarnessError> {
    let mut text = String::with_capacity(log.len() * 24 + 48);
    text.push_str(EPOCH_HEADER);
    text.push('\n');
    for record in log {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            record.index,
            record.start_time,
            record.start_episode,
            record.prev_episodes,
            record.trigger
        ));
    }
    fs::write(path, text)?;
    Ok(())
}

/// Per-replication metadata sidecar.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub replication: usize,
    pub agent_seed: u64,
    pub config_hash: u64,
    pub v_star: f64,
    pub capped_episodes: usize,
    pub epochs: usize,
    pub time_steps: u64,
}

/// Write every artifact of a finished experiment into `config.out_dir`.
pub fn persist_experiment(
    config: &ExperimentConfig,
    instances: &[SspInstance<f64>],
    traces: &[RegretTrace<f64>],
    epoch_logs: &[Vec<EpochRecord>],
    report: &TheoryReport,
) -> Result<(), HarnessError> {
    let dir = &config.out_dir;
    fs::create_dir_all(dir)?;
    write_json(&dir.join("config.json"), config)?;
    match config.mode {
        Mode::Frequentist => write_json(&dir.join("instance.json"), &instances[0])?,
        Mode::Bayesian => {
            for (r, instance) in instances.iter().enumerate() {
                write_json(&dir.join(format!("instance_r{r}.json")), instance)?;
            }
        }
    }
    for (r, (trace, log)) in traces.iter().zip(epoch_logs).enumerate() {
        write_trace_csv(&dir.join(format!("run_r{r}.csv")), trace)?;
        write_epochs_csv(&dir.join(format!("epochs_r{r}.csv")), log)?;
        write_json(
            &dir.join(format!("meta_r{r}.json")),
            &RunMeta {
                replication: r,
                agent_seed: trace.agent_seed,
                config_hash: trace.config_hash,
                v_star: trace.v_star,
                capped_episodes: trace.capped_episodes,
                epochs: trace.final_epochs(),
                time_steps: trace.final_time_steps(),
            },
        )?;
    }
    write_aggregate_csv(&dir.join("aggregate.csv"), traces)?;
    write_json(&dir.join("theory_report.json"), report)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut file = fs::File::create(path)?;
    let text = serde_json::to_string_pretty(value)?;
    file.write_all(text.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}

/// Stored trace read back from a per-replication CSV.
pub fn read_trace_csv(path: &Path) -> Result<RegretTrace<f64>, HarnessError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != TRACE_HEADER {
        return Err(HarnessError::Format(format!(
            "unexpected trace header in {}: '{header}'",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (number, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(HarnessError::Format(format!(
                "line {} of {}: expected 7 fields",
                number + 2,
                path.display()
            )));
        }
        let parse_err = |what: &str| {
            HarnessError::Format(format!(
                "line {} of {}: bad {what}",
                number + 2,
                path.display()
            ))
        };
        rows.push(EpisodeRow {
            episode: fields[0].parse().map_err(|_| parse_err("episode"))?,
            episode_cost: fields[1].parse().map_err(|_| parse_err("episode_cost"))?,
            cum_cost: fields[2].parse().map_err(|_| parse_err("cum_cost"))?,
            cum_opt_cost: fields[3].parse().map_err(|_| parse_err("cum_opt_cost"))?,
            regret: fields[4].parse().map_err(|_| parse_err("regret"))?,
            time_steps: fields[5].parse().map_err(|_| parse_err("time_steps"))?,
            epochs: fields[6].parse().map_err(|_| parse_err("epochs"))?,
        });
    }
    let v_star = rows.first().map(|r| r.cum_opt_cost).unwrap_or(0.0);
    Ok(RegretTrace {
        rows,
        v_star,
        capped_episodes: 0,
        agent_seed: 0,
        config_hash: 0,
    })
}

/// Stored epoch log (external fields only) read back from CSV.
pub fn read_epochs_csv(path: &Path) -> Result<Vec<EpochRecord>, HarnessError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != EPOCH_HEADER {
        return Err(HarnessError::Format(format!(
            "unexpected epoch header in {}: '{header}'",
            path.display()
        )));
    }
    let mut records = Vec::new();
    for (number, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(HarnessError::Format(format!(
                "line {} of {}: expected 5 fields",
                number + 2,
                path.display()
            )));
        }
        let parse_err = |what: &str| {
            HarnessError::Format(format!(
                "line {} of {}: bad {what}",
                number + 2,
                path.display()
            ))
        };
        let trigger = match fields[4] {
            "init" => TriggerReason::Init,
            "episodes" => TriggerReason::Episodes,
            "doubling" => TriggerReason::Doubling,
            _ => return Err(parse_err("trigger")),
        };
        records.push(EpochRecord {
            index: fields[0].parse().map_err(|_| parse_err("epoch"))?,
            start_time: fields[1].parse().map_err(|_| parse_err("start_time"))?,
            start_episode: fields[2].parse().map_err(|_| parse_err("start_episode"))?,
            prev_episodes: fields[3].parse().map_err(|_| parse_err("prev_episodes"))?,
            trigger,
            visit_snapshot: Vec::new(),
            successor_snapshot: Vec::new(),
        });
    }
    Ok(records)
}

/// List the replication indices present in an experiment directory.
pub fn replication_indices(dir: &Path) -> Result<Vec<usize>, HarnessError> {
    let mut indices = Vec::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(rest) = name
            .strip_prefix("run_r")
            .and_then(|n| n.strip_suffix(".csv"))
        {
            if let Ok(idx) = rest.parse::<usize>() {
                indices.push(idx);
            }
        }
    }
    indices.sort_unstable();
    Ok(indices)
}

pub fn experiment_paths(dir: &Path, replication: usize) -> (PathBuf, PathBuf, PathBuf) {
    (
        dir.join(format!("run_r{replication}.csv")),
        dir.join(format!("epochs_r{replication}.csv")),
        dir.join(format!("meta_r{replication}.json")),
    )
}
