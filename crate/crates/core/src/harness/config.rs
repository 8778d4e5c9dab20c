//! Experiment configuration: JSON-file representation plus resolution of
//! derived defaults (confidence level, cost floor).

use std::fmt;
use std::path::PathBuf;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::agents::Algorithm;
use crate::model::default_epsilon;

use super::HarnessError;

/// Frequentist: one fixed instance, varying agent seeds. Bayesian: each
/// replication samples its own kernel from the Dirichlet prior (costs stay
/// with the environment generator).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Frequentist,
    Bayesian,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "frequentist" => Ok(Mode::Frequentist),
            "bayesian" => Ok(Mode::Bayesian),
            other => Err(format!(
                "unknown mode '{other}' (expected frequentist|bayesian)"
            )),
        }
    }
}

/// Cost floor: `auto` resolves to `(S^2 A / K)^(2/3)`, a number is applied
/// verbatim, and zero disables the perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostFloor {
    Auto,
    Value(f64),
}

impl CostFloor {
    pub fn resolve(&self, num_states: usize, num_actions: usize, episodes: usize) -> f64 {
        match self {
            CostFloor::Auto => default_epsilon(num_states, num_actions, episodes),
            CostFloor::Value(v) => *v,
        }
    }
}

impl std::str::FromStr for CostFloor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(CostFloor::Auto);
        }
        s.parse::<f64>()
            .map(CostFloor::Value)
            .map_err(|_| format!("cost floor must be 'auto' or a number, got '{s}'"))
    }
}

impl Serialize for CostFloor {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            CostFloor::Auto => serializer.serialize_str("auto"),
            CostFloor::Value(v) => serializer.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for CostFloor {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct FloorVisitor;

        impl<'de> Visitor<'de> for FloorVisitor {
            type Value = CostFloor;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("\"auto\" or a number in [0, 1]")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<CostFloor, E> {
                v.parse().map_err(E::custom)
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<CostFloor, E> {
                Ok(CostFloor::Value(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<CostFloor, E> {
                Ok(CostFloor::Value(v as f64))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<CostFloor, E> {
                Ok(CostFloor::Value(v as f64))
            }
        }

        deserializer.deserialize_any(FloorVisitor)
    }
}

/// Full description of one experiment. The JSON config file mirrors these
/// field names; command-line flags override file values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// "random-mdp", "gridworld", or a path to an instance JSON file.
    pub environment: String,
    pub env_seed: u64,
    pub algorithm: Algorithm,
    /// Episodes per replication (K).
    pub episodes: usize,
    /// Independent replications (R).
    pub replications: usize,
    /// Replication `r` runs with agent seed `agent_seed_base + r`.
    pub agent_seed_base: u64,
    pub prior_alpha: f64,
    /// Confidence level; `null` resolves to `1 / episodes`.
    pub delta: Option<f64>,
    pub cost_floor: CostFloor,
    pub mode: Mode,
    /// Planner sup-norm tolerance.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Force-terminate an episode after this many steps and flag the run.
    pub step_cap: u64,
    /// Worker threads for replications; 0 uses the global default.
    pub threads: usize,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            environment: "gridworld".to_string(),
            env_seed: 0,
            algorithm: Algorithm::Psrl,
            episodes: 10_000,
            replications: 10,
            agent_seed_base: 0,
            prior_alpha: 0.1,
            delta: None,
            cost_floor: CostFloor::Value(0.0),
            mode: Mode::Frequentist,
            tolerance: 1e-10,
            max_iterations: 1_000_000,
            step_cap: 1_000_000,
            threads: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.episodes == 0 {
            return Err(HarnessError::Config("episodes must be >= 1".into()));
        }
        if self.replications == 0 {
            return Err(HarnessError::Config("replications must be >= 1".into()));
        }
        if self.step_cap == 0 {
            return Err(HarnessError::Config("step_cap must be >= 1".into()));
        }
        if self.prior_alpha <= 0.0 || self.prior_alpha.is_nan() {
            return Err(HarnessError::Config("prior_alpha must be > 0".into()));
        }
        if let Some(d) = self.delta {
            if d <= 0.0 || d >= 1.0 || d.is_nan() {
                return Err(HarnessError::Config("delta must lie in (0, 1)".into()));
            }
        }
        if self.tolerance <= 0.0 || self.tolerance.is_nan() {
            return Err(HarnessError::Config("tolerance must be > 0".into()));
        }
        if self.max_iterations == 0 {
            return Err(HarnessError::Config("max_iterations must be >= 1".into()));
        }
        if let CostFloor::Value(v) = self.cost_floor {
            if !(0.0..=1.0).contains(&v) {
                return Err(HarnessError::Config("cost_floor must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    /// Confidence level, defaulting to `1 / K`.
    pub fn resolved_delta(&self) -> f64 {
        self.delta.unwrap_or(1.0 / self.episodes as f64)
    }

    /// Stable content hash of the resolved configuration (FNV-1a over the
    /// canonical JSON form).
    pub fn content_hash(&self) -> u64 {
        let text = serde_json::to_string(self).expect("config serializes");
        fnv1a(text.as_bytes())
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
