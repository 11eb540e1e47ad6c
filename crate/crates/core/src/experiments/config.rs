//! Experiment configuration, read from TOML.
//!
//! ```toml
//! # transient from the opposite packing
//! seed = 7
//! r = [5000]
//! p1 = 0.5
//! init = "opposite"
//! horizon = 10
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ConfigError;
use crate::estimate::DEFAULT_BATCHES;
use crate::model::ModelParams;
use crate::observables::{PairCap, WindowSpec};
use crate::sim::InitialState;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InitSpec {
    Empty,
    Opposite,
    Snapshot(PathBuf),
}

impl InitSpec {
    /// Loads the initial state, reading the snapshot file if there is one.
    pub fn load(&self) -> Result<InitialState, ConfigError> {
        Ok(match self {
            InitSpec::Empty => InitialState::Empty,
            InitSpec::Opposite => InitialState::Opposite,
            InitSpec::Snapshot(path) => InitialState::Snapshot(std::fs::read_to_string(path).map_err(
                |e| ConfigError::Invalid(format!("cannot read snapshot {}: {e}", path.display())),
            )?),
        })
    }
}

impl fmt::Display for InitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitSpec::Empty => f.write_str("empty"),
            InitSpec::Opposite => f.write_str("opposite"),
            InitSpec::Snapshot(path) => write!(f, "snapshot:{}", path.display()),
        }
    }
}

impl FromStr for InitSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "empty" => Ok(InitSpec::Empty),
            "opposite" => Ok(InitSpec::Opposite),
            other => match other.strip_prefix("snapshot:") {
                Some(path) if !path.is_empty() => Ok(InitSpec::Snapshot(PathBuf::from(path))),
                _ => Err(format!(
                    "init must be 'empty', 'opposite' or 'snapshot:<path>', got {other:?}"
                )),
            },
        }
    }
}

impl Serialize for InitSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for InitSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub snapshot_dir: Option<PathBuf>,
    /// Clock values at which `simulate` renders snapshots.
    pub snapshot_times: Vec<f64>,
    pub cells_per_row: Option<usize>,
}

pub const DEFAULT_CAPS: [PairCap; 5] = [
    PairCap::Finite(1),
    PairCap::Finite(2),
    PairCap::Finite(4),
    PairCap::Finite(8),
    PairCap::Infinite,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub r: Vec<f64>,
    pub p1: f64,
    /// Window multiplier; defaults to `p1 + p2`.
    pub y: Option<f64>,
    /// Sub-window offset; defaults to `0.1 (y - p1)`.
    pub delta: Option<f64>,
    pub i_list: Vec<PairCap>,
    pub warmup: f64,
    pub horizon: f64,
    pub replications: usize,
    pub batches: usize,
    pub init: InitSpec,
    pub outputs: Outputs,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: None,
            r: Vec::new(),
            p1: 0.5,
            y: None,
            delta: None,
            i_list: DEFAULT_CAPS.to_vec(),
            warmup: 10.0,
            horizon: 110.0,
            replications: 8,
            batches: DEFAULT_BATCHES,
            init: InitSpec::Empty,
            outputs: Outputs::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn y(&self) -> f64 {
        self.y.unwrap_or(1.0)
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(0.1 * (self.y() - self.p1))
    }

    pub fn window(&self) -> Result<WindowSpec, ConfigError> {
        Ok(WindowSpec::new(self.y(), self.delta(), self.i_list.clone())?)
    }

    pub fn params(&self, r: f64) -> Result<ModelParams, ConfigError> {
        Ok(ModelParams::new(r, self.p1)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.r.is_empty() {
            return invalid("r must list at least one value".into());
        }
        for &r in &self.r {
            self.params(r)?;
        }
        if !(self.warmup >= 0.0 && self.horizon > self.warmup) {
            return invalid(format!(
                "need horizon > warmup >= 0, got warmup {} and horizon {}",
                self.warmup, self.horizon
            ));
        }
        if self.replications < 1 {
            return invalid("replications must be at least 1".into());
        }
        if self.batches < 2 {
            return invalid("batches must be at least 2".into());
        }
        let window = self.window()?;
        if !self.i_list.is_empty() {
            window.check_sub_window(&self.params(self.r[0])?)?;
        }
        Ok(())
    }
}
