//! Workload planning and execution.
//!
//! A [`WorkloadPlan`] fixes the shuffled instance order once per seed, so every
//! adapter sees the same sequence. [`run_experiment`] drives an [`Adapter`]
//! through warm-up and measured repetitions, either one query at a time or as
//! a closed loop of concurrent clients, while a sampler records CPU and RSS.

mod adapter;
mod io;
mod plan;
mod run;
mod sampler;
mod sqlwire;
mod verify;


use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::TimeInstant;
use crate::queryspec::{ParamSet, QueryInstance, TemplateRegistry};
use crate::refstore::ConfigProfile;

pub use adapter::{open_adapter, ADAPTER_IDS, Adapter, AdapterError, AdapterSpec, FaultyAdapter, MockAdapter, RefstoreAdapter, Session};
pub use io::{read_measurements, read_resources, write_measurements, write_resources, MEASUREMENT_HEADER, RESOURCE_HEADER};
pub use plan::{build_plan, WorkloadPlan};
pub use run::{run_experiment, timed_execute, RunOutput};
pub use sampler::ResourceSampler;
pub use sqlwire::SqlWireAdapter;
pub use verify::{verify_equivalence, EquivalenceReport, Mismatch};

pub const MAX_CLIENTS: usize = 1024;
pub const DEFAULT_RUN_REPETITIONS: u32 = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("workload has no enabled templates")]
    EmptyWorkload,
    #[error("template {0} has no parameter sets")]
    MissingParams(String),
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("unknown adapter {0:?}")]
    UnknownAdapter(String),
    #[error("adapter failed before the first measurement: {0}")]
    Adapter(#[from] AdapterError),
    #[error("plans differ ({left} vs {right}); refusing to compare")]
    PlanMismatch { left: String, right: String },
    #[error("{0} does not capture results")]
    OpaqueResults(String),
    #[error("{path}: {message}")]
    Malformed { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Templates plus their generated parameter sets: everything an adapter needs
/// to turn a [`QueryInstance`] into a concrete query.
#[derive(Debug)]
pub struct Workload {
    pub registry: TemplateRegistry,
    pub params: BTreeMap<String, Vec<ParamSet>>,
}

impl Workload {
    pub fn new(registry: TemplateRegistry, params: BTreeMap<String, Vec<ParamSet>>) -> Arc<Self> {
        Arc::new(Workload { registry, params })
    }

    pub fn param_set(&self, qi: &QueryInstance) -> Option<&ParamSet> {
        self.params.get(&qi.template)?.iter().find(|ps| ps.id == qi.param_set)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Sequential,
    Parallel,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Sequential => "sequential",
            Mode::Parallel => "parallel",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sequential" => Ok(Mode::Sequential),
            "parallel" => Ok(Mode::Parallel),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub run_id: String,
    pub adapter: String,
    pub profile: ConfigProfile,
    pub mode: Mode,
    pub clients: usize,
    pub warmup: bool,
    pub repetitions: u32,
    pub seed: u64,
    /// Keep the normalized result of every instance from the first repetition.
    pub capture_results: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            run_id: "run".into(),
            adapter: "refstore".into(),
            profile: ConfigProfile::ORACLE,
            mode: Mode::Sequential,
            clients: 1,
            warmup: true,
            repetitions: DEFAULT_RUN_REPETITIONS,
            seed: 0,
            capture_results: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.repetitions == 0 {
            return Err(HarnessError::Config("run_repetitions must be at least 1".into()));
        }
        if !(1..=MAX_CLIENTS).contains(&self.clients) {
            return Err(HarnessError::Config(format!("clients must be in 1..={MAX_CLIENTS}, got {}", self.clients)));
        }
        if self.mode == Mode::Sequential && self.clients != 1 {
            return Err(HarnessError::Config("sequential mode runs exactly one client".into()));
        }
        Ok(())
    }

    /// Number of plan sub-lists the mode needs.
    pub fn plan_clients(&self) -> usize {
        match self.mode {
            Mode::Sequential => 1,
            Mode::Parallel => self.clients,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub run_id: String,
    pub repetition: u32,
    pub query: String,
    pub param_set: u32,
    pub client: u32,
    pub issue_ts: TimeInstant,
    pub latency_us: u64,
    pub rows: u64,
    pub success: bool,
    pub error: Option<String>,
}

impl Measurement {
    pub fn end_micros(&self) -> i64 {
        self.issue_ts.micros() + self.latency_us as i64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceSample {
    pub t: TimeInstant,
    pub cpu_percent: f64,
    pub rss_bytes: u64,
}
