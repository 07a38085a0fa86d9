use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{HarnessError, SqlWireAdapter, Workload};
use crate::datagen::Dataset;
use crate::model::{ResultSet, Value};
use crate::queryspec::{QueryInstance, CANONICAL_DIALECT};
use crate::refstore::{execute_canonical, ConfigProfile, StoreHandle};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum AdapterError {
    /// The query failed; the session is still usable.
    #[error("{0}")]
    Query(String),
    /// The session is gone. Aborts the current repetition.
    #[error("connection: {0}")]
    Connection(String),
}

/// One client's connection to a system under test.
pub trait Session: Send {
    fn execute(&mut self, qi: &QueryInstance) -> Result<ResultSet, AdapterError>;
}

pub trait Adapter: Send + Sync {
    fn id(&self) -> &str;

    fn dialect(&self) -> &str;

    /// False when returned results carry no comparable payload.
    fn captures_results(&self) -> bool {
        true
    }

    /// Opens an independent session. Parallel runs open one per client.
    fn session(&self) -> Result<Box<dyn Session + '_>, AdapterError>;
}

/// Adapter selection as written in an experiment config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdapterSpec {
    pub id: String,
    #[serde(default)]
    pub connection: Option<String>,
    #[serde(default)]
    pub dialect: Option<String>,
    #[serde(default = "oracle_profile")]
    pub profile: ConfigProfile,
}

fn oracle_profile() -> ConfigProfile {
    ConfigProfile::ORACLE
}

impl AdapterSpec {
    pub fn new(id: &str) -> Self {
        AdapterSpec { id: id.into(), connection: None, dialect: None, profile: ConfigProfile::ORACLE }
    }
}

pub const ADAPTER_IDS: [&str; 4] = ["refstore", "faulty", "mock", "sqlwire"];

/// `key=value;key=value` options of a connection string.
fn options(spec: &AdapterSpec) -> BTreeMap<String, String> {
    spec.connection
        .as_deref()
        .unwrap_or("")
        .split(';')
        .filter(|kv| !kv.trim().is_empty())
        .map(|kv| match kv.split_once('=') {
            Some((k, v)) => (k.trim().to_string(), v.trim().to_string()),
            None => (kv.trim().to_string(), String::new()),
        })
        .collect()
}

fn numeric_option<T: std::str::FromStr>(opts: &BTreeMap<String, String>, key: &str, default: T) -> Result<T, HarnessError> {
    match opts.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| HarnessError::Config(format!("connection option {key}={v:?} is not a number"))),
    }
}

/// Instantiates a registered adapter and loads the dataset when it runs in-process.
pub fn open_adapter(
    spec: &AdapterSpec,
    dataset: Arc<Dataset>,
    workload: Arc<Workload>,
) -> Result<Box<dyn Adapter>, HarnessError> {
    let store = || {
        StoreHandle::load(dataset.clone(), spec.profile)
            .map(Arc::new)
            .map_err(|e| HarnessError::Config(e.to_string()))
    };
    let opts = options(spec);
    Ok(match spec.id.as_str() {
        "refstore" => Box::new(RefstoreAdapter::new(store()?, workload)),
        "faulty" => {
            let every = numeric_option(&opts, "every", 1u32)?.max(1);
            Box::new(FaultyAdapter::new(RefstoreAdapter::new(store()?, workload), every))
        }
        "mock" => {
            let service = Duration::from_micros(numeric_option(&opts, "service_us", 10_000u64)?);
            let failing = opts.get("fail").map(|f| f.split(',').map(str::to_string).collect()).unwrap_or_default();
            Box::new(MockAdapter::new(service).failing(failing))
        }
        "sqlwire" => {
            let addr = spec
                .connection
                .clone()
                .ok_or_else(|| HarnessError::Config("sqlwire needs a connection string host:port".into()))?;
            let dialect = spec.dialect.clone().unwrap_or_else(|| "postgis".into());
            Box::new(SqlWireAdapter::new(addr, dialect, workload))
        }
        other => return Err(HarnessError::UnknownAdapter(other.into())),
    })
}

/// In-process adapter over the reference store, dialect `canonical`.
pub struct RefstoreAdapter {
    store: Arc<StoreHandle>,
    workload: Arc<Workload>,
}

impl RefstoreAdapter {
    pub fn new(store: Arc<StoreHandle>, workload: Arc<Workload>) -> Self {
        RefstoreAdapter { store, workload }
    }

    pub fn store(&self) -> &StoreHandle {
        &self.store
    }

    fn run(&self, qi: &QueryInstance) -> Result<ResultSet, AdapterError> {
        let ps = self
            .workload
            .param_set(qi)
            .ok_or_else(|| AdapterError::Query(format!("no parameter set {}", qi.key())))?;
        let (entry, args) = self
            .workload
            .registry
            .bind_canonical(&qi.template, ps)
            .map_err(|e| AdapterError::Query(e.to_string()))?;
        execute_canonical(&self.store, entry, &args).map_err(|e| AdapterError::Query(e.to_string()))
    }
}

struct RefstoreSession<'a>(&'a RefstoreAdapter);

impl Session for RefstoreSession<'_> {
    fn execute(&mut self, qi: &QueryInstance) -> Result<ResultSet, AdapterError> {
        self.0.run(qi)
    }
}

impl Adapter for RefstoreAdapter {
    fn id(&self) -> &str {
        "refstore"
    }

    fn dialect(&self) -> &str {
        CANONICAL_DIALECT
    }

    fn session(&self) -> Result<Box<dyn Session + '_>, AdapterError> {
        Ok(Box::new(RefstoreSession(self)))
    }
}

/// Sleeps a fixed service time per query and returns an empty result.
/// Instances whose key is listed in `failing` report a query error.
pub struct MockAdapter {
    service: Duration,
    failing: HashSet<String>,
}

impl MockAdapter {
    pub fn new(service: Duration) -> Self {
        MockAdapter { service, failing: HashSet::new() }
    }

    pub fn failing(mut self, keys: HashSet<String>) -> Self {
        self.failing = keys;
        self
    }
}

struct MockSession<'a>(&'a MockAdapter);

impl Session for MockSession<'_> {
    fn execute(&mut self, qi: &QueryInstance) -> Result<ResultSet, AdapterError> {
        thread::sleep(self.0.service);
        if self.0.failing.contains(&qi.key()) {
            return Err(AdapterError::Query(format!("mock failure on {}", qi.key())));
        }
        Ok(ResultSet::default())
    }
}

impl Adapter for MockAdapter {
    fn id(&self) -> &str {
        "mock"
    }

    fn dialect(&self) -> &str {
        CANONICAL_DIALECT
    }

    fn captures_results(&self) -> bool {
        false
    }

    fn session(&self) -> Result<Box<dyn Session + '_>, AdapterError> {
        Ok(Box::new(MockSession(self)))
    }
}

/// Reference store that corrupts the answer of every parameter set whose id
/// is a multiple of `every`: counts are off by one, other results lose or
/// gain a row. Exists to exercise mismatch detection.
pub struct FaultyAdapter {
    inner: RefstoreAdapter,
    every: u32,
}

impl FaultyAdapter {
    pub fn new(inner: RefstoreAdapter, every: u32) -> Self {
        FaultyAdapter { inner, every: every.max(1) }
    }
}

fn corrupt(mut rs: ResultSet) -> ResultSet {
    match rs.rows.first_mut().and_then(|r| r.first_mut()) {
        Some(Value::Int(n)) => *n += 1,
        Some(_) => {
            rs.rows.pop();
        }
        None => rs.rows.push(vec![Value::Int(-1); rs.columns.len().max(1)]),
    }
    rs
}

struct FaultySession<'a>(&'a FaultyAdapter);

impl Session for FaultySession<'_> {
    fn execute(&mut self, qi: &QueryInstance) -> Result<ResultSet, AdapterError> {
        let rs = self.0.inner.run(qi)?;
        Ok(if qi.param_set.is_multiple_of(self.0.every) { corrupt(rs) } else { rs })
    }
}

impl Adapter for FaultyAdapter {
    fn id(&self) -> &str {
        "faulty"
    }

    fn dialect(&self) -> &str {
        CANONICAL_DIALECT
    }

    fn session(&self) -> Result<Box<dyn Session + '_>, AdapterError> {
        Ok(Box::new(FaultySession(self)))
    }
}
