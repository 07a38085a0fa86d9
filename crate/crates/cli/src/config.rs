use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use geobench_core::datagen::{DatasetSpec, Scenario};
use geobench_core::harness::{AdapterSpec, Mode, RunConfig, ADAPTER_IDS, DEFAULT_RUN_REPETITIONS};
use geobench_core::queryspec::QueryTemplate;
use geobench_core::refstore::ConfigProfile;

pub const OUT_ENV: &str = "GEOBENCH_OUT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub scenario: Scenario,
    #[serde(default = "default_scale")]
    pub scale_factor: u64,
    #[serde(default)]
    pub seed: u64,
    /// Directory holding a previously generated dataset.
    #[serde(default)]
    pub path: Option<PathBuf>,
}

fn default_scale() -> u64 {
    100_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SutSection {
    #[serde(default = "default_adapter")]
    pub adapter: String,
    #[serde(default)]
    pub connection: Option<String>,
    #[serde(default)]
    pub dialect: Option<String>,
    /// `index/partitioning[(k)]`, e.g. `rtree/space(4)`.
    #[serde(default = "default_profile")]
    pub profile: String,
}

impl Default for SutSection {
    fn default() -> Self {
        SutSection { adapter: default_adapter(), connection: None, dialect: None, profile: default_profile() }
    }
}

fn default_adapter() -> String {
    "refstore".into()
}

fn default_profile() -> String {
    ConfigProfile::ORACLE.to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSection {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "one")]
    pub clients: usize,
    /// Overrides every template's own `repetition` when set.
    #[serde(default)]
    pub param_sets_per_query: Option<usize>,
    #[serde(default = "default_reps")]
    pub run_repetitions: u32,
    #[serde(default = "yes")]
    pub warmup: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Default for WorkloadSection {
    fn default() -> Self {
        WorkloadSection {
            mode: Mode::Sequential,
            clients: 1,
            param_sets_per_query: None,
            run_repetitions: default_reps(),
            warmup: true,
            seed: 0,
        }
    }
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn default_reps() -> u32 {
    DEFAULT_RUN_REPETITIONS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSection,
    /// GeoJSON file replacing the generated supporting features.
    #[serde(default)]
    pub features: Option<PathBuf>,
    /// Template file; the scenario's built-in templates when absent.
    #[serde(default)]
    pub templates: Option<PathBuf>,
    #[serde(default)]
    pub sut: SutSection,
    #[serde(default)]
    pub workload: WorkloadSection,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("geobench-out")
}

impl ExperimentConfig {
    /// Reads the file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: ExperimentConfig =
            serde_yaml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.dataset.path.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.features.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.templates.as_mut() {
            rebase(p);
        }
        rebase(&mut cfg.output);
        Ok(cfg)
    }

    /// Applies `--seed`, then the output override: `--out`, else `GEOBENCH_OUT`.
    pub fn apply_overrides(&mut self, out: Option<&Path>, seed: Option<u64>) {
        if let Some(seed) = seed {
            self.dataset.seed = seed;
            self.workload.seed = seed;
        }
        if let Some(out) = out {
            self.output = out.to_path_buf();
        } else if let Some(env) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
            self.output = PathBuf::from(env);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !ADAPTER_IDS.contains(&self.sut.adapter.as_str()) {
            bail!("unknown adapter {:?}; registered: {}", self.sut.adapter, ADAPTER_IDS.join(", "));
        }
        self.profile()?;
        for (what, p) in [
            ("dataset.path", self.dataset.path.as_ref()),
            ("features", self.features.as_ref()),
            ("templates", self.templates.as_ref()),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    bail!("{what}: {} does not exist", p.display());
                }
            }
        }
        if self.workload.param_sets_per_query == Some(0) {
            bail!("workload.param_sets_per_query must be at least 1");
        }
        self.run_config("check")?.validate()?;
        Ok(())
    }

    pub fn param_sets_for(&self, template: &QueryTemplate) -> usize {
        self.workload.param_sets_per_query.unwrap_or(template.repetition as usize)
    }

    pub fn profile(&self) -> Result<ConfigProfile> {
        self.sut.profile.parse::<ConfigProfile>().map_err(|e| anyhow::anyhow!("sut.profile: {e}"))
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec::default_for(self.dataset.scenario, self.dataset.scale_factor, self.dataset.seed)
    }

    pub fn adapter_spec(&self) -> Result<AdapterSpec> {
        Ok(AdapterSpec {
            id: self.sut.adapter.clone(),
            connection: self.sut.connection.clone(),
            dialect: self.sut.dialect.clone(),
            profile: self.profile()?,
        })
    }

    pub fn run_config(&self, run_id: &str) -> Result<RunConfig> {
        let w = &self.workload;
        Ok(RunConfig {
            run_id: run_id.into(),
            adapter: self.sut.adapter.clone(),
            profile: self.profile()?,
            mode: w.mode,
            clients: if w.mode == Mode::Sequential { 1 } else { w.clients },
            warmup: w.warmup,
            repetitions: w.run_repetitions,
            seed: w.seed,
            capture_results: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg: ExperimentConfig = serde_yaml::from_str("dataset: {scenario: ais}\n").unwrap();
        assert_eq!(cfg.workload.param_sets_per_query, None);
        let registry = geobench_core::queryspec::TemplateRegistry::builtin(Scenario::Ais);
        assert!(registry.enabled().all(|t| cfg.param_sets_for(t) == 50));
        assert_eq!(cfg.workload.run_repetitions, 3);
        assert!(cfg.workload.warmup);
        assert_eq!(cfg.sut.adapter, "refstore");
        assert_eq!(cfg.profile().unwrap(), ConfigProfile::ORACLE);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_keys_and_adapters() {
        assert!(serde_yaml::from_str::<ExperimentConfig>("dataset: {scenario: ais}\nwrkload: {}\n").is_err());
        let mut cfg: ExperimentConfig = serde_yaml::from_str("dataset: {scenario: ais}\n").unwrap();
        cfg.sut.adapter = "duckdb".into();
        assert!(cfg.validate().unwrap_err().to_string().contains("duckdb"));
        cfg.sut.adapter = "refstore".into();
        cfg.sut.profile = "rtree/diagonal".into();
        assert!(cfg.validate().is_err());
    }
}
