use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use log::{info, warn};
use serde::Serialize;

use geobench_core::datagen::{generate_dataset, load_features, read_dataset, write_dataset, Dataset};
use geobench_core::harness::{
    build_plan, open_adapter, read_measurements, read_resources, run_experiment, verify_equivalence, write_measurements,
    write_resources, HarnessError, RunOutput, Workload, WorkloadPlan,
};
use geobench_core::model::FLOAT_REL_TOLERANCE;
use geobench_core::queryspec::{generate_param_sets, TemplateRegistry};
use geobench_core::report::{
    compare_runs, ecdf_series, summarize, write_bars_csv, write_comparison_json, write_ecdf_csv, write_ecdf_json,
    write_summary_json, ReportError,
};

use crate::config::ExperimentConfig;

pub const RESULTS_FILE: &str = "results.csv";
pub const RESOURCES_FILE: &str = "resources.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const PLAN_FILE: &str = "plan.json";
pub const MISMATCHES_FILE: &str = "mismatches.json";

/// How a command failed; decides the exit code.
#[derive(Debug)]
pub enum Failure {
    /// Results differ between systems (exit 1).
    Mismatch(String),
    /// Bad flags, config, or input files (exit 2).
    Usage(anyhow::Error),
    /// The benchmark itself could not run (exit 3).
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Mismatch(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Mismatch(m) => f.write_str(m),
            Failure::Usage(e) | Failure::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

fn harness_failure(e: HarnessError) -> Failure {
    match e {
        HarnessError::UnknownAdapter(_)
        | HarnessError::Config(_)
        | HarnessError::OpaqueResults(_)
        | HarnessError::PlanMismatch { .. }
        | HarnessError::Malformed { .. } => usage(e),
        _ => runtime(e),
    }
}

fn create(path: &Path) -> CmdResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).with_context(|| format!("creating {}", path.display())).map_err(runtime)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    serde_json::to_writer_pretty(create(path)?, value).map_err(runtime)
}

fn ensure_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(runtime)
}

/// Loads the configured dataset directory, or generates the dataset in memory.
pub fn load_dataset(cfg: &ExperimentConfig) -> CmdResult<Arc<Dataset>> {
    let mut ds = match &cfg.dataset.path {
        Some(dir) => read_dataset(dir).with_context(|| format!("loading dataset {}", dir.display())).map_err(usage)?,
        None => {
            let spec = cfg.dataset_spec();
            spec.validate().map_err(usage)?;
            generate_dataset(&spec).map_err(runtime)?
        }
    };
    if let Some(path) = &cfg.features {
        ds.features = load_features(path).map_err(usage)?;
        ds.stats.feature_names.clear();
        for f in &ds.features {
            ds.stats.feature_names.entry(f.kind).or_default().push(f.name.clone());
        }
    }
    Ok(Arc::new(ds))
}

pub fn load_registry(cfg: &ExperimentConfig) -> CmdResult<TemplateRegistry> {
    match &cfg.templates {
        Some(path) => TemplateRegistry::load(path).map_err(usage),
        None => Ok(TemplateRegistry::builtin(cfg.dataset.scenario)),
    }
}

pub fn build_workload(cfg: &ExperimentConfig, ds: &Dataset) -> CmdResult<Arc<Workload>> {
    let registry = load_registry(cfg)?;
    let mut params = BTreeMap::new();
    for t in registry.enabled() {
        let sets = generate_param_sets(t, &ds.stats, cfg.param_sets_for(t), cfg.workload.seed).map_err(usage)?;
        params.insert(t.name.clone(), sets);
    }
    Ok(Workload::new(registry, params))
}

fn run_id(cfg: &ExperimentConfig) -> String {
    format!("{}:{}", cfg.sut.adapter, cfg.sut.profile)
}

pub fn cmd_generate(cfg: &ExperimentConfig) -> CmdResult {
    let spec = cfg.dataset_spec();
    spec.validate().map_err(usage)?;
    let ds = generate_dataset(&spec).map_err(runtime)?;
    ensure_dir(&cfg.output)?;
    write_dataset(&ds, &cfg.output).map_err(runtime)?;
    info!(
        "wrote {} instants in {} trips to {}",
        ds.stats.total_points,
        ds.stats.total_trips,
        cfg.output.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct PlanFile<'a> {
    digest: String,
    #[serde(flatten)]
    plan: &'a WorkloadPlan,
}

/// Everything a run needs, prepared before the first query is sent.
struct Prepared {
    workload: Arc<Workload>,
    plan: WorkloadPlan,
    dataset: Arc<Dataset>,
}

fn prepare(cfg: &ExperimentConfig) -> CmdResult<Prepared> {
    cfg.validate().map_err(usage)?;
    let dataset = load_dataset(cfg)?;
    let workload = build_workload(cfg, &dataset)?;
    let clients = cfg.run_config("plan").map_err(usage)?.plan_clients();
    let plan = build_plan(&workload, clients, cfg.workload.seed).map_err(harness_failure)?;
    Ok(Prepared { workload, plan, dataset })
}

fn execute(cfg: &ExperimentConfig, p: &Prepared, capture: bool, quick: bool) -> CmdResult<RunOutput> {
    let spec = cfg.adapter_spec().map_err(usage)?;
    let adapter = open_adapter(&spec, p.dataset.clone(), p.workload.clone()).map_err(harness_failure)?;
    let mut run = cfg.run_config(&run_id(cfg)).map_err(usage)?;
    run.capture_results = capture;
    if quick {
        run.repetitions = 1;
        run.warmup = false;
    }
    if capture && !adapter.captures_results() {
        return Err(usage(anyhow!(
            "adapter {} returns opaque results, so its answers cannot be compared",
            adapter.id()
        )));
    }
    info!("{}: {} instances x {} repetitions, {} mode", run.run_id, p.plan.len(), run.repetitions, run.mode);
    let out = run_experiment(&run, &p.plan, adapter.as_ref()).map_err(harness_failure)?;
    if !out.aborted_repetitions.is_empty() {
        warn!("connection lost in repetitions {:?}; their remaining instances are recorded as failed", out.aborted_repetitions);
    }
    Ok(out)
}

pub fn cmd_run(cfg: &ExperimentConfig) -> CmdResult<RunOutput> {
    let p = prepare(cfg)?;
    let out = execute(cfg, &p, false, false)?;
    ensure_dir(&cfg.output)?;
    write_measurements(create(&cfg.output.join(RESULTS_FILE))?, &out.measurements).map_err(runtime)?;
    write_resources(create(&cfg.output.join(RESOURCES_FILE))?, &out.resources).map_err(runtime)?;
    write_json(&cfg.output.join(PLAN_FILE), &PlanFile { digest: p.plan.digest(), plan: &p.plan })?;
    let summary = summarize(&out.measurements, &out.resources);
    write_summary_json(create(&cfg.output.join(SUMMARY_FILE))?, &summary).map_err(runtime)?;
    let failed = out.measurements.iter().filter(|m| !m.success).count();
    if failed > 0 {
        warn!("{failed} of {} measurements failed", out.measurements.len());
    }
    info!("wrote {} measurements to {}", out.measurements.len(), cfg.output.display());
    Ok(out)
}

/// Runs the same plan on `cfg` and `other` and compares their answers.
pub fn cmd_verify(cfg: &ExperimentConfig, other: &ExperimentConfig) -> CmdResult {
    let left = prepare(cfg)?;
    let right = prepare(other)?;
    if left.plan.digest() != right.plan.digest() {
        return Err(usage(HarnessError::PlanMismatch { left: left.plan.digest(), right: right.plan.digest() }));
    }
    let a = execute(cfg, &left, true, true)?;
    let b = execute(other, &right, true, true)?;
    let report = verify_equivalence(&run_id(cfg), &a, &run_id(other), &b, FLOAT_REL_TOLERANCE).map_err(harness_failure)?;
    ensure_dir(&cfg.output)?;
    write_json(&cfg.output.join(MISMATCHES_FILE), &report)?;
    if report.is_clean() {
        info!("{} instances agree between {} and {}", report.compared, report.left, report.right);
        Ok(())
    } else {
        Err(Failure::Mismatch(format!(
            "{} of {} instances differ between {} and {}; see {}",
            report.mismatches.len(),
            report.compared,
            report.left,
            report.right,
            cfg.output.join(MISMATCHES_FILE).display()
        )))
    }
}

fn report_failure(e: ReportError) -> Failure {
    match e {
        ReportError::Io(_) => runtime(e),
        _ => usage(e),
    }
}

/// Summaries for each results file; comparisons of every later input against the first.
pub fn cmd_report(inputs: &[PathBuf], out: &Path) -> CmdResult {
    if inputs.is_empty() {
        return Err(usage(anyhow!("report needs at least one results.csv")));
    }
    let mut summaries = Vec::new();
    let mut all = Vec::new();
    for path in inputs {
        let label = path.display().to_string();
        let file = File::open(path).with_context(|| format!("opening {label}")).map_err(usage)?;
        let measurements = read_measurements(&label, file).map_err(harness_failure)?;
        let res_path = path.with_file_name(RESOURCES_FILE);
        let resources = match File::open(&res_path) {
            Ok(f) => read_resources(&res_path.display().to_string(), f).map_err(harness_failure)?,
            Err(_) => Vec::new(),
        };
        summaries.push(summarize(&measurements, &resources));
        all.extend(measurements);
    }
    let comparisons = summaries[1..]
        .iter()
        .map(|c| compare_runs(&summaries[0], c))
        .collect::<Result<Vec<_>, _>>()
        .map_err(report_failure)?;

    ensure_dir(out)?;
    for (i, s) in summaries.iter().enumerate() {
        let name = if i == 0 { SUMMARY_FILE.to_string() } else { format!("summary_{}.json", i + 1) };
        write_summary_json(create(&out.join(name))?, s).map_err(report_failure)?;
    }
    for (i, c) in comparisons.iter().enumerate() {
        let name = if i == 0 { "comparison.json".to_string() } else { format!("comparison_{}.json", i + 2) };
        write_comparison_json(create(&out.join(name))?, c).map_err(report_failure)?;
        if let Some(agg) = c.aggregate_pct {
            info!("{} vs {}: median latency {agg:+.2}% across queries", c.candidate, c.baseline);
        }
    }
    let series = ecdf_series(&all);
    write_ecdf_csv(create(&out.join("ecdf.csv"))?, &series).map_err(report_failure)?;
    write_ecdf_json(create(&out.join("ecdf.json"))?, &series).map_err(report_failure)?;
    let mut bars = summaries[0].clone();
    for s in &summaries[1..] {
        bars.queries.extend(s.queries.iter().cloned());
    }
    write_bars_csv(create(&out.join("bars.csv"))?, &bars).map_err(report_failure)?;
    Ok(())
}

/// Generate into `<out>/data`, run against it, and report into `<out>`.
pub fn cmd_bench(cfg: &ExperimentConfig) -> CmdResult {
    let mut data_cfg = cfg.clone();
    data_cfg.output = cfg.output.join("data");
    if cfg.dataset.path.is_none() {
        cmd_generate(&data_cfg)?;
    }
    let mut run_cfg = cfg.clone();
    if run_cfg.dataset.path.is_none() {
        run_cfg.dataset.path = Some(data_cfg.output.clone());
    }
    cmd_run(&run_cfg)?;
    cmd_report(&[cfg.output.join(RESULTS_FILE)], &cfg.output)
}
