//! Latency statistics, run summaries, run comparisons, and exports.
//!
//! Failed measurements never enter latency statistics; they are counted in
//! `error_count`. Repetitions of a run are pooled, with a per-repetition
//! breakdown kept alongside.

mod export;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{Measurement, ResourceSample};

pub use export::{
    ecdf_series, read_bars_csv, read_comparison_json, read_ecdf_csv, read_ecdf_json, read_summary_json,
    write_bars_csv, write_comparison_json, write_ecdf_csv, write_ecdf_json, write_summary_json, BarRow, EcdfSeries,
    BARS_HEADER, ECDF_HEADER,
};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no samples")]
    Empty,
    #[error("quantile level {0} outside [0, 1]")]
    Level(f64),
    #[error("query sets differ: only in baseline {only_baseline:?}, only in candidate {only_candidate:?}")]
    QueryMismatch { only_baseline: Vec<String>, only_candidate: Vec<String> },
    #[error("a comparison needs single-run summaries, got {0} runs")]
    MultipleRuns(usize),
    #[error("{path}: {message}")]
    Malformed { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn nearest_rank(n: usize, p: f64) -> usize {
    // the epsilon keeps p·n that is integral in exact arithmetic from rounding up
    ((p * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

/// Quantile of an ascending slice; see [`quantile`].
pub fn quantile_sorted(sorted: &[u64], p: f64) -> Result<f64, ReportError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ReportError::Level(p));
    }
    let n = sorted.len();
    if n == 0 {
        return Err(ReportError::Empty);
    }
    if p == 0.5 {
        return Ok(if n % 2 == 1 {
            sorted[n / 2] as f64
        } else {
            (sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64) / 2.0
        });
    }
    Ok(sorted[nearest_rank(n, p) - 1] as f64)
}

/// The median averages the two middle values for even counts; any other
/// level uses the nearest rank `ceil(p·n)`.
pub fn quantile(samples: &[u64], p: f64) -> Result<f64, ReportError> {
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    quantile_sorted(&sorted, p)
}

/// Distinct sample values with the fraction of samples at or below each.
pub fn ecdf_points(samples: &[u64]) -> Result<Vec<(u64, f64)>, ReportError> {
    if samples.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let mut out: Vec<(u64, f64)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        if i + 1 == n || sorted[i + 1] != v {
            out.push((v, (i + 1) as f64 / n as f64));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub min_us: u64,
    pub median_us: f64,
    pub mean_us: f64,
    pub p95_us: f64,
    pub p99_us: f64,
    pub max_us: u64,
}

impl LatencyStats {
    pub fn of(samples: &[u64]) -> Result<Self, ReportError> {
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        let n = sorted.len();
        if n == 0 {
            return Err(ReportError::Empty);
        }
        let sum: u128 = sorted.iter().map(|&v| v as u128).sum();
        Ok(LatencyStats {
            min_us: sorted[0],
            median_us: quantile_sorted(&sorted, 0.5)?,
            mean_us: sum as f64 / n as f64,
            p95_us: quantile_sorted(&sorted, 0.95)?,
            p99_us: quantile_sorted(&sorted, 0.99)?,
            max_us: sorted[n - 1],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionStats {
    pub repetition: u32,
    pub count: u64,
    pub error_count: u64,
    pub median_us: Option<f64>,
}

/// Statistics of one query within one run. `count` is the number of
/// successful measurements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuerySummary {
    pub query: String,
    pub run: String,
    pub count: u64,
    pub error_count: u64,
    pub latency: Option<LatencyStats>,
    /// Successful executions per second of the run's measured wall time.
    pub throughput_qps: f64,
    pub repetitions: Vec<RepetitionStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: String,
    pub repetitions: u32,
    pub measurements: u64,
    pub error_count: u64,
    /// Sum over repetitions of first issue to last completion, in seconds.
    pub total_duration_s: f64,
    pub throughput_qps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceSummary {
    pub samples: u64,
    pub mean_cpu_percent: f64,
    pub max_cpu_percent: f64,
    pub mean_rss_bytes: f64,
    pub max_rss_bytes: u64,
}

impl ResourceSummary {
    pub fn of(samples: &[ResourceSample]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let n = samples.len() as f64;
        Some(ResourceSummary {
            samples: samples.len() as u64,
            mean_cpu_percent: samples.iter().map(|s| s.cpu_percent).sum::<f64>() / n,
            max_cpu_percent: samples.iter().map(|s| s.cpu_percent).fold(0.0, f64::max),
            mean_rss_bytes: samples.iter().map(|s| s.rss_bytes as f64).sum::<f64>() / n,
            max_rss_bytes: samples.iter().map(|s| s.rss_bytes).max().unwrap_or(0),
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub runs: Vec<RunSummary>,
    /// Sorted by (query, run).
    pub queries: Vec<QuerySummary>,
    pub resources: Option<ResourceSummary>,
}

impl SummaryReport {
    pub fn query(&self, name: &str) -> Option<&QuerySummary> {
        self.queries.iter().find(|q| q.query == name)
    }
}

/// Wall span of one repetition: first issue to last completion.
fn span_micros(ms: &[&Measurement]) -> i64 {
    let start = ms.iter().map(|m| m.issue_ts.micros()).min().unwrap_or(0);
    let end = ms.iter().map(|m| m.end_micros()).max().unwrap_or(0);
    (end - start).max(0)
}

pub fn summarize(measurements: &[Measurement], resources: &[ResourceSample]) -> SummaryReport {
    let mut by_run: BTreeMap<&str, Vec<&Measurement>> = BTreeMap::new();
    for m in measurements {
        by_run.entry(m.run_id.as_str()).or_default().push(m);
    }
    let mut runs = Vec::new();
    let mut queries = Vec::new();
    for (run, ms) in &by_run {
        let mut by_rep: BTreeMap<u32, Vec<&Measurement>> = BTreeMap::new();
        for m in ms {
            by_rep.entry(m.repetition).or_default().push(m);
        }
        let wall_us: i64 = by_rep.values().map(|r| span_micros(r)).sum();
        let wall_s = wall_us as f64 / 1e6;
        let per_second = |n: u64| if wall_s > 0.0 { n as f64 / wall_s } else { 0.0 };
        let errors = ms.iter().filter(|m| !m.success).count() as u64;
        runs.push(RunSummary {
            run: run.to_string(),
            repetitions: by_rep.len() as u32,
            measurements: ms.len() as u64,
            error_count: errors,
            total_duration_s: wall_s,
            throughput_qps: per_second(ms.len() as u64 - errors),
        });

        let mut by_query: BTreeMap<&str, Vec<&Measurement>> = BTreeMap::new();
        for m in ms {
            by_query.entry(m.query.as_str()).or_default().push(m);
        }
        for (query, qms) in by_query {
            let ok: Vec<u64> = qms.iter().filter(|m| m.success).map(|m| m.latency_us).collect();
            let mut reps: BTreeMap<u32, (Vec<u64>, u64)> = BTreeMap::new();
            for m in &qms {
                let e = reps.entry(m.repetition).or_default();
                if m.success {
                    e.0.push(m.latency_us);
                } else {
                    e.1 += 1;
                }
            }
            queries.push(QuerySummary {
                query: query.to_string(),
                run: run.to_string(),
                count: ok.len() as u64,
                error_count: (qms.len() - ok.len()) as u64,
                latency: LatencyStats::of(&ok).ok(),
                throughput_qps: per_second(ok.len() as u64),
                repetitions: reps
                    .into_iter()
                    .map(|(repetition, (lat, errors))| RepetitionStats {
                        repetition,
                        count: lat.len() as u64,
                        error_count: errors,
                        median_us: quantile(&lat, 0.5).ok(),
                    })
                    .collect(),
            });
        }
    }
    queries.sort_by(|a, b| (&a.query, &a.run).cmp(&(&b.query, &b.run)));
    SummaryReport { runs, queries, resources: ResourceSummary::of(resources) }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryComparison {
    pub query: String,
    pub baseline_median_us: Option<f64>,
    pub candidate_median_us: Option<f64>,
    /// `(baseline − candidate) / baseline` in percent; positive means the candidate is faster.
    pub relative_diff_pct: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub baseline: String,
    pub candidate: String,
    pub queries: Vec<QueryComparison>,
    /// Arithmetic mean of the per-query differences that are defined.
    pub aggregate_pct: Option<f64>,
}

fn single_run(r: &SummaryReport) -> Result<String, ReportError> {
    match r.runs.as_slice() {
        [one] => Ok(one.run.clone()),
        runs => Err(ReportError::MultipleRuns(runs.len())),
    }
}

/// Relative median difference per query. Queries whose median is missing on
/// either side (all executions failed) get no difference and are left out of
/// the aggregate.
pub fn compare_runs(baseline: &SummaryReport, candidate: &SummaryReport) -> Result<ComparisonReport, ReportError> {
    let (b_run, c_run) = (single_run(baseline)?, single_run(candidate)?);
    let b_names: BTreeSet<&str> = baseline.queries.iter().map(|q| q.query.as_str()).collect();
    let c_names: BTreeSet<&str> = candidate.queries.iter().map(|q| q.query.as_str()).collect();
    if b_names != c_names {
        return Err(ReportError::QueryMismatch {
            only_baseline: b_names.difference(&c_names).map(|s| s.to_string()).collect(),
            only_candidate: c_names.difference(&b_names).map(|s| s.to_string()).collect(),
        });
    }
    let median = |r: &SummaryReport, q: &str| r.query(q).and_then(|s| s.latency.as_ref()).map(|l| l.median_us);
    let queries: Vec<QueryComparison> = b_names
        .iter()
        .map(|&q| {
            let (b, c) = (median(baseline, q), median(candidate, q));
            let relative_diff_pct = match (b, c) {
                (Some(b), Some(c)) if b > 0.0 => Some((b - c) / b * 100.0),
                _ => None,
            };
            QueryComparison {
                query: q.to_string(),
                baseline_median_us: b,
                candidate_median_us: c,
                relative_diff_pct,
            }
        })
        .collect();
    let diffs: Vec<f64> = queries.iter().filter_map(|q| q.relative_diff_pct).collect();
    let aggregate_pct = (!diffs.is_empty()).then(|| diffs.iter().sum::<f64>() / diffs.len() as f64);
    Ok(ComparisonReport { baseline: b_run, candidate: c_run, queries, aggregate_pct })
}
