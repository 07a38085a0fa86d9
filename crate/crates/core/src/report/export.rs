//! summary.json, comparison.json, ecdf.csv / ecdf.json, and bars.csv.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{ecdf_points, ComparisonReport, ReportError, SummaryReport};
use crate::harness::Measurement;

pub const ECDF_HEADER: [&str; 4] = ["query", "run", "latency_us", "fraction"];
pub const BARS_HEADER: [&str; 5] = ["query", "run", "median_us", "p99_us", "throughput_qps"];

/// ECDF of successful latencies of one query in one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EcdfSeries {
    pub query: String,
    pub run: String,
    pub points: Vec<(u64, f64)>,
}

pub fn ecdf_series(measurements: &[Measurement]) -> Vec<EcdfSeries> {
    let mut groups: BTreeMap<(&str, &str), Vec<u64>> = BTreeMap::new();
    for m in measurements.iter().filter(|m| m.success) {
        groups.entry((m.query.as_str(), m.run_id.as_str())).or_default().push(m.latency_us);
    }
    groups
        .into_iter()
        .map(|((query, run), lat)| EcdfSeries {
            query: query.into(),
            run: run.into(),
            points: ecdf_points(&lat).expect("groups are non-empty"),
        })
        .collect()
}

pub fn write_summary_json<W: Write>(w: W, report: &SummaryReport) -> Result<(), ReportError> {
    serde_json::to_writer_pretty(w, report)?;
    Ok(())
}

pub fn read_summary_json<R: Read>(r: R) -> Result<SummaryReport, ReportError> {
    Ok(serde_json::from_reader(r)?)
}

pub fn write_comparison_json<W: Write>(w: W, report: &ComparisonReport) -> Result<(), ReportError> {
    serde_json::to_writer_pretty(w, report)?;
    Ok(())
}

pub fn read_comparison_json<R: Read>(r: R) -> Result<ComparisonReport, ReportError> {
    Ok(serde_json::from_reader(r)?)
}

pub fn write_ecdf_json<W: Write>(w: W, series: &[EcdfSeries]) -> Result<(), ReportError> {
    serde_json::to_writer_pretty(w, series)?;
    Ok(())
}

pub fn read_ecdf_json<R: Read>(r: R) -> Result<Vec<EcdfSeries>, ReportError> {
    Ok(serde_json::from_reader(r)?)
}

pub fn write_ecdf_csv<W: Write>(w: W, series: &[EcdfSeries]) -> Result<(), ReportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(ECDF_HEADER)?;
    for s in series {
        for (latency, fraction) in &s.points {
            out.write_record([s.query.as_str(), s.run.as_str(), &latency.to_string(), &fraction.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

fn header_check(path: &str, rdr: &mut csv::Reader<impl Read>, want: &[&str]) -> Result<(), ReportError> {
    if rdr.headers()?.iter().ne(want.iter().copied()) {
        return Err(ReportError::Malformed { path: path.into(), message: format!("header must be {}", want.join(",")) });
    }
    Ok(())
}

fn bad(path: &str, row: usize) -> ReportError {
    ReportError::Malformed { path: path.into(), message: format!("row {row}: unparsable") }
}

pub fn read_ecdf_csv<R: Read>(path: &str, r: R) -> Result<Vec<EcdfSeries>, ReportError> {
    let mut rdr = csv::Reader::from_reader(r);
    header_check(path, &mut rdr, &ECDF_HEADER)?;
    let mut out: Vec<EcdfSeries> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let latency: u64 = rec[2].parse().map_err(|_| bad(path, i + 1))?;
        let fraction: f64 = rec[3].parse().map_err(|_| bad(path, i + 1))?;
        match out.last_mut() {
            Some(s) if s.query == rec[0] && s.run == rec[1] => s.points.push((latency, fraction)),
            _ => out.push(EcdfSeries { query: rec[0].into(), run: rec[1].into(), points: vec![(latency, fraction)] }),
        }
    }
    Ok(out)
}

/// One bar-chart row. Latency fields are empty for queries without successes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarRow {
    pub query: String,
    pub run: String,
    pub median_us: Option<f64>,
    pub p99_us: Option<f64>,
    pub throughput_qps: f64,
}

pub fn write_bars_csv<W: Write>(w: W, report: &SummaryReport) -> Result<(), ReportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(BARS_HEADER)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for q in &report.queries {
        out.write_record([
            q.query.clone(),
            q.run.clone(),
            opt(q.latency.as_ref().map(|l| l.median_us)),
            opt(q.latency.as_ref().map(|l| l.p99_us)),
            q.throughput_qps.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_bars_csv<R: Read>(path: &str, r: R) -> Result<Vec<BarRow>, ReportError> {
    let mut rdr = csv::Reader::from_reader(r);
    header_check(path, &mut rdr, &BARS_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let opt = |s: &str| -> Result<Option<f64>, ReportError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(path, i + 1))
            }
        };
        out.push(BarRow {
            query: rec[0].into(),
            run: rec[1].into(),
            median_us: opt(&rec[2])?,
            p99_us: opt(&rec[3])?,
            throughput_qps: rec[4].parse().map_err(|_| bad(path, i + 1))?,
        });
    }
    Ok(out)
}
