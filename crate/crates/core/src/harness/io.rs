//! results.csv and resources.csv.

use std::io::{Read, Write};

use super::{HarnessError, Measurement, ResourceSample};
use crate::model::TimeInstant;

pub const MEASUREMENT_HEADER: [&str; 10] =
    ["run_id", "repetition", "query", "param_set", "client", "issue_ts", "latency_us", "rows", "success", "error"];
pub const RESOURCE_HEADER: [&str; 3] = ["ts", "cpu_percent", "rss_bytes"];

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Io(std::io::Error::other(e))
}

pub fn write_measurements<W: Write>(w: W, measurements: &[Measurement]) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(MEASUREMENT_HEADER).map_err(csv_err)?;
    for m in measurements {
        out.write_record([
            m.run_id.clone(),
            m.repetition.to_string(),
            m.query.clone(),
            m.param_set.to_string(),
            m.client.to_string(),
            m.issue_ts.to_iso(),
            m.latency_us.to_string(),
            m.rows.to_string(),
            m.success.to_string(),
            m.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_resources<W: Write>(w: W, samples: &[ResourceSample]) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RESOURCE_HEADER).map_err(csv_err)?;
    for s in samples {
        out.write_record([s.t.to_iso(), format!("{:.3}", s.cpu_percent), s.rss_bytes.to_string()]).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn check_header(path: &str, got: &csv::StringRecord, want: &[&str]) -> Result<(), HarnessError> {
    if got.iter().ne(want.iter().copied()) {
        return Err(HarnessError::Malformed {
            path: path.into(),
            message: format!("header must be {}", want.join(",")),
        });
    }
    Ok(())
}

fn field<T: std::str::FromStr>(path: &str, row: usize, rec: &csv::StringRecord, col: usize) -> Result<T, HarnessError> {
    let text = rec.get(col).unwrap_or("");
    text.parse().map_err(|_| HarnessError::Malformed {
        path: path.into(),
        message: format!("row {row}: bad {} value {text:?}", MEASUREMENT_HEADER.get(col).unwrap_or(&"?")),
    })
}

/// Parses results.csv. `path` only labels errors; data rows count from 1.
pub fn read_measurements<R: Read>(path: &str, r: R) -> Result<Vec<Measurement>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    check_header(path, &header, &MEASUREMENT_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| HarnessError::Malformed { path: path.into(), message: format!("row {row}: {e}") })?;
        let error = rec.get(9).filter(|e| !e.is_empty()).map(str::to_string);
        let success: bool = field(path, row, &rec, 8)?;
        if success == error.is_some() {
            return Err(HarnessError::Malformed {
                path: path.into(),
                message: format!("row {row}: exactly one of success and error must be set"),
            });
        }
        let issue_ts = TimeInstant::parse_iso(rec.get(5).unwrap_or("")).map_err(|e| HarnessError::Malformed {
            path: path.into(),
            message: format!("row {row}: bad issue_ts: {e}"),
        })?;
        out.push(Measurement {
            run_id: rec.get(0).unwrap_or("").to_string(),
            repetition: field(path, row, &rec, 1)?,
            query: rec.get(2).unwrap_or("").to_string(),
            param_set: field(path, row, &rec, 3)?,
            client: field(path, row, &rec, 4)?,
            issue_ts,
            latency_us: field(path, row, &rec, 6)?,
            rows: field(path, row, &rec, 7)?,
            success,
            error,
        });
    }
    Ok(out)
}

pub fn read_resources<R: Read>(path: &str, r: R) -> Result<Vec<ResourceSample>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    check_header(path, &header, &RESOURCE_HEADER)?;
    let bad = |row: usize| HarnessError::Malformed { path: path.into(), message: format!("row {row}: bad resource sample") };
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|_| bad(i + 1))?;
        let t = TimeInstant::parse_iso(rec.get(0).unwrap_or("")).map_err(|_| bad(i + 1))?;
        let cpu_percent = rec.get(1).and_then(|v| v.parse().ok()).ok_or_else(|| bad(i + 1))?;
        let rss_bytes = rec.get(2).and_then(|v| v.parse().ok()).ok_or_else(|| bad(i + 1))?;
        out.push(ResourceSample { t, cpu_percent, rss_bytes });
    }
    Ok(out)
}
