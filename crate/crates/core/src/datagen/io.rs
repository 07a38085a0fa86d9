//! On-disk dataset layout: `instants.csv`, `trips.csv`, `features.geojson`,
//! and `stats.json` in one directory.

use std::fs;
use std::path::{Path, PathBuf};

use super::features::{load_features, write_features};
use super::{Dataset, DatagenError, DatasetStats};
use crate::model::{GeoPoint, TimeInstant, TrajectoryInstant, Trip};

pub const INSTANTS_FILE: &str = "instants.csv";
pub const TRIPS_FILE: &str = "trips.csv";
pub const FEATURES_FILE: &str = "features.geojson";
pub const STATS_FILE: &str = "stats.json";

const INSTANT_HEADER: [&str; 5] = ["trip_id", "seq", "t", "lon", "lat"];
const TRIP_HEADER: [&str; 9] = [
    "trip_id", "object_id", "start_t", "end_t", "start_lon", "start_lat", "end_lon", "end_lat", "n_points",
];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatagenError + '_ {
    move |source| DatagenError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path, e: csv::Error) -> DatagenError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    DatagenError::Parse { path: path.to_path_buf(), line, column: 0, message: e.to_string() }
}

/// Writes the dataset directory, creating it if needed. Datasets violating
/// their invariants (including empty ones) are rejected before anything is written.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<(), DatagenError> {
    ds.validate()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let with_alt = ds.instants.iter().any(|i| i.point.alt.is_some());

    let path = dir.join(INSTANTS_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    let mut header: Vec<&str> = INSTANT_HEADER.to_vec();
    if with_alt {
        header.push("alt");
    }
    w.write_record(&header).map_err(|e| csv_err(&path, e))?;
    for i in &ds.instants {
        let mut rec = vec![
            i.trip_id.to_string(),
            i.seq.to_string(),
            i.t.to_iso(),
            i.point.lon.to_string(),
            i.point.lat.to_string(),
        ];
        if with_alt {
            rec.push(i.point.alt.map(|a| a.to_string()).unwrap_or_default());
        }
        w.write_record(&rec).map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(io_err(&path))?;

    let path = dir.join(TRIPS_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(TRIP_HEADER).map_err(|e| csv_err(&path, e))?;
    for t in &ds.trips {
        w.write_record([
            t.trip_id.to_string(),
            t.object_id.to_string(),
            t.start_t.to_iso(),
            t.end_t.to_iso(),
            t.start_point.lon.to_string(),
            t.start_point.lat.to_string(),
            t.end_point.lon.to_string(),
            t.end_point.lat.to_string(),
            t.n_points.to_string(),
        ])
        .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(io_err(&path))?;

    write_features(&ds.features, &dir.join(FEATURES_FILE))?;
    let path = dir.join(STATS_FILE);
    let stats = serde_json::to_string_pretty(&ds.stats).expect("stats serialize");
    fs::write(&path, stats).map_err(io_err(&path))?;
    Ok(())
}

struct Fields<'a> {
    path: &'a Path,
    line: usize,
    record: &'a csv::StringRecord,
}

impl Fields<'_> {
    fn err(&self, message: String) -> DatagenError {
        DatagenError::Parse { path: self.path.to_path_buf(), line: self.line, column: 0, message }
    }

    fn get<T: std::str::FromStr>(&self, idx: usize, name: &str) -> Result<T, DatagenError> {
        let raw = self.record.get(idx).ok_or_else(|| self.err(format!("missing field `{name}`")))?;
        raw.parse().map_err(|_| self.err(format!("invalid `{name}` value `{raw}`")))
    }

    fn time(&self, idx: usize, name: &str) -> Result<TimeInstant, DatagenError> {
        let raw = self.record.get(idx).ok_or_else(|| self.err(format!("missing field `{name}`")))?;
        TimeInstant::parse_iso(raw).map_err(|e| self.err(e.to_string()))
    }

    fn point(&self, lon: usize, lat: usize) -> Result<GeoPoint, DatagenError> {
        let (lon, lat): (f64, f64) = (self.get(lon, "lon")?, self.get(lat, "lat")?);
        GeoPoint::new(lon, lat).map_err(|e| self.err(e.to_string()))
    }
}

fn open_csv(path: &Path, expected: &[&str]) -> Result<(csv::Reader<fs::File>, bool), DatagenError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let names: Vec<&str> = header.iter().collect();
    let with_extra = names.len() == expected.len() + 1;
    if names[..expected.len().min(names.len())] != expected[..] || names.len() > expected.len() + 1 {
        return Err(DatagenError::Format {
            path: path.to_path_buf(),
            message: format!("unexpected header {names:?}, expected {expected:?}"),
        });
    }
    Ok((reader, with_extra))
}

/// Reads and validates a dataset directory. Any structural inconsistency,
/// including a truncated file, is an error rather than a partial dataset.
pub fn read_dataset(dir: &Path) -> Result<Dataset, DatagenError> {
    let path: PathBuf = dir.join(STATS_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let stats: DatasetStats = serde_json::from_str(&text).map_err(|e| DatagenError::Parse {
        path: path.clone(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let path = dir.join(INSTANTS_FILE);
    let (mut reader, with_alt) = open_csv(&path, &INSTANT_HEADER)?;
    if with_alt && reader.headers().map_err(|e| csv_err(&path, e))?.get(5) != Some("alt") {
        return Err(DatagenError::Format { path, message: "sixth instants column must be `alt`".into() });
    }
    let mut instants = Vec::with_capacity(stats.total_points as usize);
    let mut record = csv::StringRecord::new();
    let mut line = 1;
    while reader.read_record(&mut record).map_err(|e| csv_err(&path, e))? {
        line += 1;
        let f = Fields { path: &path, line, record: &record };
        let mut point = f.point(3, 4)?;
        if with_alt {
            point.alt = Some(f.get(5, "alt")?);
        }
        instants.push(TrajectoryInstant { trip_id: f.get(0, "trip_id")?, seq: f.get(1, "seq")?, t: f.time(2, "t")?, point });
    }

    let path = dir.join(TRIPS_FILE);
    let (mut reader, extra) = open_csv(&path, &TRIP_HEADER)?;
    if extra {
        return Err(DatagenError::Format { path, message: "unexpected extra trips column".into() });
    }
    let mut trips = Vec::with_capacity(stats.total_trips as usize);
    let mut line = 1;
    while reader.read_record(&mut record).map_err(|e| csv_err(&path, e))? {
        line += 1;
        let f = Fields { path: &path, line, record: &record };
        trips.push(Trip {
            trip_id: f.get(0, "trip_id")?,
            object_id: f.get(1, "object_id")?,
            start_t: f.time(2, "start_t")?,
            end_t: f.time(3, "end_t")?,
            start_point: f.point(4, 5)?,
            end_point: f.point(6, 7)?,
            n_points: f.get(8, "n_points")?,
        });
    }
    // trip summaries carry no altitude column; take it from the instants
    if with_alt {
        let mut idx = 0;
        for trip in trips.iter_mut() {
            while idx < instants.len() && instants[idx].trip_id != trip.trip_id {
                idx += 1;
            }
            if idx < instants.len() {
                trip.start_point.alt = instants[idx].point.alt;
                let last = idx + trip.n_points as usize - 1;
                if let Some(end) = instants.get(last) {
                    trip.end_point.alt = end.point.alt;
                }
            }
        }
    }

    let features = load_features(&dir.join(FEATURES_FILE))?;
    let ds = Dataset { instants, trips, features, stats };
    ds.validate()?;
    Ok(ds)
}
