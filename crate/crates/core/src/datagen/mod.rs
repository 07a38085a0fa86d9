//! Deterministic synthetic generators for the cycling, aviation, and AIS
//! scenarios.
//!
//! Datasets are built from whole trips: generation keeps emitting complete
//! trips until the target point count (the scale factor) is reached, so the
//! final count overshoots by at most one trip.

mod features;
mod io;
mod movement;

pub use features::{features_to_geojson, generate_supporting_features, load_features, parse_features, write_features};
pub use io::{read_dataset, write_dataset, INSTANTS_FILE, TRIPS_FILE, FEATURES_FILE, STATS_FILE};

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    BBox, FeatureKind, GeoPoint, ModelError, Period, SupportingFeature, TimeInstant,
    TrajectoryInstant, Trip, MICROS_PER_DAY,
};

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Cycling,
    Aviation,
    Ais,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Aviation, Scenario::Cycling, Scenario::Ais];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Cycling => "cycling",
            Scenario::Aviation => "aviation",
            Scenario::Ais => "ais",
        }
    }

    /// Aviation positions carry altitude.
    pub fn is_3d(self) -> bool {
        matches!(self, Scenario::Aviation)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = DatagenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cycling" => Ok(Scenario::Cycling),
            "aviation" | "flight" => Ok(Scenario::Aviation),
            "ais" => Ok(Scenario::Ais),
            other => Err(DatagenError::InvalidSpec(format!("unknown scenario `{other}`"))),
        }
    }
}

/// Parameters of one synthetic dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub scenario: Scenario,
    /// Target total number of instants.
    pub scale_factor: u64,
    pub seed: u64,
    pub bbox: BBox,
    pub time_extent: Period,
    pub trip_points_mean: f64,
    /// Log-normal shape parameter of the points-per-trip distribution.
    pub trip_points_dispersion: f64,
    pub sampling_interval_mean: f64,
}

impl DatasetSpec {
    /// Scenario defaults. Mean trip sizes match reference datasets of each
    /// scenario (cycling 10M/2,745 trips, aviation 10M/47,985, AIS 10M/3,057).
    pub fn default_for(scenario: Scenario, scale_factor: u64, seed: u64) -> Self {
        let (bbox, start, days, mean, interval) = match scenario {
            Scenario::Cycling => (
                BBox::new(13.08, 52.33, 13.77, 52.68),
                TimeInstant::from_ymd_hms(2024, 4, 1, 0, 0, 0),
                90,
                3_624.0,
                1.0,
            ),
            Scenario::Aviation => (
                BBox::new(5.85, 50.32, 9.47, 52.54),
                TimeInstant::from_ymd_hms(2023, 1, 1, 0, 0, 0),
                365,
                210.0,
                7.0,
            ),
            Scenario::Ais => (
                BBox::new(22.9, 37.2, 24.2, 38.1),
                TimeInstant::from_ymd_hms(2019, 1, 1, 0, 0, 0),
                90,
                3_252.0,
                35.0,
            ),
        };
        DatasetSpec {
            scenario,
            scale_factor,
            seed,
            bbox,
            time_extent: Period {
                start,
                end: start.plus_micros(days * MICROS_PER_DAY),
            },
            trip_points_mean: mean,
            trip_points_dispersion: 0.35,
            sampling_interval_mean: interval,
        }
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        let invalid = |m: String| Err(DatagenError::InvalidSpec(m));
        if self.scale_factor < 2 {
            return invalid(format!(
                "scale_factor must be at least 2 (one minimal trip), got {}",
                self.scale_factor
            ));
        }
        if !(2.0..).contains(&self.trip_points_mean) {
            return invalid(format!("trip_points_mean must be at least 2, got {}", self.trip_points_mean));
        }
        if (self.scale_factor as f64) < self.trip_points_mean {
            return invalid(format!(
                "scale_factor ({}) must be at least trip_points_mean ({})",
                self.scale_factor, self.trip_points_mean
            ));
        }
        if self.bbox.is_degenerate() {
            return invalid("bbox is degenerate".to_string());
        }
        GeoPoint::new(self.bbox.min_lon, self.bbox.min_lat)?;
        GeoPoint::new(self.bbox.max_lon, self.bbox.max_lat)?;
        if self.time_extent.is_empty() || self.time_extent.start > self.time_extent.end {
            return invalid("time_extent is empty".to_string());
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !(0.0..).contains(&self.trip_points_dispersion) || !positive(self.sampling_interval_mean) {
            return invalid("dispersion must be >= 0 and sampling interval > 0".to_string());
        }
        Ok(())
    }
}

/// Closed time span during which at least one trip is in progress.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivitySpan {
    pub start: TimeInstant,
    pub end: TimeInstant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    pub total_points: u64,
    pub total_trips: u64,
    pub avg_points_per_trip: f64,
    pub time_extent: Period,
    pub bbox: BBox,
    pub feature_names: BTreeMap<FeatureKind, Vec<String>>,
    /// Union of trip time spans, ascending and disjoint.
    #[serde(default)]
    pub activity: Vec<ActivitySpan>,
    /// Largest time gap between consecutive instants of one trip. Any
    /// stretch of this length inside an activity span holds an instant.
    #[serde(default)]
    pub max_sample_gap_micros: i64,
}

impl DatasetStats {
    pub fn compute(
        scenario: Option<Scenario>,
        instants: &[TrajectoryInstant],
        trips: &[Trip],
        features: &[SupportingFeature],
        time_extent: Period,
        bbox: BBox,
    ) -> Self {
        let total_points: u64 = trips.iter().map(|t| t.n_points as u64).sum();
        let total_trips = trips.len() as u64;
        let mut feature_names: BTreeMap<FeatureKind, Vec<String>> = BTreeMap::new();
        for f in features {
            feature_names.entry(f.kind).or_default().push(f.name.clone());
        }
        let mut spans: Vec<(TimeInstant, TimeInstant)> = trips.iter().map(|t| (t.start_t, t.end_t)).collect();
        spans.sort_unstable();
        let mut activity: Vec<ActivitySpan> = Vec::new();
        for (start, end) in spans {
            match activity.last_mut() {
                Some(last) if start <= last.end => last.end = last.end.max(end),
                _ => activity.push(ActivitySpan { start, end }),
            }
        }
        let max_sample_gap_micros = instants
            .windows(2)
            .filter(|w| w[0].trip_id == w[1].trip_id)
            .map(|w| w[1].t.micros() - w[0].t.micros())
            .max()
            .unwrap_or(0);
        DatasetStats {
            scenario,
            total_points,
            total_trips,
            avg_points_per_trip: if total_trips == 0 {
                0.0
            } else {
                total_points as f64 / total_trips as f64
            },
            time_extent,
            bbox,
            feature_names,
            activity,
            max_sample_gap_micros,
        }
    }

    pub fn names(&self, kind: FeatureKind) -> &[String] {
        self.feature_names.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// Instants grouped by trip, each trip in sequence order.
    pub instants: Vec<TrajectoryInstant>,
    pub trips: Vec<Trip>,
    pub features: Vec<SupportingFeature>,
    pub stats: DatasetStats,
}

impl Dataset {
    /// Checks the structural invariants: matching trip ids, complete monotone
    /// instant sequences, and trip summaries agreeing with their instants.
    pub fn validate(&self) -> Result<(), DatagenError> {
        let bad = |m: String| Err(DatagenError::InvalidDataset(m));
        if self.trips.is_empty() {
            return bad("dataset has no trips".to_string());
        }
        let mut by_trip: BTreeMap<u64, (usize, usize)> = BTreeMap::new();
        let mut idx = 0;
        while idx < self.instants.len() {
            let trip_id = self.instants[idx].trip_id;
            let start = idx;
            while idx < self.instants.len() && self.instants[idx].trip_id == trip_id {
                if idx > start {
                    let (prev, cur) = (&self.instants[idx - 1], &self.instants[idx]);
                    if cur.seq <= prev.seq || cur.t < prev.t {
                        return bad(format!("trip {trip_id}: instants not monotone at seq {}", cur.seq));
                    }
                }
                idx += 1;
            }
            if by_trip.insert(trip_id, (start, idx)).is_some() {
                return bad(format!("trip {trip_id}: instants are not contiguous"));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for trip in &self.trips {
            if !seen.insert(trip.trip_id) {
                return bad(format!("duplicate trip id {}", trip.trip_id));
            }
            let Some(&(start, end)) = by_trip.get(&trip.trip_id) else {
                return bad(format!("trip {} has no instants", trip.trip_id));
            };
            let run = &self.instants[start..end];
            if run.len() != trip.n_points as usize || trip.n_points < 2 {
                return bad(format!(
                    "trip {}: n_points {} but {} instants",
                    trip.trip_id,
                    trip.n_points,
                    run.len()
                ));
            }
            let (first, last) = (run[0], run[run.len() - 1]);
            if first.t != trip.start_t
                || last.t != trip.end_t
                || first.point != trip.start_point
                || last.point != trip.end_point
            {
                return bad(format!("trip {}: summary disagrees with its instants", trip.trip_id));
            }
        }
        if by_trip.len() != self.trips.len() {
            return bad("instants reference trips missing from the trip table".to_string());
        }
        let total: u64 = self.trips.iter().map(|t| t.n_points as u64).sum();
        if total != self.stats.total_points || self.trips.len() as u64 != self.stats.total_trips {
            return bad(format!(
                "stats disagree with data: {} points / {} trips recorded, {} / {} present",
                self.stats.total_points,
                self.stats.total_trips,
                total,
                self.trips.len()
            ));
        }
        Ok(())
    }

    pub fn scenario(&self) -> Option<Scenario> {
        self.stats.scenario
    }
}

/// Generates whole trips until the point count reaches `spec.scale_factor`.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset, DatagenError> {
    spec.validate()?;
    let features = generate_supporting_features(spec.scenario, spec.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut model = movement::MovementModel::new(spec, &features);

    let mut instants = Vec::with_capacity(spec.scale_factor as usize + spec.trip_points_mean as usize * 4);
    let mut trips = Vec::new();
    let mut total: u64 = 0;
    let mut trip_id: u64 = 0;
    while total < spec.scale_factor {
        trip_id += 1;
        let samples = model.generate_trip(&mut rng);
        let object_id = model.object_id(&mut rng);
        let n = samples.len() as u32;
        for (seq, (t, point)) in samples.iter().enumerate() {
            instants.push(TrajectoryInstant { trip_id, seq: seq as u32, t: *t, point: *point });
        }
        let (first, last) = (samples[0], samples[samples.len() - 1]);
        trips.push(Trip {
            trip_id,
            object_id,
            start_t: first.0,
            end_t: last.0,
            start_point: first.1,
            end_point: last.1,
            n_points: n,
        });
        total += n as u64;
    }
    let stats = DatasetStats::compute(
        Some(spec.scenario),
        &instants,
        &trips,
        &features,
        spec.time_extent,
        spec.bbox,
    );
    Ok(Dataset { instants, trips, features, stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(scenario: Scenario, seed: u64) -> DatasetSpec {
        let mut spec = DatasetSpec::default_for(scenario, 5_000, seed);
        spec.trip_points_mean = 120.0;
        spec
    }

    #[test]
    fn rejects_too_small_scale() {
        let mut spec = DatasetSpec::default_for(Scenario::Cycling, 1, 1);
        assert!(matches!(generate_dataset(&spec), Err(DatagenError::InvalidSpec(_))));
        spec.scale_factor = 0;
        let err = generate_dataset(&spec).unwrap_err().to_string();
        assert!(err.contains("scale_factor"), "{err}");
    }

    #[test]
    fn whole_trip_stopping_rule() {
        for scenario in Scenario::ALL {
            let spec = small_spec(scenario, 3);
            let ds = generate_dataset(&spec).unwrap();
            ds.validate().unwrap();
            let max_trip = ds.trips.iter().map(|t| t.n_points as u64).max().unwrap();
            assert!(ds.stats.total_points >= spec.scale_factor);
            assert!(ds.stats.total_points < spec.scale_factor + max_trip);
            // last trip is the one that crossed the threshold
            let before_last = ds.stats.total_points - ds.trips.last().unwrap().n_points as u64;
            assert!(before_last < spec.scale_factor);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = small_spec(Scenario::Ais, 11);
        assert_eq!(generate_dataset(&spec).unwrap(), generate_dataset(&spec).unwrap());
        let other = small_spec(Scenario::Ais, 12);
        assert_ne!(generate_dataset(&spec).unwrap().instants, generate_dataset(&other).unwrap().instants);
    }

    #[test]
    fn instants_stay_in_bbox_and_extent() {
        for scenario in Scenario::ALL {
            let spec = small_spec(scenario, 5);
            let ds = generate_dataset(&spec).unwrap();
            for i in &ds.instants {
                assert!(spec.bbox.contains(i.point.lon, i.point.lat), "{scenario}: {:?}", i.point);
                assert!(spec.time_extent.contains(i.t));
                assert_eq!(i.point.alt.is_some(), scenario.is_3d());
            }
        }
    }

    #[test]
    fn movement_speeds_are_plausible() {
        use crate::model::haversine_distance;
        let bounds = [(Scenario::Cycling, 1.0, 12.0), (Scenario::Aviation, 60.0, 600.0), (Scenario::Ais, 0.5, 30.0)];
        for (scenario, lo, hi) in bounds {
            let ds = generate_dataset(&small_spec(scenario, 9)).unwrap();
            let mut speeds = Vec::new();
            for w in ds.instants.windows(2) {
                if w[0].trip_id == w[1].trip_id {
                    let dt = (w[1].t.micros() - w[0].t.micros()) as f64 / 1e6;
                    speeds.push(haversine_distance(&w[0].point, &w[1].point) / dt);
                }
            }
            speeds.sort_by(f64::total_cmp);
            let median = speeds[speeds.len() / 2];
            assert!((lo..hi).contains(&median), "{scenario}: median speed {median}");
        }
    }

    #[test]
    fn stats_are_consistent() {
        let ds = generate_dataset(&small_spec(Scenario::Cycling, 2)).unwrap();
        let s = &ds.stats;
        assert_eq!(s.total_points, ds.instants.len() as u64);
        assert_eq!(s.total_trips, ds.trips.len() as u64);
        assert!((s.avg_points_per_trip - s.total_points as f64 / s.total_trips as f64).abs() < 1e-12);
        for w in s.activity.windows(2) {
            assert!(w[0].end < w[1].start);
        }
        for t in &ds.trips {
            assert!(s.activity.iter().any(|a| a.start <= t.start_t && t.end_t <= a.end));
        }
        assert!(s.max_sample_gap_micros > 0 && s.max_sample_gap_micros <= 1_000_000);
        assert!(s.names(FeatureKind::District).len() >= 12);
    }
}
