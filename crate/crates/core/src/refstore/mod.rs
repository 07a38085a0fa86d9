//! In-process reference store answering the canonical queries.
//!
//! Two engines implement [`QueryEngine`]: a full-scan engine that loops over
//! the dataset and serves as the correctness oracle, and an indexed engine
//! whose layout is chosen by a [`ConfigProfile`]. Both evaluate the same
//! exact predicates, so answers never depend on the profile.

mod canonical;
mod indexed;
mod scan;
pub mod spatial;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::model::{haversine_distance, BBox, FeatureKind, GeoPoint, Geometry, Period, Polygon, TimeInstant, TripId};
pub use indexed::IndexedEngine;
pub use scan::ScanEngine;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StoreError {
    #[error("unknown {kind} `{name}`")]
    UnknownFeature { kind: FeatureKind, name: String },
    #[error("{kind} `{name}` is not a polygon")]
    NotPolygon { kind: FeatureKind, name: String },
    #[error("no {0} polygons in the dataset")]
    NoRegions(FeatureKind),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown canonical query `{0}`")]
    UnknownQuery(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    #[default]
    None,
    Grid,
    Rtree,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partitioning {
    #[default]
    None,
    Time,
    Space,
}

pub const DEFAULT_PARTITIONS: u32 = 4;

fn default_k() -> u32 {
    DEFAULT_PARTITIONS
}

/// Index variant and partitioning strategy of the reference store.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfigProfile {
    #[serde(default)]
    pub index: IndexKind,
    #[serde(default)]
    pub partitioning: Partitioning,
    #[serde(default = "default_k")]
    pub k: u32,
}

impl Default for ConfigProfile {
    fn default() -> Self {
        ConfigProfile::ORACLE
    }
}

impl ConfigProfile {
    /// The full-scan engine.
    pub const ORACLE: ConfigProfile = ConfigProfile { index: IndexKind::None, partitioning: Partitioning::None, k: DEFAULT_PARTITIONS };

    pub const fn new(index: IndexKind, partitioning: Partitioning, k: u32) -> Self {
        ConfigProfile { index, partitioning, k }
    }

    /// The six indexed profiles: {grid, rtree} x {none, time(4), space(4)}.
    pub fn indexed_profiles() -> Vec<ConfigProfile> {
        let mut out = Vec::new();
        for index in [IndexKind::Grid, IndexKind::Rtree] {
            for partitioning in [Partitioning::None, Partitioning::Time, Partitioning::Space] {
                out.push(ConfigProfile::new(index, partitioning, DEFAULT_PARTITIONS));
            }
        }
        out
    }

    pub fn is_oracle(&self) -> bool {
        self.index == IndexKind::None && self.partitioning == Partitioning::None
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        if self.k == 0 {
            return Err(StoreError::InvalidArgument("partition count k must be at least 1".into()));
        }
        Ok(())
    }
}

impl fmt::Display for ConfigProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let index = match self.index {
            IndexKind::None => "none",
            IndexKind::Grid => "grid",
            IndexKind::Rtree => "rtree",
        };
        match self.partitioning {
            Partitioning::None => write!(f, "{index}/none"),
            Partitioning::Time => write!(f, "{index}/time({})", self.k),
            Partitioning::Space => write!(f, "{index}/space({})", self.k),
        }
    }
}

impl FromStr for ConfigProfile {
    type Err = String;

    /// Parses `index/partitioning`, e.g. `rtree/space(4)`, `grid/time`, `none/none`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (index, part) = s.split_once('/').unwrap_or((s, "none"));
        let index = match index.trim() {
            "none" => IndexKind::None,
            "grid" => IndexKind::Grid,
            "rtree" => IndexKind::Rtree,
            other => return Err(format!("unknown index `{other}`")),
        };
        let part = part.trim();
        let (name, k) = match part.split_once('(') {
            Some((name, rest)) => {
                let k = rest
                    .strip_suffix(')')
                    .and_then(|k| k.trim().parse::<u32>().ok())
                    .ok_or_else(|| format!("invalid partition count in `{part}`"))?;
                (name, k)
            }
            None => (part, DEFAULT_PARTITIONS),
        };
        let partitioning = match name {
            "none" => Partitioning::None,
            "time" => Partitioning::Time,
            "space" => Partitioning::Space,
            other => return Err(format!("unknown partitioning `{other}`")),
        };
        let profile = ConfigProfile { index, partitioning, k };
        profile.validate().map_err(|e| e.to_string())?;
        Ok(profile)
    }
}

/// A query anchor: a named supporting feature or a literal point.
#[derive(Clone, Debug, PartialEq)]
pub enum Anchor {
    Feature(FeatureKind, String),
    Point(GeoPoint),
}

/// Primitives over resolved arguments. Trip sets are returned sorted ascending.
pub trait QueryEngine: Send + Sync {
    fn count_instants_in_period(&self, p: &Period) -> u64;
    fn count_instants_per_hour(&self, p: &Period) -> Vec<(TimeInstant, u64)>;
    fn distinct_active_trips(&self, p: &Period) -> u64;
    fn active_trips_at_hour(&self, hour: u8, p: &Period) -> u64;
    fn trips_in_polygon(&self, region: &Polygon, p: Option<&Period>) -> Vec<TripId>;
    fn trips_within_distance(&self, anchor: &Geometry, radius: f64, p: Option<&Period>) -> Vec<TripId>;
    fn nearest_trip(&self, point: &GeoPoint, max_distance: f64) -> Option<(TripId, f64)>;
    fn avg_duration_started_in(&self, p: &Period) -> Option<f64>;
    fn avg_duration_ending_near(&self, anchor: &Geometry, radius: f64) -> Option<f64>;
    fn avg_duration_started_near_in(&self, anchor: &Geometry, radius: f64, p: &Period) -> Option<f64>;
    fn trips_connecting(&self, a: &Geometry, b: &Geometry, radius: f64) -> Vec<TripId>;
    fn trips_crossing_min_regions(&self, regions: &[&Polygon], k: u32, p: &Period) -> Vec<TripId>;
    fn terminal_event_count(&self, anchor: &Geometry, radius: f64, p: &Period) -> u64;
}

/// Mean of durations given as an exact microsecond sum, in seconds.
pub(crate) fn mean_seconds(sum_micros: i128, n: u64) -> Option<f64> {
    (n > 0).then(|| sum_micros as f64 / n as f64 / 1e6)
}

/// Conservative search box for "within `radius` of `anchor`". Polygon edges
/// are great-circle arcs that can bulge past the vertex box; every arc point
/// lies within half the edge length of an endpoint, so padding by that covers it.
pub(crate) fn search_box(anchor: &Geometry, radius: f64) -> BBox {
    match anchor {
        Geometry::Point(p) => BBox::around(p, radius),
        Geometry::Polygon(poly) => {
            let bulge = poly.edges().map(|(a, b)| haversine_distance(a, b)).fold(0.0, f64::max) / 2.0;
            poly.bbox().expand_by_meters(radius + bulge + 1.0)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoadInfo {
    pub profile: ConfigProfile,
    pub build_time: Duration,
    /// Instant count per partition, in partition order.
    pub partition_sizes: Vec<usize>,
}

/// A loaded, read-only store.
pub struct StoreHandle {
    dataset: Arc<Dataset>,
    features: HashMap<(FeatureKind, String), usize>,
    engine: Box<dyn QueryEngine>,
    info: LoadInfo,
}

impl fmt::Debug for StoreHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StoreHandle").field("info", &self.info).finish_non_exhaustive()
    }
}

fn check_radius(radius: f64) -> Result<(), StoreError> {
    if radius.is_finite() && radius > 0.0 {
        Ok(())
    } else {
        Err(StoreError::InvalidArgument(format!("radius must be positive, got {radius}")))
    }
}

impl StoreHandle {
    pub fn load(dataset: Arc<Dataset>, profile: ConfigProfile) -> Result<Self, StoreError> {
        profile.validate()?;
        let started = Instant::now();
        let features = dataset
            .features
            .iter()
            .enumerate()
            .map(|(i, f)| ((f.kind, f.name.clone()), i))
            .collect();
        let (engine, partition_sizes): (Box<dyn QueryEngine>, Vec<usize>) = if profile.is_oracle() {
            (Box::new(ScanEngine::new(dataset.clone())), vec![dataset.instants.len()])
        } else {
            let engine = IndexedEngine::build(&dataset, &profile);
            let sizes = engine.partition_sizes();
            (Box::new(engine), sizes)
        };
        let info = LoadInfo { profile, build_time: started.elapsed(), partition_sizes };
        Ok(StoreHandle { dataset, features, engine, info })
    }

    pub fn info(&self) -> &LoadInfo {
        &self.info
    }

    pub fn dataset(&self) -> &Arc<Dataset> {
        &self.dataset
    }

    pub fn feature(&self, kind: FeatureKind, name: &str) -> Result<&Geometry, StoreError> {
        self.features
            .get(&(kind, name.to_string()))
            .map(|&i| &self.dataset.features[i].geometry)
            .ok_or_else(|| StoreError::UnknownFeature { kind, name: name.to_string() })
    }

    fn region(&self, kind: FeatureKind, name: &str) -> Result<&Polygon, StoreError> {
        match self.feature(kind, name)? {
            Geometry::Polygon(p) => Ok(p),
            Geometry::Point(_) => Err(StoreError::NotPolygon { kind, name: name.to_string() }),
        }
    }

    fn anchor(&self, anchor: &Anchor) -> Result<Geometry, StoreError> {
        match anchor {
            Anchor::Feature(kind, name) => self.feature(*kind, name).cloned(),
            Anchor::Point(p) => Ok(Geometry::Point(*p)),
        }
    }

    pub fn count_instants_in_period(&self, p: &Period) -> u64 {
        self.engine.count_instants_in_period(p)
    }

    pub fn count_instants_per_hour(&self, p: &Period) -> Vec<(TimeInstant, u64)> {
        self.engine.count_instants_per_hour(p)
    }

    pub fn distinct_active_trips(&self, p: &Period) -> u64 {
        self.engine.distinct_active_trips(p)
    }

    pub fn active_trips_at_hour(&self, hour: u8, p: &Period) -> Result<u64, StoreError> {
        if hour > 23 {
            return Err(StoreError::InvalidArgument(format!("hour must be 0-23, got {hour}")));
        }
        Ok(self.engine.active_trips_at_hour(hour, p))
    }

    pub fn trips_intersecting_region(
        &self,
        kind: FeatureKind,
        name: &str,
        p: Option<&Period>,
    ) -> Result<Vec<TripId>, StoreError> {
        Ok(self.engine.trips_in_polygon(self.region(kind, name)?, p))
    }

    pub fn trips_within_distance(&self, anchor: &Anchor, radius: f64, p: Option<&Period>) -> Result<Vec<TripId>, StoreError> {
        check_radius(radius)?;
        Ok(self.engine.trips_within_distance(&self.anchor(anchor)?, radius, p))
    }

    pub fn nearest_trip(&self, point: &GeoPoint, max_distance: f64) -> Result<Option<(TripId, f64)>, StoreError> {
        check_radius(max_distance)?;
        Ok(self.engine.nearest_trip(point, max_distance))
    }

    pub fn avg_trip_duration_started_in_period(&self, p: &Period) -> Option<f64> {
        self.engine.avg_duration_started_in(p)
    }

    pub fn avg_duration_trips_ending_near(&self, anchor: &Anchor, radius: f64) -> Result<Option<f64>, StoreError> {
        check_radius(radius)?;
        Ok(self.engine.avg_duration_ending_near(&self.anchor(anchor)?, radius))
    }

    pub fn avg_duration_trips_started_near_in_period(
        &self,
        anchor: &Anchor,
        radius: f64,
        p: &Period,
    ) -> Result<Option<f64>, StoreError> {
        check_radius(radius)?;
        Ok(self.engine.avg_duration_started_near_in(&self.anchor(anchor)?, radius, p))
    }

    pub fn trips_connecting(&self, a: &Anchor, b: &Anchor, radius: f64) -> Result<Vec<TripId>, StoreError> {
        check_radius(radius)?;
        if a == b {
            return Err(StoreError::InvalidArgument("trips_connecting needs two different anchors".into()));
        }
        Ok(self.engine.trips_connecting(&self.anchor(a)?, &self.anchor(b)?, radius))
    }

    pub fn trips_crossing_min_regions(&self, kind: FeatureKind, k: u32, p: &Period) -> Result<Vec<TripId>, StoreError> {
        if k == 0 {
            return Err(StoreError::InvalidArgument("k must be at least 1".into()));
        }
        let regions: Vec<&Polygon> = self
            .dataset
            .features
            .iter()
            .filter(|f| f.kind == kind)
            .filter_map(|f| match &f.geometry {
                Geometry::Polygon(poly) => Some(poly),
                Geometry::Point(_) => None,
            })
            .collect();
        if regions.is_empty() {
            return Err(StoreError::NoRegions(kind));
        }
        Ok(self.engine.trips_crossing_min_regions(&regions, k, p))
    }

    pub fn terminal_event_count(&self, anchor: &Anchor, radius: f64, p: &Period) -> Result<u64, StoreError> {
        check_radius(radius)?;
        Ok(self.engine.terminal_event_count(&self.anchor(anchor)?, radius, p))
    }
}

pub use canonical::execute_canonical;
