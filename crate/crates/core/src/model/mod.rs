//! Shared domain types: geometry and time primitives, trajectory records,
//! supporting features, and query results.

mod geo;
mod result;
mod time;

pub use geo::{
    distance_to_polygon, haversine_distance, point_in_polygon, BBox, GeoPoint, Polygon,
    EARTH_RADIUS_M,
};
pub use result::{ResultSet, Value, FLOAT_REL_TOLERANCE};
pub use time::{Period, TimeInstant, MICROS_PER_DAY, MICROS_PER_HOUR, MICROS_PER_SECOND};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("coordinate out of range: lon={lon}, lat={lat}")]
    Coordinate { lon: f64, lat: f64 },
    #[error("polygon ring is not closed")]
    UnclosedRing,
    #[error("degenerate polygon: {0} distinct vertices (need at least 3)")]
    DegeneratePolygon(usize),
    #[error("polygon ring is self-intersecting")]
    SelfIntersecting,
    #[error("invalid timestamp `{0}`")]
    Timestamp(String),
    #[error("period start {start} is after end {end}")]
    Period { start: TimeInstant, end: TimeInstant },
    #[error("unknown feature kind `{0}`")]
    FeatureKind(String),
}

pub type TripId = u64;
pub type ObjectId = u64;

/// One position update of one trip.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryInstant {
    pub trip_id: TripId,
    pub seq: u32,
    pub t: TimeInstant,
    pub point: GeoPoint,
}

/// Trip-summary record: start and end location and time of one trip.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Trip {
    pub trip_id: TripId,
    pub object_id: ObjectId,
    pub start_t: TimeInstant,
    pub end_t: TimeInstant,
    pub start_point: GeoPoint,
    pub end_point: GeoPoint,
    pub n_points: u32,
}

impl Trip {
    pub fn duration_micros(&self) -> i64 {
        self.end_t.micros() - self.start_t.micros()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    District,
    County,
    City,
    Airport,
    University,
    Island,
    Harbor,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 7] = [
        FeatureKind::District,
        FeatureKind::County,
        FeatureKind::City,
        FeatureKind::Airport,
        FeatureKind::University,
        FeatureKind::Island,
        FeatureKind::Harbor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::District => "district",
            FeatureKind::County => "county",
            FeatureKind::City => "city",
            FeatureKind::Airport => "airport",
            FeatureKind::University => "university",
            FeatureKind::Island => "island",
            FeatureKind::Harbor => "harbor",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ModelError::FeatureKind(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Geometry {
    Point(GeoPoint),
    Polygon(Polygon),
}

impl Geometry {
    pub fn to_wkt(&self) -> String {
        match self {
            Geometry::Point(p) => p.to_wkt(),
            Geometry::Polygon(poly) => poly.to_wkt(),
        }
    }

    /// Distance from `p` to this geometry: haversine for points, polygon distance otherwise.
    pub fn distance_to(&self, p: &GeoPoint) -> f64 {
        match self {
            Geometry::Point(anchor) => haversine_distance(anchor, p),
            Geometry::Polygon(poly) => poly.distance_to(p),
        }
    }

    pub fn bbox(&self) -> BBox {
        match self {
            Geometry::Point(p) => BBox::new(p.lon, p.lat, p.lon, p.lat),
            Geometry::Polygon(poly) => *poly.bbox(),
        }
    }
}

/// A named auxiliary geometry used for joins and filters.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportingFeature {
    pub name: String,
    pub kind: FeatureKind,
    pub geometry: Geometry,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_kind_round_trips_through_text() {
        for kind in FeatureKind::ALL {
            assert_eq!(kind.as_str().parse::<FeatureKind>().unwrap(), kind);
        }
        assert!("volcano".parse::<FeatureKind>().is_err());
    }
}
