//! Full-scan engine. Every primitive is a direct loop over the instants or
//! the trip summaries; it defines the expected answers for the other engines.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::{mean_seconds, QueryEngine};
use crate::datagen::Dataset;
use crate::model::{GeoPoint, Geometry, Period, Polygon, TimeInstant, Trip, TripId};

pub struct ScanEngine {
    ds: Arc<Dataset>,
}

impl ScanEngine {
    pub fn new(ds: Arc<Dataset>) -> Self {
        ScanEngine { ds }
    }

    fn mean_over<'a>(&self, trips: impl Iterator<Item = &'a Trip>) -> Option<f64> {
        let (mut sum, mut n) = (0i128, 0u64);
        for t in trips {
            sum += t.duration_micros() as i128;
            n += 1;
        }
        mean_seconds(sum, n)
    }
}

fn in_period(p: Option<&Period>, t: TimeInstant) -> bool {
    p.is_none_or(|p| p.contains(t))
}

impl QueryEngine for ScanEngine {
    fn count_instants_in_period(&self, p: &Period) -> u64 {
        self.ds.instants.iter().filter(|i| p.contains(i.t)).count() as u64
    }

    fn count_instants_per_hour(&self, p: &Period) -> Vec<(TimeInstant, u64)> {
        let mut hours: BTreeMap<TimeInstant, u64> = BTreeMap::new();
        for i in self.ds.instants.iter().filter(|i| p.contains(i.t)) {
            *hours.entry(i.t.truncate_to_hour()).or_default() += 1;
        }
        hours.into_iter().collect()
    }

    fn distinct_active_trips(&self, p: &Period) -> u64 {
        let trips: BTreeSet<TripId> = self.ds.instants.iter().filter(|i| p.contains(i.t)).map(|i| i.trip_id).collect();
        trips.len() as u64
    }

    fn active_trips_at_hour(&self, hour: u8, p: &Period) -> u64 {
        let trips: BTreeSet<TripId> = self
            .ds
            .instants
            .iter()
            .filter(|i| p.contains(i.t) && i.t.hour_of_day() == hour)
            .map(|i| i.trip_id)
            .collect();
        trips.len() as u64
    }

    fn trips_in_polygon(&self, region: &Polygon, p: Option<&Period>) -> Vec<TripId> {
        let trips: BTreeSet<TripId> = self
            .ds
            .instants
            .iter()
            .filter(|i| in_period(p, i.t) && region.contains(&i.point))
            .map(|i| i.trip_id)
            .collect();
        trips.into_iter().collect()
    }

    fn trips_within_distance(&self, anchor: &Geometry, radius: f64, p: Option<&Period>) -> Vec<TripId> {
        let trips: BTreeSet<TripId> = self
            .ds
            .instants
            .iter()
            .filter(|i| in_period(p, i.t) && anchor.distance_to(&i.point) <= radius)
            .map(|i| i.trip_id)
            .collect();
        trips.into_iter().collect()
    }

    fn nearest_trip(&self, point: &GeoPoint, max_distance: f64) -> Option<(TripId, f64)> {
        let mut best: Option<(TripId, f64)> = None;
        for i in &self.ds.instants {
            let d = crate::model::haversine_distance(point, &i.point);
            if d > max_distance {
                continue;
            }
            best = match best {
                Some((id, bd)) if bd < d || (bd == d && id <= i.trip_id) => Some((id, bd)),
                _ => Some((i.trip_id, d)),
            };
        }
        best
    }

    fn avg_duration_started_in(&self, p: &Period) -> Option<f64> {
        self.mean_over(self.ds.trips.iter().filter(|t| p.contains(t.start_t)))
    }

    fn avg_duration_ending_near(&self, anchor: &Geometry, radius: f64) -> Option<f64> {
        self.mean_over(self.ds.trips.iter().filter(|t| anchor.distance_to(&t.end_point) <= radius))
    }

    fn avg_duration_started_near_in(&self, anchor: &Geometry, radius: f64, p: &Period) -> Option<f64> {
        self.mean_over(
            self.ds.trips.iter().filter(|t| p.contains(t.start_t) && anchor.distance_to(&t.start_point) <= radius),
        )
    }

    fn trips_connecting(&self, a: &Geometry, b: &Geometry, radius: f64) -> Vec<TripId> {
        let mut out: Vec<TripId> = self
            .ds
            .trips
            .iter()
            .filter(|t| a.distance_to(&t.start_point) <= radius && b.distance_to(&t.end_point) <= radius)
            .map(|t| t.trip_id)
            .collect();
        out.sort_unstable();
        out
    }

    fn trips_crossing_min_regions(&self, regions: &[&Polygon], k: u32, p: &Period) -> Vec<TripId> {
        let mut seen: BTreeMap<TripId, BTreeSet<usize>> = BTreeMap::new();
        for i in self.ds.instants.iter().filter(|i| p.contains(i.t)) {
            for (r, region) in regions.iter().enumerate() {
                if region.contains(&i.point) {
                    seen.entry(i.trip_id).or_default().insert(r);
                }
            }
        }
        seen.into_iter().filter(|(_, rs)| rs.len() >= k as usize).map(|(t, _)| t).collect()
    }

    fn terminal_event_count(&self, anchor: &Geometry, radius: f64, p: &Period) -> u64 {
        self.ds
            .trips
            .iter()
            .filter(|t| {
                (p.contains(t.start_t) && anchor.distance_to(&t.start_point) <= radius)
                    || (p.contains(t.end_t) && anchor.distance_to(&t.end_point) <= radius)
            })
            .count() as u64
    }
}
