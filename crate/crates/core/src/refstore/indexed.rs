//! Partitioned, indexed engine.
//!
//! Instants live in partitions of time-sorted columns, each with a spatial
//! index over its positions. Trip summaries are partitioned the same way and
//! carry separate indexes over start and end points. Partitions whose time
//! range or bounding box cannot match a query are skipped. Candidates from
//! the indexes are always re-checked with the exact predicates the scan
//! engine uses.

use std::collections::BTreeMap;
use std::ops::Range;

use super::spatial::{IndexLayout, SpatialIndex};
use super::{mean_seconds, search_box, ConfigProfile, IndexKind, Partitioning, QueryEngine};
use crate::datagen::Dataset;
use crate::model::{haversine_distance, BBox, GeoPoint, Geometry, Period, Polygon, TimeInstant, TripId, MICROS_PER_HOUR};

/// A time slice at most this fraction of a partition is scanned directly
/// instead of going through the spatial index.
const SLICE_SCAN_FRACTION: usize = 8;
/// Initial nearest-neighbour search radius as a fraction of the cap.
const NEAREST_START_DIVISOR: f64 = 64.0;

struct InstantPart {
    t: Vec<i64>,
    lon: Vec<f64>,
    lat: Vec<f64>,
    trip: Vec<u32>,
    bbox: BBox,
    index: SpatialIndex,
}

impl InstantPart {
    fn build(layout: IndexLayout, mut rows: Vec<(i64, f64, f64, u32)>) -> Self {
        rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.3.cmp(&b.3)));
        let t: Vec<i64> = rows.iter().map(|r| r.0).collect();
        let lon: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let lat: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let trip = rows.iter().map(|r| r.3).collect();
        let mut bbox = BBox::empty();
        for i in 0..lon.len() {
            bbox.extend(lon[i], lat[i]);
        }
        let index = SpatialIndex::build(layout, &lon, &lat);
        InstantPart { t, lon, lat, trip, bbox, index }
    }

    fn len(&self) -> usize {
        self.t.len()
    }

    fn slice(&self, p: &Period) -> Range<usize> {
        let lo = self.t.partition_point(|&t| t < p.start.micros());
        let hi = self.t.partition_point(|&t| t < p.end.micros());
        lo..hi.max(lo)
    }

    fn point(&self, i: usize) -> GeoPoint {
        GeoPoint::lonlat(self.lon[i], self.lat[i])
    }

    /// Calls `f` for every instant in `q` (and in `p` when given), choosing
    /// between a direct time-slice scan and the spatial index.
    fn candidates(&self, q: &BBox, p: Option<&Period>, mut f: impl FnMut(usize)) {
        if self.len() == 0 || !self.bbox.intersects(q) {
            return;
        }
        match p {
            Some(p) => {
                let range = self.slice(p);
                if range.is_empty() {
                    return;
                }
                let small = range.len() * SLICE_SCAN_FRACTION <= self.len();
                if small || matches!(self.index, SpatialIndex::Scan { .. }) {
                    for i in range {
                        if q.contains(self.lon[i], self.lat[i]) {
                            f(i);
                        }
                    }
                } else {
                    self.index.query(q, |i| {
                        if range.contains(&(i as usize)) {
                            f(i as usize)
                        }
                    });
                }
            }
            None => self.index.query(q, |i| f(i as usize)),
        }
    }
}

struct TripPart {
    /// Dense trip indexes, ascending by start time.
    trips: Vec<u32>,
    start_t: Vec<i64>,
    start_bbox: BBox,
    end_bbox: BBox,
    start_index: SpatialIndex,
    end_index: SpatialIndex,
}

#[derive(Clone, Copy)]
struct TripRow {
    start_t: i64,
    end_t: i64,
    start: GeoPoint,
    end: GeoPoint,
}

impl TripRow {
    fn duration(&self) -> i128 {
        (self.end_t - self.start_t) as i128
    }
}

pub struct IndexedEngine {
    /// Dense index to trip id, ascending.
    trip_ids: Vec<TripId>,
    rows: Vec<TripRow>,
    parts: Vec<InstantPart>,
    trip_parts: Vec<TripPart>,
}

/// Splits `0..n` items into `k` groups of contiguous, equal-as-possible blocks.
fn equal_blocks(n: usize, k: usize) -> impl Fn(usize) -> usize {
    move |pos| (pos * k / n.max(1)).min(k - 1)
}

impl IndexedEngine {
    pub fn build(ds: &Dataset, profile: &ConfigProfile) -> Self {
        let layout = match profile.index {
            IndexKind::None => IndexLayout::Scan,
            IndexKind::Grid => IndexLayout::Grid,
            IndexKind::Rtree => IndexLayout::RTree,
        };
        let mut order: Vec<usize> = (0..ds.trips.len()).collect();
        order.sort_by_key(|&i| ds.trips[i].trip_id);
        let trip_ids: Vec<TripId> = order.iter().map(|&i| ds.trips[i].trip_id).collect();
        let rows: Vec<TripRow> = order
            .iter()
            .map(|&i| {
                let t = &ds.trips[i];
                TripRow {
                    start_t: t.start_t.micros(),
                    end_t: t.end_t.micros(),
                    start: GeoPoint::lonlat(t.start_point.lon, t.start_point.lat),
                    end: GeoPoint::lonlat(t.end_point.lon, t.end_point.lat),
                }
            })
            .collect();
        let dense = |id: TripId| trip_ids.binary_search(&id).expect("instant of unknown trip") as u32;

        let k = match profile.partitioning {
            Partitioning::None => 1,
            _ => profile.k.max(1) as usize,
        };
        let n_trips = rows.len();
        // partition of each instant (by dataset position) and of each trip
        let (instant_part, trip_part): (Vec<usize>, Vec<usize>) = match profile.partitioning {
            Partitioning::None => (vec![0; ds.instants.len()], vec![0; n_trips]),
            Partitioning::Time => {
                let mut by_t: Vec<usize> = (0..ds.instants.len()).collect();
                by_t.sort_by_key(|&i| (ds.instants[i].t, i));
                let block = equal_blocks(by_t.len(), k);
                let mut ip = vec![0; ds.instants.len()];
                for (pos, &i) in by_t.iter().enumerate() {
                    ip[i] = block(pos);
                }
                let mut by_start: Vec<usize> = (0..n_trips).collect();
                by_start.sort_by_key(|&i| (rows[i].start_t, i));
                let block = equal_blocks(n_trips, k);
                let mut tp = vec![0; n_trips];
                for (pos, &i) in by_start.iter().enumerate() {
                    tp[i] = block(pos);
                }
                (ip, tp)
            }
            Partitioning::Space => {
                let mut points = vec![0u64; n_trips];
                for t in &ds.trips {
                    points[dense(t.trip_id) as usize] = t.n_points as u64;
                }
                let total: u64 = points.iter().sum();
                let mut by_lon: Vec<usize> = (0..n_trips).collect();
                by_lon.sort_by(|&a, &b| rows[a].start.lon.total_cmp(&rows[b].start.lon).then(a.cmp(&b)));
                let mut tp = vec![0; n_trips];
                let mut before = 0u64;
                for &i in &by_lon {
                    // a trip goes to the quantile bucket holding its midpoint
                    let mid = before as u128 * 2 + points[i] as u128;
                    tp[i] = ((mid * k as u128 / (2 * total.max(1) as u128)) as usize).min(k - 1);
                    before += points[i];
                }
                let ip = ds.instants.iter().map(|i| tp[dense(i.trip_id) as usize]).collect();
                (ip, tp)
            }
        };

        let mut part_rows: Vec<Vec<(i64, f64, f64, u32)>> = vec![Vec::new(); k];
        for (i, inst) in ds.instants.iter().enumerate() {
            part_rows[instant_part[i]].push((inst.t.micros(), inst.point.lon, inst.point.lat, dense(inst.trip_id)));
        }
        let parts = part_rows.into_iter().map(|r| InstantPart::build(layout, r)).collect();

        let mut trip_groups: Vec<Vec<u32>> = vec![Vec::new(); k];
        for (i, &p) in trip_part.iter().enumerate() {
            trip_groups[p].push(i as u32);
        }
        let trip_parts = trip_groups
            .into_iter()
            .map(|mut trips| {
                trips.sort_by_key(|&i| (rows[i as usize].start_t, i));
                let start_t = trips.iter().map(|&i| rows[i as usize].start_t).collect();
                let coords = |f: fn(&TripRow) -> GeoPoint| -> (Vec<f64>, Vec<f64>, BBox) {
                    let pts: Vec<GeoPoint> = trips.iter().map(|&i| f(&rows[i as usize])).collect();
                    (pts.iter().map(|p| p.lon).collect(), pts.iter().map(|p| p.lat).collect(), BBox::of_points(&pts))
                };
                let (slon, slat, start_bbox) = coords(|r| r.start);
                let (elon, elat, end_bbox) = coords(|r| r.end);
                TripPart {
                    start_index: SpatialIndex::build(layout, &slon, &slat),
                    end_index: SpatialIndex::build(layout, &elon, &elat),
                    trips,
                    start_t,
                    start_bbox,
                    end_bbox,
                }
            })
            .collect();

        IndexedEngine { trip_ids, rows, parts, trip_parts }
    }

    pub fn partition_sizes(&self) -> Vec<usize> {
        self.parts.iter().map(InstantPart::len).collect()
    }

    fn marks(&self) -> Vec<bool> {
        vec![false; self.trip_ids.len()]
    }

    fn marked_ids(&self, marks: &[bool]) -> Vec<TripId> {
        marks.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| self.trip_ids[i]).collect()
    }

    fn mean<'a>(&self, trips: impl Iterator<Item = &'a TripRow>) -> Option<f64> {
        let (mut sum, mut n) = (0i128, 0u64);
        for t in trips {
            sum += t.duration();
            n += 1;
        }
        mean_seconds(sum, n)
    }

    /// Trips of each partition whose start point is in `q`, as dense indexes.
    fn starts_in(&self, q: &BBox, mut f: impl FnMut(&TripPart, usize)) {
        for part in &self.trip_parts {
            if part.start_bbox.intersects(q) {
                part.start_index.query(q, |i| f(part, i as usize));
            }
        }
    }

    fn ends_in(&self, q: &BBox, mut f: impl FnMut(&TripPart, usize)) {
        for part in &self.trip_parts {
            if part.end_bbox.intersects(q) {
                part.end_index.query(q, |i| f(part, i as usize));
            }
        }
    }
}

impl QueryEngine for IndexedEngine {
    fn count_instants_in_period(&self, p: &Period) -> u64 {
        self.parts.iter().map(|part| part.slice(p).len() as u64).sum()
    }

    fn count_instants_per_hour(&self, p: &Period) -> Vec<(TimeInstant, u64)> {
        let mut hours: BTreeMap<i64, u64> = BTreeMap::new();
        for part in &self.parts {
            let mut range = part.slice(p);
            while !range.is_empty() {
                let hour = TimeInstant::from_micros(part.t[range.start]).truncate_to_hour().micros();
                let next_hour = hour + MICROS_PER_HOUR;
                let end = range.start + part.t[range.clone()].partition_point(|&t| t < next_hour);
                *hours.entry(hour).or_default() += (end - range.start) as u64;
                range.start = end;
            }
        }
        hours.into_iter().map(|(h, c)| (TimeInstant::from_micros(h), c)).collect()
    }

    fn distinct_active_trips(&self, p: &Period) -> u64 {
        let mut marks = self.marks();
        for part in &self.parts {
            for i in part.slice(p) {
                marks[part.trip[i] as usize] = true;
            }
        }
        marks.iter().filter(|&&m| m).count() as u64
    }

    fn active_trips_at_hour(&self, hour: u8, p: &Period) -> u64 {
        let mut marks = self.marks();
        let offset = hour as i64 * MICROS_PER_HOUR;
        let mut day = p.start.truncate_to_day().micros();
        while day + offset < p.end.micros() {
            let window = Period {
                start: TimeInstant::from_micros((day + offset).max(p.start.micros())),
                end: TimeInstant::from_micros((day + offset + MICROS_PER_HOUR).min(p.end.micros())),
            };
            if window.start < window.end {
                for part in &self.parts {
                    for i in part.slice(&window) {
                        marks[part.trip[i] as usize] = true;
                    }
                }
            }
            day += 24 * MICROS_PER_HOUR;
        }
        marks.iter().filter(|&&m| m).count() as u64
    }

    fn trips_in_polygon(&self, region: &Polygon, p: Option<&Period>) -> Vec<TripId> {
        let mut marks = self.marks();
        let q = *region.bbox();
        for part in &self.parts {
            part.candidates(&q, p, |i| {
                let trip = part.trip[i] as usize;
                if !marks[trip] && region.contains(&part.point(i)) {
                    marks[trip] = true;
                }
            });
        }
        self.marked_ids(&marks)
    }

    fn trips_within_distance(&self, anchor: &Geometry, radius: f64, p: Option<&Period>) -> Vec<TripId> {
        let mut marks = self.marks();
        let q = search_box(anchor, radius);
        for part in &self.parts {
            part.candidates(&q, p, |i| {
                let trip = part.trip[i] as usize;
                if !marks[trip] && anchor.distance_to(&part.point(i)) <= radius {
                    marks[trip] = true;
                }
            });
        }
        self.marked_ids(&marks)
    }

    fn nearest_trip(&self, point: &GeoPoint, max_distance: f64) -> Option<(TripId, f64)> {
        let mut r = max_distance / NEAREST_START_DIVISOR;
        loop {
            r = r.min(max_distance);
            let q = BBox::around(point, r);
            let mut best: Option<(TripId, f64)> = None;
            for part in &self.parts {
                part.candidates(&q, None, |i| {
                    let d = haversine_distance(point, &part.point(i));
                    if d > r {
                        return;
                    }
                    let id = self.trip_ids[part.trip[i] as usize];
                    best = match best {
                        Some((bid, bd)) if bd < d || (bd == d && bid <= id) => Some((bid, bd)),
                        _ => Some((id, d)),
                    };
                });
            }
            // everything within r was examined, so a hit at distance <= r is the global minimum
            if best.is_some() || r >= max_distance {
                return best;
            }
            r *= 2.0;
        }
    }

    fn avg_duration_started_in(&self, p: &Period) -> Option<f64> {
        let mut selected = Vec::new();
        for part in &self.trip_parts {
            let lo = part.start_t.partition_point(|&t| t < p.start.micros());
            let hi = part.start_t.partition_point(|&t| t < p.end.micros()).max(lo);
            selected.extend(part.trips[lo..hi].iter().map(|&i| &self.rows[i as usize]));
        }
        self.mean(selected.into_iter())
    }

    fn avg_duration_ending_near(&self, anchor: &Geometry, radius: f64) -> Option<f64> {
        let mut selected = Vec::new();
        self.ends_in(&search_box(anchor, radius), |part, i| {
            let row = &self.rows[part.trips[i] as usize];
            if anchor.distance_to(&row.end) <= radius {
                selected.push(row);
            }
        });
        self.mean(selected.into_iter())
    }

    fn avg_duration_started_near_in(&self, anchor: &Geometry, radius: f64, p: &Period) -> Option<f64> {
        let mut selected = Vec::new();
        self.starts_in(&search_box(anchor, radius), |part, i| {
            let row = &self.rows[part.trips[i] as usize];
            if p.contains(TimeInstant::from_micros(row.start_t)) && anchor.distance_to(&row.start) <= radius {
                selected.push(row);
            }
        });
        self.mean(selected.into_iter())
    }

    fn trips_connecting(&self, a: &Geometry, b: &Geometry, radius: f64) -> Vec<TripId> {
        let mut marks = self.marks();
        self.starts_in(&search_box(a, radius), |part, i| {
            let trip = part.trips[i] as usize;
            let row = &self.rows[trip];
            if a.distance_to(&row.start) <= radius && b.distance_to(&row.end) <= radius {
                marks[trip] = true;
            }
        });
        self.marked_ids(&marks)
    }

    fn trips_crossing_min_regions(&self, regions: &[&Polygon], k: u32, p: &Period) -> Vec<TripId> {
        let mut pairs: Vec<(u32, u32)> = Vec::new();
        for (r, region) in regions.iter().enumerate() {
            let q = *region.bbox();
            let mut marks = self.marks();
            for part in &self.parts {
                part.candidates(&q, Some(p), |i| {
                    let trip = part.trip[i] as usize;
                    if !marks[trip] && region.contains(&part.point(i)) {
                        marks[trip] = true;
                        pairs.push((trip as u32, r as u32));
                    }
                });
            }
        }
        pairs.sort_unstable();
        let mut out = Vec::new();
        for group in pairs.chunk_by(|a, b| a.0 == b.0) {
            if group.len() >= k as usize {
                out.push(self.trip_ids[group[0].0 as usize]);
            }
        }
        out
    }

    fn terminal_event_count(&self, anchor: &Geometry, radius: f64, p: &Period) -> u64 {
        let mut marks = self.marks();
        let q = search_box(anchor, radius);
        self.starts_in(&q, |part, i| {
            let trip = part.trips[i] as usize;
            let row = &self.rows[trip];
            if p.contains(TimeInstant::from_micros(row.start_t)) && anchor.distance_to(&row.start) <= radius {
                marks[trip] = true;
            }
        });
        self.ends_in(&q, |part, i| {
            let trip = part.trips[i] as usize;
            let row = &self.rows[trip];
            if p.contains(TimeInstant::from_micros(row.end_t)) && anchor.distance_to(&row.end) <= radius {
                marks[trip] = true;
            }
        });
        marks.iter().filter(|&&m| m).count() as u64
    }
}
