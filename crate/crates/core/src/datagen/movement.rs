//! Per-scenario movement models.
//!
//! Every trip is a polyline route sampled at equal arc-length steps, with the
//! number of samples drawn from a log-normal distribution. Routes differ per
//! scenario:
//!
//! * cycling: random waypoint walk with heading persistence, 2–8 m/s at 1 Hz;
//!   some rides end at a university.
//! * aviation: legs between airports and airspace border points, 150–250 m/s
//!   cruise, 4–10 s sampling, with a climb/cruise/descent altitude profile.
//! * ais: harbor-to-harbor legs at 2–10 m/s with smooth lateral drift,
//!   10–60 s sampling.
//!
//! Aviation and AIS routes end at their final endpoint, so the effective speed
//! is rescaled to cover the chosen route in the drawn number of samples.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use super::{DatasetSpec, Scenario};
use crate::model::{
    haversine_distance, BBox, FeatureKind, Geometry, GeoPoint, SupportingFeature, TimeInstant,
    EARTH_RADIUS_M, MICROS_PER_SECOND,
};

const METERS_PER_DEGREE: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
/// Maximum number of points of a single trip.
const MAX_TRIP_POINTS: u32 = 200_000;

pub(super) struct MovementModel<'a> {
    spec: &'a DatasetSpec,
    points_dist: LogNormal<f64>,
    inner: BBox,
    universities: Vec<GeoPoint>,
    airports: Vec<GeoPoint>,
    harbors: Vec<GeoPoint>,
    object_pool: u64,
}

impl<'a> MovementModel<'a> {
    pub fn new(spec: &'a DatasetSpec, features: &[SupportingFeature]) -> Self {
        let sigma = spec.trip_points_dispersion;
        let mu = spec.trip_points_mean.ln() - sigma * sigma / 2.0;
        let points = |kind: FeatureKind| -> Vec<GeoPoint> {
            features
                .iter()
                .filter(|f| f.kind == kind)
                .filter_map(|f| match &f.geometry {
                    Geometry::Point(p) if spec.bbox.contains(p.lon, p.lat) => Some(*p),
                    _ => None,
                })
                .collect()
        };
        let margin_lon = spec.bbox.width() * 0.002;
        let margin_lat = spec.bbox.height() * 0.002;
        let expected_trips = (spec.scale_factor as f64 / spec.trip_points_mean).ceil() as u64;
        MovementModel {
            spec,
            points_dist: LogNormal::new(mu, sigma).expect("valid log-normal parameters"),
            inner: BBox::new(
                spec.bbox.min_lon + margin_lon,
                spec.bbox.min_lat + margin_lat,
                spec.bbox.max_lon - margin_lon,
                spec.bbox.max_lat - margin_lat,
            ),
            universities: points(FeatureKind::University),
            airports: points(FeatureKind::Airport),
            harbors: points(FeatureKind::Harbor),
            object_pool: (expected_trips / 2).max(1),
        }
    }

    pub fn object_id(&self, rng: &mut ChaCha8Rng) -> u64 {
        rng.gen_range(1..=self.object_pool)
    }

    fn draw_points(&self, rng: &mut ChaCha8Rng) -> u32 {
        let n = self.points_dist.sample(rng).round();
        (n as u32).clamp(2, MAX_TRIP_POINTS)
    }

    /// Produces the `(timestamp, position)` samples of one trip.
    pub fn generate_trip(&mut self, rng: &mut ChaCha8Rng) -> Vec<(TimeInstant, GeoPoint)> {
        let n = self.draw_points(rng);
        let (interval, jitter) = match self.spec.scenario {
            Scenario::Cycling => (self.spec.sampling_interval_mean, 0.0),
            Scenario::Aviation | Scenario::Ais => (self.spec.sampling_interval_mean, 0.4),
        };
        let speed = match self.spec.scenario {
            Scenario::Cycling => rng.gen_range(2.0..8.0),
            Scenario::Aviation => rng.gen_range(150.0..250.0),
            Scenario::Ais => rng.gen_range(2.0..10.0),
        };
        let target_len = (n - 1) as f64 * speed * interval;
        let route = match self.spec.scenario {
            Scenario::Cycling => self.cycling_route(rng, target_len),
            Scenario::Aviation => self.endpoint_route(rng, target_len, true),
            Scenario::Ais => self.endpoint_route(rng, target_len, false),
        };
        let lateral_m = match self.spec.scenario {
            Scenario::Cycling => 3.0,
            Scenario::Aviation => 0.0,
            Scenario::Ais => 250.0,
        };
        let mut positions = sample_route(&route, n as usize, lateral_m, rng);
        for p in positions.iter_mut() {
            p.lon = p.lon.clamp(self.inner.min_lon, self.inner.max_lon);
            p.lat = p.lat.clamp(self.inner.min_lat, self.inner.max_lat);
        }
        if self.spec.scenario == Scenario::Aviation {
            self.apply_altitude(&mut positions, &route, rng);
        }

        let mut offsets = Vec::with_capacity(n as usize);
        let mut elapsed: i64 = 0;
        offsets.push(0);
        for _ in 1..n {
            let dt = if jitter == 0.0 {
                interval
            } else {
                interval * rng.gen_range((1.0 - jitter)..(1.0 + jitter))
            };
            elapsed += ((dt * MICROS_PER_SECOND as f64).round() as i64).max(1);
            offsets.push(elapsed);
        }
        let extent = &self.spec.time_extent;
        let slack = (extent.duration_micros() - elapsed - 1).max(0);
        let start_offset = if slack == 0 { 0 } else { rng.gen_range(0..=slack) };
        // whole-second starts keep the text forms short
        let start = extent.start.micros() + start_offset / MICROS_PER_SECOND * MICROS_PER_SECOND;
        offsets
            .into_iter()
            .zip(positions)
            .map(|(off, p)| (TimeInstant::from_micros(start + off), p))
            .collect()
    }

    fn random_point(&self, rng: &mut ChaCha8Rng) -> GeoPoint {
        GeoPoint::lonlat(
            rng.gen_range(self.inner.min_lon..self.inner.max_lon),
            rng.gen_range(self.inner.min_lat..self.inner.max_lat),
        )
    }

    fn cycling_route(&self, rng: &mut ChaCha8Rng, target_len: f64) -> Vec<GeoPoint> {
        let to_university = !self.universities.is_empty() && rng.gen_bool(0.3);
        let walk_len = if to_university { 0.6 * target_len } else { target_len };
        let turn = Normal::new(0.0, 35f64.to_radians()).unwrap();
        let mut route = vec![self.random_point(rng)];
        let mut heading: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let mut length = 0.0;
        while length < walk_len {
            let current = *route.last().unwrap();
            let leg = rng.gen_range(300.0..2_000.0f64).min(walk_len - length);
            heading += turn.sample(rng);
            let mut next = destination(&current, heading, leg);
            if !self.inner.contains(next.lon, next.lat) {
                // turn back towards the middle of the area
                let center = self.inner.center();
                heading = bearing(&current, &center) + turn.sample(rng) / 2.0;
                next = destination(&current, heading, leg);
                next.lon = next.lon.clamp(self.inner.min_lon, self.inner.max_lon);
                next.lat = next.lat.clamp(self.inner.min_lat, self.inner.max_lat);
            }
            length += haversine_distance(&current, &next);
            route.push(next);
            if leg < 1e-6 {
                break;
            }
        }
        if to_university {
            let current = *route.last().unwrap();
            let nearest = self
                .universities
                .iter()
                .min_by(|a, b| {
                    haversine_distance(&current, a).total_cmp(&haversine_distance(&current, b))
                })
                .copied()
                .unwrap();
            route.push(nearest);
        }
        route
    }

    fn endpoint(&self, rng: &mut ChaCha8Rng, aviation: bool) -> GeoPoint {
        let pool = if aviation { &self.airports } else { &self.harbors };
        if pool.is_empty() || (aviation && rng.gen_bool(0.4)) {
            if aviation {
                self.border_point(rng)
            } else {
                self.random_point(rng)
            }
        } else {
            pool[rng.gen_range(0..pool.len())]
        }
    }

    fn border_point(&self, rng: &mut ChaCha8Rng) -> GeoPoint {
        let b = &self.inner;
        match rng.gen_range(0..4) {
            0 => GeoPoint::lonlat(rng.gen_range(b.min_lon..b.max_lon), b.min_lat),
            1 => GeoPoint::lonlat(rng.gen_range(b.min_lon..b.max_lon), b.max_lat),
            2 => GeoPoint::lonlat(b.min_lon, rng.gen_range(b.min_lat..b.max_lat)),
            _ => GeoPoint::lonlat(b.max_lon, rng.gen_range(b.min_lat..b.max_lat)),
        }
    }

    /// A chain of endpoint legs whose total length is close to `target_len`.
    fn endpoint_route(&self, rng: &mut ChaCha8Rng, target_len: f64, aviation: bool) -> Vec<GeoPoint> {
        let mut route = vec![self.endpoint(rng, aviation)];
        let mut length = 0.0;
        loop {
            let last = *route.last().unwrap();
            let candidate = self.distinct_endpoint(rng, aviation, &last);
            let leg = haversine_distance(&last, &candidate);
            if length + leg < target_len {
                route.push(candidate);
                length += leg;
                continue;
            }
            // final leg: best of a few candidates, or stop short if that is closer
            let mut best = (candidate, (length + leg - target_len).abs());
            for _ in 0..6 {
                let c = self.distinct_endpoint(rng, aviation, &last);
                let err = (length + haversine_distance(&last, &c) - target_len).abs();
                if err < best.1 {
                    best = (c, err);
                }
            }
            if route.len() >= 2 && (target_len - length) < best.1 {
                break;
            }
            route.push(best.0);
            break;
        }
        route
    }

    fn distinct_endpoint(&self, rng: &mut ChaCha8Rng, aviation: bool, last: &GeoPoint) -> GeoPoint {
        for _ in 0..16 {
            let c = self.endpoint(rng, aviation);
            if haversine_distance(&c, last) > 1_000.0 {
                return c;
            }
        }
        self.random_point(rng)
    }

    fn apply_altitude(&self, positions: &mut [GeoPoint], route: &[GeoPoint], rng: &mut ChaCha8Rng) {
        let near_airport = |p: &GeoPoint| {
            self.airports.iter().any(|a| haversine_distance(a, p) < 1_000.0)
        };
        let departs = near_airport(&route[0]);
        let arrives = near_airport(route.last().unwrap());
        let cruise: f64 = rng.gen_range(3_000.0..12_000.0);
        let ground = 100.0;
        let n = positions.len();
        let ramp = (n as f64 * 0.25).max(1.0);
        for (i, p) in positions.iter_mut().enumerate() {
            let from_start = i as f64 / ramp;
            let from_end = (n - 1 - i) as f64 / ramp;
            let mut alt = cruise;
            if departs && from_start < 1.0 {
                alt = ground + (cruise - ground) * from_start;
            }
            if arrives && from_end < 1.0 {
                alt = alt.min(ground + (cruise - ground) * from_end);
            }
            p.alt = Some(alt.round());
        }
    }
}

fn bearing(from: &GeoPoint, to: &GeoPoint) -> f64 {
    let (lat1, lat2) = (from.lat.to_radians(), to.lat.to_radians());
    let dlon = (to.lon - from.lon).to_radians();
    (dlon.sin() * lat2.cos()).atan2(lat1.cos() * lat2.sin() - lat1.sin() * lat2.cos() * dlon.cos())
}

fn destination(from: &GeoPoint, heading: f64, distance: f64) -> GeoPoint {
    let ang = distance / EARTH_RADIUS_M;
    let (lat1, lon1) = (from.lat.to_radians(), from.lon.to_radians());
    let lat2 = (lat1.sin() * ang.cos() + lat1.cos() * ang.sin() * heading.cos()).asin();
    let lon2 = lon1 + (heading.sin() * ang.sin() * lat1.cos()).atan2(ang.cos() - lat1.sin() * lat2.sin());
    GeoPoint::lonlat(lon2.to_degrees(), lat2.to_degrees())
}

/// Samples `n` positions at equal arc-length steps along `route`, adding a
/// smooth perpendicular offset of roughly `lateral_m` meters that vanishes at
/// both ends.
fn sample_route(route: &[GeoPoint], n: usize, lateral_m: f64, rng: &mut ChaCha8Rng) -> Vec<GeoPoint> {
    let legs: Vec<f64> = route.windows(2).map(|w| haversine_distance(&w[0], &w[1])).collect();
    let total: f64 = legs.iter().sum();
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut drift = 0.0f64;
    let mut out = Vec::with_capacity(n);
    let mut leg_idx = 0;
    let mut leg_start = 0.0;
    for i in 0..n {
        let s = if n == 1 { 0.0 } else { total * i as f64 / (n - 1) as f64 };
        while leg_idx + 1 < legs.len() && s > leg_start + legs[leg_idx] {
            leg_start += legs[leg_idx];
            leg_idx += 1;
        }
        let mut point = if legs.is_empty() || total == 0.0 {
            route[0]
        } else {
            let (a, b) = (&route[leg_idx], &route[leg_idx + 1]);
            let frac = if legs[leg_idx] > 0.0 {
                ((s - leg_start) / legs[leg_idx]).clamp(0.0, 1.0)
            } else {
                0.0
            };
            GeoPoint::lonlat(a.lon + (b.lon - a.lon) * frac, a.lat + (b.lat - a.lat) * frac)
        };
        if i == n - 1 {
            point = *route.last().unwrap();
        }
        if lateral_m > 0.0 && i > 0 && i < n - 1 && !legs.is_empty() {
            drift = 0.98 * drift + 0.2 * noise.sample(rng);
            let envelope = (std::f64::consts::PI * i as f64 / (n - 1) as f64).sin();
            let offset = lateral_m * drift * envelope;
            let (a, b) = (&route[leg_idx], &route[leg_idx + 1]);
            let h = bearing(a, b) + std::f64::consts::FRAC_PI_2;
            point.lat += offset * h.cos() / METERS_PER_DEGREE;
            point.lon += offset * h.sin() / (METERS_PER_DEGREE * point.lat.to_radians().cos());
        }
        out.push(point);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn route_sampling_hits_both_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let route = vec![GeoPoint::lonlat(0.0, 0.0), GeoPoint::lonlat(0.01, 0.0), GeoPoint::lonlat(0.01, 0.01)];
        let pts = sample_route(&route, 21, 0.0, &mut rng);
        assert_eq!(pts.len(), 21);
        assert_eq!(pts[0], route[0]);
        assert_eq!(pts[20], route[2]);
        // the midpoint of the arc length is the corner
        assert!((pts[10].lon - 0.01).abs() < 1e-9 && pts[10].lat.abs() < 1e-9);
    }

    #[test]
    fn destination_and_bearing_agree() {
        let from = GeoPoint::lonlat(13.4, 52.5);
        let to = destination(&from, 1.0, 5_000.0);
        assert!((haversine_distance(&from, &to) - 5_000.0).abs() < 1e-6);
        assert!((bearing(&from, &to) - 1.0).abs() < 1e-6);
    }
}
