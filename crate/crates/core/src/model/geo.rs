//! Spherical geodesy and planar lon/lat polygon predicates.
//!
//! Distances use a spherical earth of radius [`EARTH_RADIUS_M`]. Containment is
//! evaluated with the even-odd rule in the (lon, lat) plane, and points on the
//! boundary count as inside.

use serde::{Deserialize, Serialize};

use super::ModelError;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Tolerance, in degrees, for treating a point as lying on a polygon edge.
const BOUNDARY_EPS_DEG: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alt: Option<f64>,
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64) -> Result<Self, ModelError> {
        if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
            return Err(ModelError::Coordinate { lon, lat });
        }
        Ok(Self { lon, lat, alt: None })
    }

    pub fn with_alt(mut self, alt: f64) -> Self {
        self.alt = Some(alt);
        self
    }

    /// Constructor for coordinates already known to be valid (literals, clamped values).
    pub const fn lonlat(lon: f64, lat: f64) -> Self {
        Self { lon, lat, alt: None }
    }

    pub fn to_wkt(&self) -> String {
        format!("POINT({} {})", self.lon, self.lat)
    }

    fn unit_vector(&self) -> [f64; 3] {
        let (lon, lat) = (self.lon.to_radians(), self.lat.to_radians());
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    }
}

/// Great-circle distance in meters.
pub fn haversine_distance(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.min(1.0).sqrt().asin()
}

/// Axis-aligned lon/lat rectangle, bounds inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BBox {
    pub fn new(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Self {
        Self { min_lon, min_lat, max_lon, max_lat }
    }

    pub fn empty() -> Self {
        Self::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY)
    }

    pub fn is_empty(&self) -> bool {
        self.min_lon > self.max_lon || self.min_lat > self.max_lat
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.min_lon < self.max_lon && self.min_lat < self.max_lat)
    }

    pub fn of_points<'a>(points: impl IntoIterator<Item = &'a GeoPoint>) -> Self {
        let mut bbox = Self::empty();
        for p in points {
            bbox.extend(p.lon, p.lat);
        }
        bbox
    }

    pub fn extend(&mut self, lon: f64, lat: f64) {
        self.min_lon = self.min_lon.min(lon);
        self.min_lat = self.min_lat.min(lat);
        self.max_lon = self.max_lon.max(lon);
        self.max_lat = self.max_lat.max(lat);
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox::new(
            self.min_lon.min(other.min_lon),
            self.min_lat.min(other.min_lat),
            self.max_lon.max(other.max_lon),
            self.max_lat.max(other.max_lat),
        )
    }

    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        self.min_lon <= lon && lon <= self.max_lon && self.min_lat <= lat && lat <= self.max_lat
    }

    pub fn intersects(&self, other: &BBox) -> bool {
        self.min_lon <= other.max_lon
            && other.min_lon <= self.max_lon
            && self.min_lat <= other.max_lat
            && other.min_lat <= self.max_lat
    }

    pub fn width(&self) -> f64 {
        self.max_lon - self.min_lon
    }

    pub fn height(&self) -> f64 {
        self.max_lat - self.min_lat
    }

    pub fn center(&self) -> GeoPoint {
        GeoPoint::lonlat(
            (self.min_lon + self.max_lon) / 2.0,
            (self.min_lat + self.max_lat) / 2.0,
        )
    }

    /// Conservative rectangle that contains every point within `radius_m` meters
    /// (great-circle) of some point of this box.
    pub fn expand_by_meters(&self, radius_m: f64) -> BBox {
        let ang = radius_m / EARTH_RADIUS_M;
        let dlat = ang.to_degrees() * (1.0 + 1e-9) + 1e-9;
        let min_lat = self.min_lat - dlat;
        let max_lat = self.max_lat + dlat;
        let extreme_lat = self.min_lat.abs().max(self.max_lat.abs());
        if min_lat <= -90.0 || max_lat >= 90.0 || ang >= std::f64::consts::FRAC_PI_2 {
            return BBox::new(-180.0, min_lat.max(-90.0), 180.0, max_lat.min(90.0));
        }
        let ratio = ang.sin() / extreme_lat.to_radians().cos();
        if ratio >= 1.0 {
            return BBox::new(-180.0, min_lat, 180.0, max_lat);
        }
        let dlon = ratio.asin().to_degrees() * (1.0 + 1e-9) + 1e-9;
        let (min_lon, max_lon) = (self.min_lon - dlon, self.max_lon + dlon);
        if min_lon < -180.0 || max_lon > 180.0 {
            return BBox::new(-180.0, min_lat, 180.0, max_lat);
        }
        BBox::new(min_lon, min_lat, max_lon, max_lat)
    }

    pub fn around(point: &GeoPoint, radius_m: f64) -> BBox {
        BBox::new(point.lon, point.lat, point.lon, point.lat).expand_by_meters(radius_m)
    }
}

/// A simple polygon given by a closed outer ring (first vertex repeated at the end).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<GeoPoint>", into = "Vec<GeoPoint>")]
pub struct Polygon {
    ring: Vec<GeoPoint>,
    bbox: BBox,
}

impl Polygon {
    /// Builds a polygon from a closed ring, rejecting open, degenerate, or
    /// self-intersecting rings.
    pub fn new(ring: Vec<GeoPoint>) -> Result<Self, ModelError> {
        let (first, last) = match (ring.first(), ring.last()) {
            (Some(f), Some(l)) => (*f, *l),
            _ => return Err(ModelError::DegeneratePolygon(0)),
        };
        if ring.len() < 2 || first.lon != last.lon || first.lat != last.lat {
            return Err(ModelError::UnclosedRing);
        }
        let distinct = distinct_vertex_count(&ring[..ring.len() - 1]);
        if distinct < 3 {
            return Err(ModelError::DegeneratePolygon(distinct));
        }
        for p in &ring {
            GeoPoint::new(p.lon, p.lat)?;
        }
        if !ring_is_simple(&ring) {
            return Err(ModelError::SelfIntersecting);
        }
        let bbox = BBox::of_points(&ring);
        Ok(Self { ring, bbox })
    }

    /// Builds a polygon from vertices, closing the ring if needed.
    pub fn from_vertices(mut vertices: Vec<GeoPoint>) -> Result<Self, ModelError> {
        if let (Some(f), Some(l)) = (vertices.first().copied(), vertices.last()) {
            if f.lon != l.lon || f.lat != l.lat {
                vertices.push(f);
            }
        }
        Self::new(vertices)
    }

    pub fn rectangle(bbox: &BBox) -> Result<Self, ModelError> {
        Self::from_vertices(vec![
            GeoPoint::lonlat(bbox.min_lon, bbox.min_lat),
            GeoPoint::lonlat(bbox.max_lon, bbox.min_lat),
            GeoPoint::lonlat(bbox.max_lon, bbox.max_lat),
            GeoPoint::lonlat(bbox.min_lon, bbox.max_lat),
        ])
    }

    pub fn ring(&self) -> &[GeoPoint] {
        &self.ring
    }

    pub fn bbox(&self) -> &BBox {
        &self.bbox
    }

    pub fn edges(&self) -> impl Iterator<Item = (&GeoPoint, &GeoPoint)> {
        self.ring.windows(2).map(|w| (&w[0], &w[1]))
    }

    pub fn to_wkt(&self) -> String {
        let coords: Vec<String> = self.ring.iter().map(|p| format!("{} {}", p.lon, p.lat)).collect();
        format!("POLYGON(({}))", coords.join(", "))
    }

    pub fn contains(&self, p: &GeoPoint) -> bool {
        if !self.bbox.contains(p.lon, p.lat) {
            return false;
        }
        let (x, y) = (p.lon, p.lat);
        let mut inside = false;
        for (a, b) in self.edges() {
            if on_segment(x, y, a, b) {
                return true;
            }
            if (a.lat > y) != (b.lat > y) {
                let x_cross = (b.lon - a.lon) * (y - a.lat) / (b.lat - a.lat) + a.lon;
                if x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Great-circle distance from `p` to the polygon; zero inside or on the boundary.
    pub fn distance_to(&self, p: &GeoPoint) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        self.edges()
            .map(|(a, b)| point_to_arc_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }
}

impl TryFrom<Vec<GeoPoint>> for Polygon {
    type Error = ModelError;

    fn try_from(ring: Vec<GeoPoint>) -> Result<Self, Self::Error> {
        Polygon::new(ring)
    }
}

impl From<Polygon> for Vec<GeoPoint> {
    fn from(poly: Polygon) -> Self {
        poly.ring
    }
}

pub fn point_in_polygon(p: &GeoPoint, poly: &Polygon) -> bool {
    poly.contains(p)
}

pub fn distance_to_polygon(p: &GeoPoint, poly: &Polygon) -> f64 {
    poly.distance_to(p)
}

fn distinct_vertex_count(vertices: &[GeoPoint]) -> usize {
    let mut seen: Vec<(f64, f64)> = Vec::with_capacity(vertices.len());
    for v in vertices {
        if !seen.iter().any(|&(lon, lat)| lon == v.lon && lat == v.lat) {
            seen.push((v.lon, v.lat));
        }
    }
    seen.len()
}

fn on_segment(x: f64, y: f64, a: &GeoPoint, b: &GeoPoint) -> bool {
    let cross = (b.lon - a.lon) * (y - a.lat) - (b.lat - a.lat) * (x - a.lon);
    let len = (b.lon - a.lon).hypot(b.lat - a.lat);
    if cross.abs() > BOUNDARY_EPS_DEG * len.max(1.0) {
        return false;
    }
    x >= a.lon.min(b.lon) - BOUNDARY_EPS_DEG
        && x <= a.lon.max(b.lon) + BOUNDARY_EPS_DEG
        && y >= a.lat.min(b.lat) - BOUNDARY_EPS_DEG
        && y <= a.lat.max(b.lat) + BOUNDARY_EPS_DEG
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn segments_intersect(p1: (f64, f64), p2: (f64, f64), q1: (f64, f64), q2: (f64, f64)) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let within = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| {
        c.0 >= a.0.min(b.0) && c.0 <= a.0.max(b.0) && c.1 >= a.1.min(b.1) && c.1 <= a.1.max(b.1)
    };
    (d1 == 0.0 && within(q1, q2, p1))
        || (d2 == 0.0 && within(q1, q2, p2))
        || (d3 == 0.0 && within(p1, p2, q1))
        || (d4 == 0.0 && within(p1, p2, q2))
}

fn ring_is_simple(ring: &[GeoPoint]) -> bool {
    let pts: Vec<(f64, f64)> = ring.iter().map(|p| (p.lon, p.lat)).collect();
    let n = pts.len() - 1;
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(pts[i], pts[i + 1], pts[j], pts[j + 1]) {
                return false;
            }
        }
    }
    true
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Distance from `p` to the minor great-circle arc between `a` and `b`.
fn point_to_arc_distance(p: &GeoPoint, a: &GeoPoint, b: &GeoPoint) -> f64 {
    let endpoint = haversine_distance(p, a).min(haversine_distance(p, b));
    let (va, vb, vp) = (a.unit_vector(), b.unit_vector(), p.unit_vector());
    let n = cross(va, vb);
    let n_len = dot(n, n).sqrt();
    if n_len < 1e-15 {
        return endpoint;
    }
    let n = [n[0] / n_len, n[1] / n_len, n[2] / n_len];
    let s = dot(vp, n);
    let foot = [vp[0] - s * n[0], vp[1] - s * n[1], vp[2] - s * n[2]];
    if dot(foot, foot) < 1e-24 {
        return endpoint;
    }
    let on_arc = dot(cross(va, foot), n) >= 0.0 && dot(cross(foot, vb), n) >= 0.0;
    if on_arc {
        (EARTH_RADIUS_M * s.clamp(-1.0, 1.0).asin().abs()).min(endpoint)
    } else {
        endpoint
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Polygon {
        Polygon::rectangle(&BBox::new(0.0, 0.0, 1.0, 1.0)).unwrap()
    }

    #[test]
    fn haversine_examples() {
        let origin = GeoPoint::lonlat(0.0, 0.0);
        assert_eq!(haversine_distance(&origin, &origin), 0.0);
        // closed form: one degree of arc on the sphere
        let one_degree = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        assert!((one_degree - 111_194.93).abs() < 0.01);
        let east = haversine_distance(&origin, &GeoPoint::lonlat(1.0, 0.0));
        let north = haversine_distance(&origin, &GeoPoint::lonlat(0.0, 1.0));
        assert!((east - one_degree).abs() < 1e-6);
        assert!((north - one_degree).abs() < 1e-6);
    }

    #[test]
    fn invalid_coordinates_rejected() {
        assert!(GeoPoint::new(181.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -90.5).is_err());
        assert!(GeoPoint::new(-180.0, 90.0).is_ok());
    }

    #[test]
    fn containment_examples() {
        let sq = unit_square();
        assert!(point_in_polygon(&GeoPoint::lonlat(0.5, 0.5), &sq));
        assert!(!point_in_polygon(&GeoPoint::lonlat(2.0, 2.0), &sq));
        assert!(point_in_polygon(&GeoPoint::lonlat(1.0, 0.5), &sq));
    }

    #[test]
    fn boundary_points_are_inside_on_every_edge() {
        let sq = unit_square();
        for i in 0..=20 {
            let f = i as f64 / 20.0;
            for p in [(f, 0.0), (1.0, f), (f, 1.0), (0.0, f)] {
                assert!(sq.contains(&GeoPoint::lonlat(p.0, p.1)), "{p:?}");
            }
            // just outside every edge
            for p in [(f, -1e-6), (1.0 + 1e-6, f), (f, 1.0 + 1e-6), (-1e-6, f)] {
                assert!(!sq.contains(&GeoPoint::lonlat(p.0, p.1)), "{p:?}");
            }
        }
    }

    #[test]
    fn polygon_validation() {
        let open = vec![
            GeoPoint::lonlat(0.0, 0.0),
            GeoPoint::lonlat(1.0, 0.0),
            GeoPoint::lonlat(1.0, 1.0),
        ];
        assert!(matches!(Polygon::new(open.clone()), Err(ModelError::UnclosedRing)));
        assert!(Polygon::from_vertices(open).is_ok());
        let degenerate = vec![
            GeoPoint::lonlat(0.0, 0.0),
            GeoPoint::lonlat(1.0, 0.0),
            GeoPoint::lonlat(0.0, 0.0),
        ];
        assert!(matches!(Polygon::new(degenerate), Err(ModelError::DegeneratePolygon(2))));
        let bowtie = Polygon::from_vertices(vec![
            GeoPoint::lonlat(0.0, 0.0),
            GeoPoint::lonlat(1.0, 1.0),
            GeoPoint::lonlat(1.0, 0.0),
            GeoPoint::lonlat(0.0, 1.0),
        ]);
        assert!(matches!(bowtie, Err(ModelError::SelfIntersecting)));
    }

    #[test]
    fn distance_to_polygon_examples() {
        let sq = unit_square();
        assert_eq!(distance_to_polygon(&GeoPoint::lonlat(0.5, 0.5), &sq), 0.0);
        assert_eq!(distance_to_polygon(&GeoPoint::lonlat(1.0, 1.0), &sq), 0.0);
        let d = distance_to_polygon(&GeoPoint::lonlat(0.0, 2.0), &sq);
        let expected = 111_194.93;
        assert!((d - expected).abs() / expected < 0.005, "{d}");
        // a point due south of the middle of the bottom edge
        let d = distance_to_polygon(&GeoPoint::lonlat(0.5, -1.0), &sq);
        assert!((d - expected).abs() / expected < 0.005, "{d}");
    }

    #[test]
    fn expanded_bbox_is_conservative() {
        let center = GeoPoint::lonlat(13.4, 52.5);
        let bbox = BBox::around(&center, 1_000.0);
        for k in 0..360 {
            let bearing = (k as f64).to_radians();
            let ang = 1_000.0 / EARTH_RADIUS_M;
            let (lat1, lon1) = (center.lat.to_radians(), center.lon.to_radians());
            let lat2 = (lat1.sin() * ang.cos() + lat1.cos() * ang.sin() * bearing.cos()).asin();
            let lon2 = lon1
                + (bearing.sin() * ang.sin() * lat1.cos()).atan2(ang.cos() - lat1.sin() * lat2.sin());
            assert!(bbox.contains(lon2.to_degrees(), lat2.to_degrees()));
        }
    }

    #[test]
    fn wkt_rendering() {
        assert_eq!(GeoPoint::lonlat(13.5, 52.25).to_wkt(), "POINT(13.5 52.25)");
        assert_eq!(unit_square().to_wkt(), "POLYGON((0 0, 1 0, 1 1, 0 1, 0 0))");
    }
}
