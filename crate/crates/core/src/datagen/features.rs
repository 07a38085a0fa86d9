//! Supporting feature sets (districts, counties, cities, airports,
//! universities, islands, harbors) and their GeoJSON representation.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatagenError, Scenario};
use crate::model::{BBox, FeatureKind, GeoPoint, Geometry, Polygon, SupportingFeature, EARTH_RADIUS_M};

const FEATURE_SEED_SALT: u64 = 0x5eed_fea7_0000_0001;

const BERLIN_DISTRICTS: [&str; 64] = [
    "Mitte", "Moabit", "Hansaviertel", "Tiergarten", "Wedding", "Gesundbrunnen", "Friedrichshain",
    "Kreuzberg", "Prenzlauer Berg", "Weißensee", "Blankenburg", "Heinersdorf", "Karow", "Pankow",
    "Blankenfelde", "Buch", "Französisch Buchholz", "Niederschönhausen", "Rosenthal", "Wilhelmsruh",
    "Charlottenburg", "Wilmersdorf", "Schmargendorf", "Grunewald", "Westend", "Halensee", "Spandau",
    "Haselhorst", "Siemensstadt", "Staaken", "Gatow", "Kladow", "Hakenfelde", "Wilhelmstadt",
    "Steglitz", "Lichterfelde", "Lankwitz", "Zehlendorf", "Dahlem", "Nikolassee", "Wannsee",
    "Schöneberg", "Friedenau", "Tempelhof", "Mariendorf", "Marienfelde", "Lichtenrade", "Neukölln",
    "Britz", "Buckow", "Rudow", "Gropiusstadt", "Alt-Treptow", "Plänterwald", "Baumschulenweg",
    "Johannisthal", "Adlershof", "Köpenick", "Friedrichshagen", "Marzahn", "Biesdorf", "Hellersdorf",
    "Lichtenberg", "Reinickendorf",
];

const BERLIN_UNIVERSITIES: [(&str, f64, f64); 10] = [
    ("TU Berlin", 13.3264, 52.5125),
    ("Humboldt-Universität zu Berlin", 13.3933, 52.5180),
    ("Freie Universität Berlin", 13.2880, 52.4527),
    ("Universität der Künste", 13.3290, 52.5090),
    ("HTW Berlin", 13.5263, 52.4570),
    ("Berliner Hochschule für Technik", 13.3517, 52.5445),
    ("HWR Berlin", 13.3364, 52.4839),
    ("Charité Campus Mitte", 13.3769, 52.5262),
    ("Alice Salomon Hochschule", 13.5867, 52.5374),
    ("Hertie School", 13.3918, 52.5130),
];

const NRW_COUNTIES: [&str; 53] = [
    "Städteregion Aachen", "Borken", "Coesfeld", "Düren", "Ennepe-Ruhr-Kreis", "Euskirchen",
    "Gütersloh", "Heinsberg", "Herford", "Hochsauerlandkreis", "Höxter", "Kleve", "Lippe",
    "Märkischer Kreis", "Mettmann", "Minden-Lübbecke", "Oberbergischer Kreis", "Olpe", "Paderborn",
    "Recklinghausen", "Rhein-Erft-Kreis", "Rhein-Kreis Neuss", "Rhein-Sieg-Kreis",
    "Rheinisch-Bergischer Kreis", "Siegen-Wittgenstein", "Soest", "Steinfurt", "Unna", "Viersen",
    "Warendorf", "Wesel", "Bielefeld", "Bochum", "Bonn", "Bottrop", "Dortmund", "Duisburg",
    "Düsseldorf", "Essen", "Gelsenkirchen", "Hagen", "Hamm", "Herne", "Köln", "Krefeld",
    "Leverkusen", "Mönchengladbach", "Mülheim an der Ruhr", "Münster", "Oberhausen", "Remscheid",
    "Solingen", "Wuppertal",
];

const NRW_CITIES: [(&str, f64, f64); 14] = [
    ("Köln", 6.9603, 50.9375),
    ("Düsseldorf", 6.7735, 51.2277),
    ("Dortmund", 7.4653, 51.5136),
    ("Essen", 7.0116, 51.4556),
    ("Duisburg", 6.7623, 51.4344),
    ("Bochum", 7.2162, 51.4818),
    ("Wuppertal", 7.1500, 51.2562),
    ("Bielefeld", 8.5325, 52.0302),
    ("Bonn", 7.0982, 50.7374),
    ("Münster", 7.6261, 51.9607),
    ("Aachen", 6.0839, 50.7753),
    ("Mönchengladbach", 6.4428, 51.1805),
    ("Paderborn", 8.7575, 51.7189),
    ("Siegen", 8.0243, 50.8748),
];

const NRW_AIRPORTS: [(&str, f64, f64); 7] = [
    ("Düsseldorf Airport", 6.7668, 51.2895),
    ("Köln/Bonn Airport", 7.1427, 50.8659),
    ("Dortmund Airport", 7.6122, 51.5183),
    ("Münster/Osnabrück Airport", 7.6847, 52.1346),
    ("Paderborn/Lippstadt Airport", 8.6163, 51.6141),
    ("Weeze Airport", 6.1422, 51.6024),
    ("Mönchengladbach Airport", 6.5044, 51.2303),
];

/// (name, center lon, center lat, approximate radius in meters)
const SARONIC_ISLANDS: [(&str, f64, f64, f64); 8] = [
    ("Salamina", 23.46, 37.93, 6_000.0),
    ("Aegina", 23.50, 37.73, 6_000.0),
    ("Agistri", 23.35, 37.70, 2_500.0),
    ("Poros", 23.48, 37.51, 3_000.0),
    ("Hydra", 23.47, 37.34, 5_000.0),
    ("Makronisos", 24.12, 37.71, 2_000.0),
    ("Fleves", 23.77, 37.77, 800.0),
    ("Patroklos", 23.96, 37.65, 800.0),
];

const SARONIC_HARBORS: [(&str, f64, f64); 15] = [
    ("Piraeus", 23.6295, 37.9420),
    ("Perama", 23.5660, 37.9630),
    ("Paloukia", 23.4960, 37.9610),
    ("Elefsina", 23.5450, 38.0350),
    ("Megara", 23.3450, 37.9910),
    ("Aegina", 23.4280, 37.7460),
    ("Souvala", 23.4800, 37.7670),
    ("Skala Agistri", 23.3600, 37.7110),
    ("Methana", 23.3900, 37.5830),
    ("Poros", 23.4560, 37.5010),
    ("Hydra", 23.4660, 37.3500),
    ("Ermioni", 23.2460, 37.3850),
    ("Lavrio", 24.0570, 37.7120),
    ("Glyfada", 23.7200, 37.8630),
    ("Vouliagmeni", 23.7780, 37.8080),
];

fn point_features(kind: FeatureKind, table: &[(&str, f64, f64)]) -> Vec<SupportingFeature> {
    table
        .iter()
        .map(|&(name, lon, lat)| SupportingFeature {
            name: name.to_string(),
            kind,
            geometry: Geometry::Point(GeoPoint::lonlat(lon, lat)),
        })
        .collect()
}

/// Jittered split positions `lo = s_0 < s_1 < ... < s_k = hi`.
fn splits(rng: &mut ChaCha8Rng, lo: f64, hi: f64, k: usize) -> Vec<f64> {
    let step = (hi - lo) / k as f64;
    let mut out = Vec::with_capacity(k + 1);
    out.push(lo);
    for i in 1..k {
        let jitter: f64 = rng.gen_range(-0.3..0.3);
        out.push(round6(lo + (i as f64 + jitter) * step));
    }
    out.push(hi);
    out
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

/// Partitions `bbox` into rectangles, one row of cells per entry of `row_sizes`.
/// Each row has its own column splits, so cells are staggered like bricks.
fn brick_tiling(
    rng: &mut ChaCha8Rng,
    bbox: &BBox,
    row_sizes: &[usize],
    names: &[&str],
    kind: FeatureKind,
) -> Vec<SupportingFeature> {
    let lat_splits = splits(rng, bbox.min_lat, bbox.max_lat, row_sizes.len());
    let mut names = names.iter();
    let mut out = Vec::new();
    for (row, &cols) in row_sizes.iter().enumerate() {
        let lon_splits = splits(rng, bbox.min_lon, bbox.max_lon, cols);
        for col in 0..cols {
            let cell = BBox::new(lon_splits[col], lat_splits[row], lon_splits[col + 1], lat_splits[row + 1]);
            let name = names.next().expect("enough names for the tiling");
            out.push(SupportingFeature {
                name: name.to_string(),
                kind,
                geometry: Geometry::Polygon(Polygon::rectangle(&cell).expect("non-degenerate cell")),
            });
        }
    }
    out
}

/// Star-shaped (hence simple) polygon around a center.
fn island_polygon(rng: &mut ChaCha8Rng, lon: f64, lat: f64, radius_m: f64) -> Polygon {
    const VERTICES: usize = 10;
    let deg_lat = (radius_m / EARTH_RADIUS_M).to_degrees();
    let deg_lon = deg_lat / lat.to_radians().cos();
    let vertices = (0..VERTICES)
        .map(|i| {
            let angle = (i as f64 + rng.gen_range(-0.3..0.3)) * std::f64::consts::TAU / VERTICES as f64;
            let r = rng.gen_range(0.6..1.0);
            GeoPoint::lonlat(round6(lon + r * deg_lon * angle.cos()), round6(lat + r * deg_lat * angle.sin()))
        })
        .collect();
    Polygon::from_vertices(vertices).expect("star polygon is simple")
}

/// Deterministic supporting features for a scenario.
pub fn generate_supporting_features(scenario: Scenario, seed: u64) -> Vec<SupportingFeature> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ FEATURE_SEED_SALT);
    let bbox = super::DatasetSpec::default_for(scenario, 2, seed).bbox;
    match scenario {
        Scenario::Cycling => {
            let mut out = brick_tiling(&mut rng, &bbox, &[8; 8], &BERLIN_DISTRICTS, FeatureKind::District);
            out.extend(point_features(FeatureKind::University, &BERLIN_UNIVERSITIES));
            out
        }
        Scenario::Aviation => {
            let mut out =
                brick_tiling(&mut rng, &bbox, &[7, 7, 8, 8, 8, 8, 7], &NRW_COUNTIES, FeatureKind::County);
            out.extend(point_features(FeatureKind::City, &NRW_CITIES));
            out.extend(point_features(FeatureKind::Airport, &NRW_AIRPORTS));
            out
        }
        Scenario::Ais => {
            let mut out: Vec<SupportingFeature> = SARONIC_ISLANDS
                .iter()
                .map(|&(name, lon, lat, r)| SupportingFeature {
                    name: name.to_string(),
                    kind: FeatureKind::Island,
                    geometry: Geometry::Polygon(island_polygon(&mut rng, lon, lat, r)),
                })
                .collect();
            out.extend(point_features(FeatureKind::Harbor, &SARONIC_HARBORS));
            out
        }
    }
}

#[derive(Serialize, Deserialize)]
struct FeatureCollectionDoc {
    #[serde(rename = "type")]
    kind: String,
    features: Vec<FeatureDoc>,
}

#[derive(Serialize, Deserialize)]
struct FeatureDoc {
    #[serde(rename = "type")]
    kind: String,
    properties: PropertiesDoc,
    geometry: GeometryDoc,
}

#[derive(Serialize, Deserialize)]
struct PropertiesDoc {
    name: String,
    kind: String,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", content = "coordinates")]
enum GeometryDoc {
    Point(Vec<f64>),
    Polygon(Vec<Vec<Vec<f64>>>),
}

fn coord(c: &[f64]) -> Result<GeoPoint, String> {
    match c {
        [lon, lat, ..] => GeoPoint::new(*lon, *lat).map_err(|e| e.to_string()),
        _ => Err("coordinate needs at least two numbers".to_string()),
    }
}

/// GeoJSON `FeatureCollection` text for a feature set.
pub fn features_to_geojson(features: &[SupportingFeature]) -> String {
    let doc = FeatureCollectionDoc {
        kind: "FeatureCollection".to_string(),
        features: features
            .iter()
            .map(|f| FeatureDoc {
                kind: "Feature".to_string(),
                properties: PropertiesDoc { name: f.name.clone(), kind: f.kind.to_string() },
                geometry: match &f.geometry {
                    Geometry::Point(p) => GeometryDoc::Point(vec![p.lon, p.lat]),
                    Geometry::Polygon(poly) => GeometryDoc::Polygon(vec![poly
                        .ring()
                        .iter()
                        .map(|p| vec![p.lon, p.lat])
                        .collect()]),
                },
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("feature collection serializes")
}

pub fn write_features(features: &[SupportingFeature], path: &Path) -> Result<(), DatagenError> {
    std::fs::write(path, features_to_geojson(features))
        .map_err(|source| DatagenError::Io { path: path.to_path_buf(), source })
}

/// Parses the GeoJSON subset: a `FeatureCollection` of `Point` / single-ring
/// `Polygon` features with `name` and `kind` properties.
pub fn parse_features(text: &str, path: &Path) -> Result<Vec<SupportingFeature>, DatagenError> {
    let doc: FeatureCollectionDoc = serde_json::from_str(text).map_err(|e| DatagenError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let format = |message: String| DatagenError::Format { path: path.to_path_buf(), message };
    if doc.kind != "FeatureCollection" {
        return Err(format(format!("expected a FeatureCollection, found `{}`", doc.kind)));
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(doc.features.len());
    for (i, f) in doc.features.into_iter().enumerate() {
        let kind: FeatureKind = f
            .properties
            .kind
            .parse()
            .map_err(|e| format(format!("feature #{i} `{}`: {e}", f.properties.name)))?;
        let geometry = match f.geometry {
            GeometryDoc::Point(c) => Geometry::Point(coord(&c).map_err(|e| format(format!("feature #{i}: {e}")))?),
            GeometryDoc::Polygon(rings) => {
                if rings.len() != 1 {
                    return Err(format(format!("feature #{i}: exactly one polygon ring is supported")));
                }
                let ring = rings[0]
                    .iter()
                    .map(|c| coord(c))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| format(format!("feature #{i}: {e}")))?;
                Geometry::Polygon(
                    Polygon::new(ring).map_err(|e| format(format!("feature #{i} `{}`: {e}", f.properties.name)))?,
                )
            }
        };
        if !seen.insert((kind, f.properties.name.clone())) {
            return Err(format(format!("duplicate {kind} name `{}`", f.properties.name)));
        }
        out.push(SupportingFeature { name: f.properties.name, kind, geometry });
    }
    Ok(out)
}

pub fn load_features(path: &Path) -> Result<Vec<SupportingFeature>, DatagenError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| DatagenError::Io { path: path.to_path_buf(), source })?;
    parse_features(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(features: &[SupportingFeature], kind: FeatureKind, polygons: bool) -> usize {
        features
            .iter()
            .filter(|f| f.kind == kind && matches!(f.geometry, Geometry::Polygon(_)) == polygons)
            .count()
    }

    #[test]
    fn per_scenario_minimum_counts() {
        let cyc = generate_supporting_features(Scenario::Cycling, 1);
        assert!(count(&cyc, FeatureKind::District, true) >= 12);
        assert!(count(&cyc, FeatureKind::University, false) >= 5);
        let avi = generate_supporting_features(Scenario::Aviation, 1);
        assert!(count(&avi, FeatureKind::County, true) >= 30);
        assert!(count(&avi, FeatureKind::City, false) >= 10);
        assert!(count(&avi, FeatureKind::Airport, false) >= 5);
        let ais = generate_supporting_features(Scenario::Ais, 1);
        assert!(count(&ais, FeatureKind::Island, true) >= 5);
        assert!(count(&ais, FeatureKind::Harbor, false) >= 10);
    }

    #[test]
    fn names_unique_per_kind_and_in_bbox() {
        for scenario in Scenario::ALL {
            let bbox = super::super::DatasetSpec::default_for(scenario, 2, 0).bbox;
            let features = generate_supporting_features(scenario, 4);
            let mut seen = BTreeSet::new();
            for f in &features {
                assert!(seen.insert((f.kind, f.name.clone())), "{}", f.name);
                let fb = f.geometry.bbox();
                assert!(bbox.contains(fb.min_lon, fb.min_lat) && bbox.contains(fb.max_lon, fb.max_lat), "{}", f.name);
            }
        }
    }

    #[test]
    fn same_seed_same_features() {
        for scenario in Scenario::ALL {
            assert_eq!(generate_supporting_features(scenario, 9), generate_supporting_features(scenario, 9));
        }
        assert_ne!(
            generate_supporting_features(Scenario::Cycling, 9),
            generate_supporting_features(Scenario::Cycling, 10)
        );
    }

    #[test]
    fn tiling_cells_have_disjoint_interiors() {
        // sample interior points of every cell; each must be strictly inside no other cell
        let features = generate_supporting_features(Scenario::Aviation, 2);
        let polys: Vec<&Polygon> = features
            .iter()
            .filter_map(|f| match &f.geometry {
                Geometry::Polygon(p) if f.kind == FeatureKind::County => Some(p),
                _ => None,
            })
            .collect();
        for (i, p) in polys.iter().enumerate() {
            let b = p.bbox();
            for (fx, fy) in [(0.5, 0.5), (0.1, 0.1), (0.9, 0.9), (0.1, 0.9), (0.9, 0.1)] {
                let sample = GeoPoint::lonlat(b.min_lon + fx * b.width(), b.min_lat + fy * b.height());
                let hits: Vec<usize> = polys.iter().enumerate().filter(|(_, q)| q.contains(&sample)).map(|(j, _)| j).collect();
                assert_eq!(hits, vec![i]);
            }
        }
    }

    #[test]
    fn parse_single_point() {
        let text = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{"name":"TU Berlin","kind":"university"},
             "geometry":{"type":"Point","coordinates":[13.3264,52.5125]}}]}"#;
        let features = parse_features(text, Path::new("mem")).unwrap();
        assert_eq!(features.len(), 1);
        assert_eq!(features[0].name, "TU Berlin");
        assert_eq!(features[0].kind, FeatureKind::University);
        assert_eq!(features[0].geometry, Geometry::Point(GeoPoint::lonlat(13.3264, 52.5125)));
    }

    #[test]
    fn parse_empty_and_errors() {
        let empty = r#"{"type":"FeatureCollection","features":[]}"#;
        assert!(parse_features(empty, Path::new("mem")).unwrap().is_empty());

        let unclosed = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{"name":"x","kind":"district"},
             "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1]]]}}]}"#;
        let err = parse_features(unclosed, Path::new("mem")).unwrap_err().to_string();
        assert!(err.contains("not closed"), "{err}");

        let unknown_kind = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{"name":"x","kind":"volcano"},
             "geometry":{"type":"Point","coordinates":[0,0]}}]}"#;
        assert!(parse_features(unknown_kind, Path::new("mem")).unwrap_err().to_string().contains("volcano"));

        let malformed = "{\"type\": \"FeatureCollection\",\n \"features\": [ oops ]}";
        match parse_features(malformed, Path::new("mem")) {
            Err(DatagenError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn geojson_round_trip() {
        for scenario in Scenario::ALL {
            let features = generate_supporting_features(scenario, 3);
            let text = features_to_geojson(&features);
            assert_eq!(parse_features(&text, Path::new("mem")).unwrap(), features);
        }
    }
}
