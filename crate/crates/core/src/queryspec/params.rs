//! Parameter kinds and the dataset-driven parameter generator.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{QueryTemplate, TemplateError};
use crate::datagen::DatasetStats;
use crate::model::{FeatureKind, GeoPoint, Period, TimeInstant, MICROS_PER_HOUR, MICROS_PER_SECOND};

pub const MAX_DISTINCT_ATTEMPTS: usize = 10_000;
pub const DEFAULT_MIN_REGIONS: u32 = 3;
pub const DEFAULT_RADIUS_RANGE: (f64, f64) = (500.0, 5_000.0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParamKind {
    PeriodShort,
    PeriodMedium,
    PeriodLong,
    RegionName(FeatureKind),
    PointSample,
    /// Uniform radius in meters, rounded to 50 m steps.
    Radius { min: f64, max: f64 },
    HourOfDay,
    MinRegions(u32),
    HarborPair,
}

impl ParamKind {
    pub fn period_duration_micros(&self) -> Option<i64> {
        match self {
            ParamKind::PeriodShort => Some(MICROS_PER_HOUR),
            ParamKind::PeriodMedium => Some(24 * MICROS_PER_HOUR),
            ParamKind::PeriodLong => Some(7 * 24 * MICROS_PER_HOUR),
            _ => None,
        }
    }
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamKind::PeriodShort => f.write_str("period_short"),
            ParamKind::PeriodMedium => f.write_str("period_medium"),
            ParamKind::PeriodLong => f.write_str("period_long"),
            ParamKind::RegionName(k) => write!(f, "region_name({k})"),
            ParamKind::PointSample => f.write_str("point_sample"),
            ParamKind::Radius { min, max } => write!(f, "radius({min},{max})"),
            ParamKind::HourOfDay => f.write_str("hour_of_day"),
            ParamKind::MinRegions(k) => write!(f, "min_regions({k})"),
            ParamKind::HarborPair => f.write_str("harbor_pair"),
        }
    }
}

fn call_args(s: &str) -> Option<(&str, Option<&str>)> {
    match s.find('(') {
        None => Some((s, None)),
        Some(open) => {
            let inner = s[open + 1..].strip_suffix(')')?;
            Some((&s[..open], Some(inner)))
        }
    }
}

impl FromStr for ParamKind {
    type Err = String;

    /// Accepts the kind names plus `region_name(kind)`, `radius(lo,hi)`,
    /// `min_regions(k)`, and a bare feature kind as shorthand for `region_name`.
    fn from_str(raw: &str) -> Result<Self, Self::Err> {
        let s: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || format!("unknown parameter kind `{raw}`");
        let (head, args) = call_args(&s).ok_or_else(bad)?;
        Ok(match (head, args) {
            ("period_short", None) => ParamKind::PeriodShort,
            ("period_medium", None) => ParamKind::PeriodMedium,
            ("period_long", None) => ParamKind::PeriodLong,
            ("point_sample", None) => ParamKind::PointSample,
            ("hour_of_day", None) => ParamKind::HourOfDay,
            ("harbor_pair", None) => ParamKind::HarborPair,
            ("min_regions", None) => ParamKind::MinRegions(DEFAULT_MIN_REGIONS),
            ("min_regions", Some(k)) => {
                let k: u32 = k.parse().map_err(|_| bad())?;
                if k == 0 {
                    return Err("min_regions must be at least 1".into());
                }
                ParamKind::MinRegions(k)
            }
            ("radius", None) => ParamKind::Radius { min: DEFAULT_RADIUS_RANGE.0, max: DEFAULT_RADIUS_RANGE.1 },
            ("radius", Some(range)) => {
                let (lo, hi) = range.split_once(',').ok_or_else(bad)?;
                let (min, max): (f64, f64) = (lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?);
                if !(min > 0.0 && max >= min && max.is_finite()) {
                    return Err(format!("invalid radius range in `{raw}`"));
                }
                ParamKind::Radius { min, max }
            }
            ("region_name", Some(k)) => ParamKind::RegionName(k.parse().map_err(|_| bad())?),
            (k, None) => ParamKind::RegionName(k.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamDecl {
    pub name: String,
    pub kind: ParamKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum ParamValue {
    Period(Period),
    Name(String),
    Point(GeoPoint),
    Meters(f64),
    Hour(u8),
    Count(u32),
    Pair(String, String),
}

impl ParamValue {
    pub fn type_name(&self) -> &'static str {
        match self {
            ParamValue::Period(_) => "period",
            ParamValue::Name(_) => "name",
            ParamValue::Point(_) => "point",
            ParamValue::Meters(_) => "meters",
            ParamValue::Hour(_) => "hour",
            ParamValue::Count(_) => "count",
            ParamValue::Pair(..) => "pair",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub id: u32,
    pub values: BTreeMap<String, ParamValue>,
}

/// Mixes the template name into the seed so templates draw independent streams.
fn template_seed(seed: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    seed ^ h
}

struct Sampler<'a> {
    stats: &'a DatasetStats,
    template: &'a str,
    /// Cumulative lengths of `stats.activity`, for length-weighted span choice.
    cumulative: Vec<i64>,
}

impl<'a> Sampler<'a> {
    fn new(stats: &'a DatasetStats, template: &'a str) -> Self {
        let mut acc = 0;
        let cumulative = stats
            .activity
            .iter()
            .map(|s| {
                acc += s.end.micros() - s.start.micros() + 1;
                acc
            })
            .collect();
        Sampler { stats, template, cumulative }
    }

    fn err(&self, message: String) -> TemplateError {
        TemplateError::Generation { template: self.template.to_string(), message }
    }

    fn names(&self, kind: FeatureKind) -> Result<&'a [String], TemplateError> {
        let names = self.stats.names(kind);
        if names.is_empty() {
            return Err(self.err(format!("dataset has no `{kind}` features")));
        }
        Ok(names)
    }

    /// Uniform whole-second instant in `[lo, hi]`, or `lo` if none exists.
    fn whole_seconds(&self, rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> i64 {
        let lo_s = lo.div_euclid(MICROS_PER_SECOND) + i64::from(lo.rem_euclid(MICROS_PER_SECOND) != 0);
        let hi_s = hi.div_euclid(MICROS_PER_SECOND);
        if hi_s < lo_s {
            return lo;
        }
        rng.gen_range(lo_s..=hi_s) * MICROS_PER_SECOND
    }

    /// A period of `dur` inside the extent that overlaps an activity span by
    /// at least the dataset's sampling gap, so it always holds an instant.
    fn period(&self, rng: &mut ChaCha8Rng, dur: i64) -> Period {
        let extent = self.stats.time_extent;
        let ext_start = extent.start.micros();
        let ext_end = extent.end.micros();
        if dur >= ext_end - ext_start {
            return extent;
        }
        let latest = ext_end - dur;
        let (lo, hi) = match self.cumulative.last() {
            Some(&total) if total > 0 => {
                let r = rng.gen_range(0..total);
                let span = self.stats.activity[self.cumulative.partition_point(|&c| c <= r)];
                let (s, e) = (span.start.micros(), span.end.micros());
                // [x, x + h] lies inside the span and holds an instant; the
                // period must contain it
                let h = self.stats.max_sample_gap_micros.min(e - s).min(dur - 1);
                let x = rng.gen_range(s..=e - h);
                (ext_start.max(x + h + 1 - dur), x.min(latest))
            }
            _ => (ext_start, latest),
        };
        let start = self.whole_seconds(rng, lo, hi.max(lo));
        Period {
            start: TimeInstant::from_micros(start),
            end: TimeInstant::from_micros(start + dur),
        }
    }

    fn value(&self, rng: &mut ChaCha8Rng, kind: &ParamKind) -> Result<ParamValue, TemplateError> {
        Ok(match kind {
            ParamKind::PeriodShort | ParamKind::PeriodMedium | ParamKind::PeriodLong => {
                ParamValue::Period(self.period(rng, kind.period_duration_micros().unwrap()))
            }
            ParamKind::RegionName(k) => ParamValue::Name(self.names(*k)?.choose(rng).unwrap().clone()),
            ParamKind::PointSample => {
                let b = self.stats.bbox;
                let lon = (rng.gen_range(b.min_lon..=b.max_lon) * 1e5).round() / 1e5;
                let lat = (rng.gen_range(b.min_lat..=b.max_lat) * 1e5).round() / 1e5;
                ParamValue::Point(GeoPoint::lonlat(lon.clamp(b.min_lon, b.max_lon), lat.clamp(b.min_lat, b.max_lat)))
            }
            ParamKind::Radius { min, max } => {
                let r = rng.gen_range(*min..=*max);
                let stepped = ((r / 50.0).round() * 50.0).clamp(*min, *max);
                ParamValue::Meters(stepped)
            }
            ParamKind::HourOfDay => ParamValue::Hour(rng.gen_range(0..24)),
            ParamKind::MinRegions(k) => ParamValue::Count(*k),
            ParamKind::HarborPair => {
                let names = self.names(FeatureKind::Harbor)?;
                if names.len() < 2 {
                    return Err(self.err("harbor_pair needs at least two harbors".into()));
                }
                let mut pick = names.choose_multiple(rng, 2);
                let a = pick.next().unwrap().clone();
                let b = pick.next().unwrap().clone();
                ParamValue::Pair(a, b)
            }
        })
    }
}

/// Draws `n` pairwise-distinct parameter sets for `template`.
pub fn generate_param_sets(
    template: &QueryTemplate,
    stats: &DatasetStats,
    n: usize,
    seed: u64,
) -> Result<Vec<ParamSet>, TemplateError> {
    if n == 0 {
        return Err(TemplateError::Generation {
            template: template.name.clone(),
            message: "at least one parameter set is required".into(),
        });
    }
    let sampler = Sampler::new(stats, &template.name);
    let mut rng = ChaCha8Rng::seed_from_u64(template_seed(seed, &template.name));
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        if attempts == MAX_DISTINCT_ATTEMPTS {
            return Err(sampler.err(format!(
                "only {} distinct parameter sets after {MAX_DISTINCT_ATTEMPTS} attempts, {n} requested",
                out.len()
            )));
        }
        attempts += 1;
        let mut values = BTreeMap::new();
        for decl in &template.parameters {
            values.insert(decl.name.clone(), sampler.value(&mut rng, &decl.kind)?);
        }
        let key = serde_json::to_string(&values).expect("param values serialize");
        if seen.insert(key) {
            out.push(ParamSet { id: out.len() as u32, values });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, DatasetSpec, Scenario};
    use crate::queryspec::TemplateRegistry;

    #[test]
    fn kind_strings_round_trip() {
        for s in [
            "period_short",
            "period_medium",
            "period_long",
            "region_name(county)",
            "point_sample",
            "radius(100,900)",
            "hour_of_day",
            "min_regions(3)",
            "harbor_pair",
        ] {
            let k: ParamKind = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        assert_eq!("district".parse::<ParamKind>().unwrap(), ParamKind::RegionName(FeatureKind::District));
        assert_eq!("min_regions".parse::<ParamKind>().unwrap(), ParamKind::MinRegions(3));
        assert!("period_huge".parse::<ParamKind>().is_err());
        assert!("radius(5,1)".parse::<ParamKind>().is_err());
        assert!("min_regions(0)".parse::<ParamKind>().is_err());
    }

    #[test]
    fn builtin_templates_yield_distinct_contained_sets() {
        for scenario in Scenario::ALL {
            let ds = generate_dataset(&DatasetSpec::default_for(scenario, 20_000, 5)).unwrap();
            let registry = TemplateRegistry::builtin(scenario);
            for t in registry.enabled() {
                let sets = generate_param_sets(t, &ds.stats, 50, 9).unwrap();
                assert_eq!(sets.len(), 50);
                let keys: HashSet<String> = sets.iter().map(|s| serde_json::to_string(&s.values).unwrap()).collect();
                assert_eq!(keys.len(), 50, "{}", t.name);
                for (i, ps) in sets.iter().enumerate() {
                    assert_eq!(ps.id as usize, i);
                    assert_eq!(ps.values.len(), t.parameters.len());
                    for v in ps.values.values() {
                        match v {
                            ParamValue::Period(p) => assert!(ds.stats.time_extent.covers(p), "{}", t.name),
                            ParamValue::Name(n) => assert!(ds.features.iter().any(|f| &f.name == n)),
                            ParamValue::Point(p) => assert!(ds.stats.bbox.contains(p.lon, p.lat)),
                            _ => {}
                        }
                    }
                }
                assert_eq!(sets, generate_param_sets(t, &ds.stats, 50, 9).unwrap());
            }
        }
    }

    #[test]
    fn periods_cover_data() {
        for scenario in Scenario::ALL {
            let ds = generate_dataset(&DatasetSpec::default_for(scenario, 20_000, 6)).unwrap();
            let mut times: Vec<i64> = ds.instants.iter().map(|i| i.t.micros()).collect();
            times.sort_unstable();
            for kind in ["period_short", "period_medium", "period_long"] {
                let text = format!("- {{name: q, type: temporal, pg: 'x', canonical: 'AIS.Q1(:{kind})', parameters: [{kind}]}}\n");
                let r = TemplateRegistry::parse(&text).unwrap();
                let sets = generate_param_sets(&r.templates()[0], &ds.stats, 200, 1).unwrap();
                let hits = sets
                    .iter()
                    .filter(|ps| {
                        let ParamValue::Period(p) = &ps.values[kind] else { unreachable!() };
                        let i = times.partition_point(|&t| t < p.start.micros());
                        i < times.len() && times[i] < p.end.micros()
                    })
                    .count();
                assert!(hits as f64 >= 0.99 * sets.len() as f64, "{scenario} {kind}: {hits}");
            }
        }
    }

    #[test]
    fn absent_feature_kind_is_an_error() {
        let ds = generate_dataset(&DatasetSpec::default_for(Scenario::Cycling, 10_000, 2)).unwrap();
        let r = TemplateRegistry::builtin(Scenario::Ais);
        let t = r.get("crossingsNearIsland").unwrap();
        assert!(matches!(generate_param_sets(t, &ds.stats, 5, 1), Err(TemplateError::Generation { .. })));
        assert!(generate_param_sets(t, &ds.stats, 0, 1).is_err());
    }
}
