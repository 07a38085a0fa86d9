//! The canonical query catalog: which store primitive each named query maps
//! to, the argument slots it takes, and its result shape.
//!
//! Canonical dialect texts are calls such as `AIS.Q1(:period)` or
//! `Cyc.Q4(:university, radius=500)`. Positional arguments fill slots in
//! catalog order; `slot=value` fills or overrides a slot by name.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Deserialize;

use super::params::{ParamKind, ParamSet, ParamValue};
use super::render::Component;
use crate::datagen::Scenario;
use crate::model::FeatureKind;

const BUILTIN_CATALOG: &str = include_str!("../../data/catalog.yaml");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Primitive {
    CountInstantsInPeriod,
    CountInstantsPerHour,
    DistinctActiveTrips,
    ActiveTripsAtHour,
    TripsIntersectingRegion,
    TripsWithinDistance,
    NearestTrip,
    AvgTripDurationStartedInPeriod,
    AvgDurationTripsEndingNear,
    AvgDurationTripsStartedNearInPeriod,
    TripsConnecting,
    TripsCrossingMinRegions,
    TerminalEventCount,
}

/// Result shape of a canonical query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    /// One row, column `count`.
    Count,
    /// One `trip_id` row per matching trip.
    TripIds,
    /// `(hour, count)` rows, one per non-empty hour bucket.
    HourlyCounts,
    /// One row, column `avg_duration_s`, Null when nothing qualifies.
    MeanSeconds,
    /// Zero or one `(trip_id, distance_m)` row.
    Nearest,
}

impl Output {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Output::Count => &["count"],
            Output::TripIds => &["trip_id"],
            Output::HourlyCounts => &["hour", "count"],
            Output::MeanSeconds => &["avg_duration_s"],
            Output::Nearest => &["trip_id", "distance_m"],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotKind {
    Period,
    Region(FeatureKind),
    Point,
    Radius,
    Hour,
    Count,
    Pair(FeatureKind),
}

impl SlotKind {
    /// Whether a generated parameter of `kind` can fill this slot.
    pub fn accepts(self, kind: &ParamKind, component: Option<Component>) -> bool {
        match (self, kind, component) {
            (SlotKind::Period, ParamKind::PeriodShort | ParamKind::PeriodMedium | ParamKind::PeriodLong, None) => true,
            (SlotKind::Region(want), ParamKind::RegionName(have), None) => want == *have,
            (SlotKind::Region(FeatureKind::Harbor), ParamKind::HarborPair, Some(Component::From | Component::To)) => {
                true
            }
            (SlotKind::Point, ParamKind::PointSample, None) => true,
            (SlotKind::Radius, ParamKind::Radius { .. }, None) => true,
            (SlotKind::Hour, ParamKind::HourOfDay, None) => true,
            (SlotKind::Count, ParamKind::MinRegions(_), None) => true,
            (SlotKind::Pair(FeatureKind::Harbor), ParamKind::HarborPair, None) => true,
            _ => false,
        }
    }

    fn accepts_literal(self) -> bool {
        matches!(self, SlotKind::Radius | SlotKind::Count | SlotKind::Hour)
    }
}

impl fmt::Display for SlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotKind::Period => f.write_str("period"),
            SlotKind::Region(k) => write!(f, "region({k})"),
            SlotKind::Point => f.write_str("point"),
            SlotKind::Radius => f.write_str("radius"),
            SlotKind::Hour => f.write_str("hour"),
            SlotKind::Count => f.write_str("count"),
            SlotKind::Pair(k) => write!(f, "pair({k})"),
        }
    }
}

impl FromStr for SlotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = |prefix: &str| s.strip_prefix(prefix).and_then(|r| r.strip_suffix(')'));
        let feature = |k: &str| k.trim().parse::<FeatureKind>().map_err(|e| e.to_string());
        match s {
            "period" => Ok(SlotKind::Period),
            "point" => Ok(SlotKind::Point),
            "radius" => Ok(SlotKind::Radius),
            "hour" => Ok(SlotKind::Hour),
            "count" => Ok(SlotKind::Count),
            _ => {
                if let Some(k) = inner("region(") {
                    Ok(SlotKind::Region(feature(k)?))
                } else if let Some(k) = inner("pair(") {
                    Ok(SlotKind::Pair(feature(k)?))
                } else {
                    Err(format!("unknown slot kind `{s}`"))
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Slot {
    pub name: String,
    pub kind: SlotKind,
    pub default: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CatalogEntry {
    pub id: String,
    pub scenario: Scenario,
    pub primitive: Primitive,
    /// Feature kind scanned by region-counting primitives.
    pub region_kind: Option<FeatureKind>,
    pub slots: Vec<Slot>,
    pub output: Output,
    pub description: String,
}

impl CatalogEntry {
    pub fn slot(&self, name: &str) -> Option<&Slot> {
        self.slots.iter().find(|s| s.name == name)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSlot {
    name: String,
    kind: String,
    #[serde(default)]
    default: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    id: String,
    scenario: Scenario,
    primitive: Primitive,
    #[serde(default)]
    region_kind: Option<FeatureKind>,
    #[serde(default)]
    params: Vec<RawSlot>,
    output: Output,
    #[serde(default)]
    description: String,
}

#[derive(Clone, Debug, Default)]
pub struct Catalog {
    entries: BTreeMap<String, CatalogEntry>,
}

impl Catalog {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_CATALOG).expect("built-in catalog is valid")
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let raw: Vec<RawEntry> = serde_yaml::from_str(text).map_err(|e| e.to_string())?;
        let mut entries = BTreeMap::new();
        for r in raw {
            let mut slots = Vec::with_capacity(r.params.len());
            for s in r.params {
                let kind: SlotKind = s.kind.parse().map_err(|e| format!("{}: {e}", r.id))?;
                if s.default.is_some() && !kind.accepts_literal() {
                    return Err(format!("{}: slot `{}` of kind {kind} cannot have a default", r.id, s.name));
                }
                slots.push(Slot { name: s.name, kind, default: s.default });
            }
            let entry = CatalogEntry {
                id: r.id.clone(),
                scenario: r.scenario,
                primitive: r.primitive,
                region_kind: r.region_kind,
                slots,
                output: r.output,
                description: r.description,
            };
            if entries.insert(r.id.clone(), entry).is_some() {
                return Err(format!("duplicate catalog id `{}`", r.id));
            }
        }
        Ok(Catalog { entries })
    }

    pub fn get(&self, id: &str) -> Option<&CatalogEntry> {
        self.entries.get(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.values()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CallArg {
    Placeholder { name: String, component: Option<Component> },
    Number(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalCall {
    pub id: String,
    pub positional: Vec<CallArg>,
    pub named: Vec<(String, CallArg)>,
}

fn parse_arg(raw: &str) -> Result<CallArg, String> {
    let raw = raw.trim();
    if let Some(rest) = raw.strip_prefix(':') {
        let (name, component) = match rest.split_once('.') {
            Some((n, c)) => {
                let c = match c {
                    "start" => Component::Start,
                    "end" => Component::End,
                    "from" => Component::From,
                    "to" => Component::To,
                    _ => return Err(format!("unknown component `.{c}`")),
                };
                (n, Some(c))
            }
            None => (rest, None),
        };
        let valid = name.starts_with(|c: char| c.is_ascii_lowercase() || c == '_')
            && name.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
        if !valid {
            return Err(format!("invalid placeholder `{raw}`"));
        }
        return Ok(CallArg::Placeholder { name: name.to_string(), component });
    }
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(CallArg::Number)
        .ok_or_else(|| format!("invalid argument `{raw}`"))
}

impl FromStr for CanonicalCall {
    type Err = String;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let text = text.trim().trim_end_matches(';').trim();
        let (id, args) = match text.find('(') {
            None => (text, ""),
            Some(open) => {
                let inner = text[open + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| format!("unbalanced parentheses in `{text}`"))?;
                (&text[..open], inner)
            }
        };
        let id = id.trim();
        if id.is_empty() || id.contains(char::is_whitespace) {
            return Err(format!("invalid canonical query id in `{text}`"));
        }
        let mut positional = Vec::new();
        let mut named = Vec::new();
        for part in args.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.split_once('=') {
                Some((k, v)) => named.push((k.trim().to_string(), parse_arg(v)?)),
                None => {
                    if !named.is_empty() {
                        return Err(format!("positional argument `{part}` after named arguments"));
                    }
                    positional.push(parse_arg(part)?);
                }
            }
        }
        Ok(CanonicalCall { id: id.to_string(), positional, named })
    }
}

impl CanonicalCall {
    /// Pairs each catalog slot with the argument filling it, if any.
    fn fill<'a>(&'a self, entry: &'a CatalogEntry) -> Result<Vec<(&'a Slot, Option<&'a CallArg>)>, String> {
        if self.positional.len() > entry.slots.len() {
            return Err(format!(
                "{} takes at most {} arguments, got {}",
                entry.id,
                entry.slots.len(),
                self.positional.len()
            ));
        }
        let mut filled: Vec<Option<&CallArg>> = self.positional.iter().map(Some).collect();
        filled.resize(entry.slots.len(), None);
        for (name, arg) in &self.named {
            let idx = entry
                .slots
                .iter()
                .position(|s| &s.name == name)
                .ok_or_else(|| format!("{} has no argument named `{name}`", entry.id))?;
            if filled[idx].is_some() {
                return Err(format!("argument `{name}` given twice"));
            }
            filled[idx] = Some(arg);
        }
        for (slot, arg) in entry.slots.iter().zip(&filled) {
            if arg.is_none() && slot.default.is_none() {
                return Err(format!("{} is missing argument `{}`", entry.id, slot.name));
            }
        }
        Ok(entry.slots.iter().zip(filled).collect())
    }

    /// Checks arity, argument names, and that each placeholder's declared
    /// kind can fill its slot.
    pub fn resolve(&self, entry: &CatalogEntry, kind_of: impl Fn(&str) -> Option<ParamKind>) -> Result<(), String> {
        for (slot, arg) in self.fill(entry)? {
            match arg {
                Some(CallArg::Number(_)) if !slot.kind.accepts_literal() => {
                    return Err(format!("argument `{}` of {} cannot be a literal", slot.name, entry.id));
                }
                Some(CallArg::Placeholder { name, component }) => {
                    let kind = kind_of(name).ok_or_else(|| format!("undeclared parameter `:{name}`"))?;
                    if !slot.kind.accepts(&kind, *component) {
                        return Err(format!(
                            "parameter `:{name}` of kind {kind} cannot fill {} argument `{}`",
                            slot.kind, slot.name
                        ));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Concrete slot values for one parameter set.
    pub fn bind(&self, entry: &CatalogEntry, params: &ParamSet) -> Result<BoundArgs, String> {
        let mut values = BTreeMap::new();
        for (slot, arg) in self.fill(entry)? {
            let value = match arg {
                None => literal_value(slot.kind, slot.default.expect("checked by fill")),
                Some(CallArg::Number(v)) => literal_value(slot.kind, *v),
                Some(CallArg::Placeholder { name, component }) => {
                    let v = params.values.get(name).ok_or_else(|| format!("no value for `:{name}`"))?;
                    match (v, component) {
                        (ParamValue::Pair(a, _), Some(Component::From)) => ParamValue::Name(a.clone()),
                        (ParamValue::Pair(_, b), Some(Component::To)) => ParamValue::Name(b.clone()),
                        (v, None) => v.clone(),
                        (v, Some(c)) => return Err(format!("component `.{c}` does not apply to {}", v.type_name())),
                    }
                }
            };
            values.insert(slot.name.clone(), value);
        }
        Ok(BoundArgs { values })
    }
}

fn literal_value(kind: SlotKind, v: f64) -> ParamValue {
    match kind {
        SlotKind::Count => ParamValue::Count(v as u32),
        SlotKind::Hour => ParamValue::Hour(v as u8),
        _ => ParamValue::Meters(v),
    }
}

/// Slot name to value, ready for the store.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundArgs {
    pub values: BTreeMap<String, ParamValue>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_catalog_has_eighteen_queries() {
        let c = Catalog::builtin();
        assert_eq!(c.len(), 18);
        for s in Scenario::ALL {
            assert_eq!(c.iter().filter(|e| e.scenario == s).count(), 6, "{s}");
        }
        let q4 = c.get("Cyc.Q4").unwrap();
        assert_eq!(q4.slot("radius").unwrap().default, Some(250.0));
        assert_eq!(c.get("AIS.Q1").unwrap().output, Output::Count);
    }

    #[test]
    fn parses_calls() {
        let call: CanonicalCall = "Cyc.Q4(:university, radius=500)".parse().unwrap();
        assert_eq!(call.id, "Cyc.Q4");
        assert_eq!(call.positional, vec![CallArg::Placeholder { name: "university".into(), component: None }]);
        assert_eq!(call.named, vec![("radius".into(), CallArg::Number(500.0))]);
        let call: CanonicalCall = "AIS.Q4(:harbors)".parse().unwrap();
        assert_eq!(call.positional.len(), 1);
        assert!("Cyc.Q4(:a, radius=1, :b)".parse::<CanonicalCall>().is_err());
        assert!("Cyc.Q4(:a".parse::<CanonicalCall>().is_err());
        assert!("Cyc.Q4(:A)".parse::<CanonicalCall>().is_err());
    }

    #[test]
    fn resolve_checks_kinds_and_arity() {
        let c = Catalog::builtin();
        let q4 = c.get("Cyc.Q4").unwrap();
        let uni = |n: &str| (n == "u").then_some(ParamKind::RegionName(FeatureKind::University));
        let ok: CanonicalCall = "Cyc.Q4(:u)".parse().unwrap();
        assert!(ok.resolve(q4, uni).is_ok());
        let wrong: CanonicalCall = "Cyc.Q4(:d)".parse().unwrap();
        let district = |_: &str| Some(ParamKind::RegionName(FeatureKind::District));
        assert!(wrong.resolve(q4, district).is_err());
        let missing: CanonicalCall = "Cyc.Q4".parse().unwrap();
        assert!(missing.resolve(q4, uni).is_err());
        let extra: CanonicalCall = "Cyc.Q4(:u, 1, 2)".parse().unwrap();
        assert!(extra.resolve(q4, uni).is_err());
    }
}
