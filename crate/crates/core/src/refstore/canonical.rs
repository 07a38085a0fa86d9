//! Executes catalog entries against a store handle.

use super::{Anchor, StoreError, StoreHandle};
use crate::model::{FeatureKind, GeoPoint, Period, ResultSet, TripId, Value};
use crate::queryspec::catalog::SlotKind;
use crate::queryspec::{BoundArgs, CatalogEntry, Output, ParamValue, Primitive};

struct Args<'a> {
    entry: &'a CatalogEntry,
    args: &'a BoundArgs,
}

impl<'a> Args<'a> {
    fn bad(&self, message: String) -> StoreError {
        StoreError::InvalidArgument(format!("{}: {message}", self.entry.id))
    }

    fn slot(&self, pred: impl Fn(SlotKind) -> bool) -> Option<(SlotKind, &'a ParamValue)> {
        self.entry
            .slots
            .iter()
            .find(|s| pred(s.kind))
            .and_then(|s| self.args.values.get(&s.name).map(|v| (s.kind, v)))
    }

    fn period(&self) -> Result<Option<Period>, StoreError> {
        match self.slot(|k| k == SlotKind::Period) {
            None => Ok(None),
            Some((_, ParamValue::Period(p))) => Ok(Some(*p)),
            Some((_, v)) => Err(self.bad(format!("expected a period, got {}", v.type_name()))),
        }
    }

    fn required_period(&self) -> Result<Period, StoreError> {
        self.period()?.ok_or_else(|| self.bad("missing period".into()))
    }

    fn radius(&self) -> Result<f64, StoreError> {
        match self.slot(|k| k == SlotKind::Radius) {
            Some((_, ParamValue::Meters(m))) => Ok(*m),
            Some((_, v)) => Err(self.bad(format!("expected meters, got {}", v.type_name()))),
            None => Err(self.bad("missing radius".into())),
        }
    }

    fn region(&self) -> Result<(FeatureKind, &'a str), StoreError> {
        match self.slot(|k| matches!(k, SlotKind::Region(_))) {
            Some((SlotKind::Region(kind), ParamValue::Name(n))) => Ok((kind, n.as_str())),
            Some((_, v)) => Err(self.bad(format!("expected a feature name, got {}", v.type_name()))),
            None => Err(self.bad("missing region".into())),
        }
    }

    fn anchor(&self) -> Result<Anchor, StoreError> {
        if let Some((_, ParamValue::Point(p))) = self.slot(|k| k == SlotKind::Point) {
            return Ok(Anchor::Point(*p));
        }
        let (kind, name) = self.region()?;
        Ok(Anchor::Feature(kind, name.to_string()))
    }

    fn point(&self) -> Result<GeoPoint, StoreError> {
        match self.slot(|k| k == SlotKind::Point) {
            Some((_, ParamValue::Point(p))) => Ok(*p),
            _ => Err(self.bad("missing point".into())),
        }
    }

    fn hour(&self) -> Result<u8, StoreError> {
        match self.slot(|k| k == SlotKind::Hour) {
            Some((_, ParamValue::Hour(h))) => Ok(*h),
            _ => Err(self.bad("missing hour".into())),
        }
    }

    fn count(&self) -> Result<u32, StoreError> {
        match self.slot(|k| k == SlotKind::Count) {
            Some((_, ParamValue::Count(c))) => Ok(*c),
            _ => Err(self.bad("missing count".into())),
        }
    }

    fn pair(&self) -> Result<(Anchor, Anchor), StoreError> {
        match self.slot(|k| matches!(k, SlotKind::Pair(_))) {
            Some((SlotKind::Pair(kind), ParamValue::Pair(a, b))) => {
                Ok((Anchor::Feature(kind, a.clone()), Anchor::Feature(kind, b.clone())))
            }
            _ => Err(self.bad("missing feature pair".into())),
        }
    }
}

fn count_result(n: u64) -> ResultSet {
    ResultSet::single("count", Value::Int(n as i64))
}

fn mean_result(mean: Option<f64>) -> ResultSet {
    ResultSet::single("avg_duration_s", mean.map_or(Value::Null, Value::Float))
}

fn trip_result(output: Output, trips: Vec<TripId>) -> ResultSet {
    match output {
        Output::Count => count_result(trips.len() as u64),
        _ => {
            let mut rs = ResultSet::new(Output::TripIds.columns());
            rs.rows = trips.into_iter().map(|t| vec![Value::Int(t as i64)]).collect();
            rs
        }
    }
}

/// Runs one canonical query. The result columns follow the entry's output shape.
pub fn execute_canonical(h: &StoreHandle, entry: &CatalogEntry, args: &BoundArgs) -> Result<ResultSet, StoreError> {
    let a = Args { entry, args };
    let rs = match entry.primitive {
        Primitive::CountInstantsInPeriod => count_result(h.count_instants_in_period(&a.required_period()?)),
        Primitive::CountInstantsPerHour => {
            let mut rs = ResultSet::new(Output::HourlyCounts.columns());
            rs.rows = h
                .count_instants_per_hour(&a.required_period()?)
                .into_iter()
                .map(|(hour, n)| vec![Value::Timestamp(hour), Value::Int(n as i64)])
                .collect();
            rs
        }
        Primitive::DistinctActiveTrips => count_result(h.distinct_active_trips(&a.required_period()?)),
        Primitive::ActiveTripsAtHour => count_result(h.active_trips_at_hour(a.hour()?, &a.required_period()?)?),
        Primitive::TripsIntersectingRegion => {
            let (kind, name) = a.region()?;
            trip_result(entry.output, h.trips_intersecting_region(kind, name, a.period()?.as_ref())?)
        }
        Primitive::TripsWithinDistance => {
            trip_result(entry.output, h.trips_within_distance(&a.anchor()?, a.radius()?, a.period()?.as_ref())?)
        }
        Primitive::NearestTrip => {
            let mut rs = ResultSet::new(Output::Nearest.columns());
            if let Some((trip, d)) = h.nearest_trip(&a.point()?, a.radius()?)? {
                rs.rows.push(vec![Value::Int(trip as i64), Value::Float(d)]);
            }
            rs
        }
        Primitive::AvgTripDurationStartedInPeriod => {
            mean_result(h.avg_trip_duration_started_in_period(&a.required_period()?))
        }
        Primitive::AvgDurationTripsEndingNear => mean_result(h.avg_duration_trips_ending_near(&a.anchor()?, a.radius()?)?),
        Primitive::AvgDurationTripsStartedNearInPeriod => mean_result(h.avg_duration_trips_started_near_in_period(
            &a.anchor()?,
            a.radius()?,
            &a.required_period()?,
        )?),
        Primitive::TripsConnecting => {
            let (from, to) = a.pair()?;
            trip_result(entry.output, h.trips_connecting(&from, &to, a.radius()?)?)
        }
        Primitive::TripsCrossingMinRegions => {
            let kind = entry.region_kind.ok_or_else(|| a.bad("catalog entry lacks region_kind".into()))?;
            trip_result(entry.output, h.trips_crossing_min_regions(kind, a.count()?, &a.required_period()?)?)
        }
        Primitive::TerminalEventCount => {
            let (kind, name) = a.region()?;
            count_result(h.terminal_event_count(&Anchor::Feature(kind, name.to_string()), a.radius()?, &a.required_period()?)?)
        }
    };
    Ok(rs)
}
