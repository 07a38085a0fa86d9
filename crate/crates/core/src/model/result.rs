use std::cmp::Ordering;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::TimeInstant;

/// Relative tolerance used when comparing float cells of normalized results.
pub const FLOAT_REL_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Null,
    Int(i64),
    Float(f64),
    Text(String),
    Timestamp(TimeInstant),
}

impl Value {
    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Float(v) => Some(*v),
            _ => None,
        }
    }

    /// Canonical text rendering: timestamps as ISO-8601 UTC, floats in shortest
    /// round-trip form.
    pub fn render(&self) -> String {
        match self {
            Value::Null => "NULL".to_string(),
            Value::Int(v) => v.to_string(),
            Value::Float(v) => v.to_string(),
            Value::Text(s) => s.clone(),
            Value::Timestamp(t) => t.to_iso(),
        }
    }

    fn canonical(&self) -> Value {
        match self {
            Value::Timestamp(t) => Value::Text(t.to_iso()),
            Value::Text(s) if looks_like_timestamp(s) => match TimeInstant::parse_iso(s) {
                Ok(t) => Value::Text(t.to_iso()),
                Err(_) => self.clone(),
            },
            Value::Float(f) if *f == 0.0 => Value::Float(0.0),
            other => other.clone(),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Null => 0,
            Value::Int(_) | Value::Float(_) => 1,
            Value::Text(_) | Value::Timestamp(_) => 2,
        }
    }

    fn total_cmp(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (a, b) if a.rank() == 1 && b.rank() == 1 => {
                a.as_f64().unwrap().total_cmp(&b.as_f64().unwrap())
            }
            (a, b) if a.rank() == 2 && b.rank() == 2 => a.render().cmp(&b.render()),
            (a, b) => a.rank().cmp(&b.rank()),
        }
    }

    /// Semantic equality: numbers compare with relative tolerance, integers
    /// exactly, timestamps by canonical text.
    pub fn approx_eq(&self, other: &Value) -> bool {
        self.approx_eq_within(other, FLOAT_REL_TOLERANCE)
    }

    pub fn approx_eq_within(&self, other: &Value, rel_tol: f64) -> bool {
        match (self, other) {
            (Value::Null, Value::Null) => true,
            (Value::Int(a), Value::Int(b)) => a == b,
            (a, b) if a.rank() == 1 && b.rank() == 1 => {
                let (x, y) = (a.as_f64().unwrap(), b.as_f64().unwrap());
                x == y || (x - y).abs() <= rel_tol * x.abs().max(y.abs())
            }
            (a, b) if a.rank() == 2 && b.rank() == 2 => {
                a.canonical().render() == b.canonical().render()
            }
            _ => false,
        }
    }
}

fn looks_like_timestamp(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() >= 19
        && b[..4].iter().all(u8::is_ascii_digit)
        && b[4] == b'-'
        && b[7] == b'-'
        && (b[10] == b'T' || b[10] == b' ')
        && b[13] == b':'
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Null => serializer.serialize_none(),
            Value::Int(v) => serializer.serialize_i64(*v),
            Value::Float(v) => serializer.serialize_f64(*v),
            Value::Text(s) => serializer.serialize_str(s),
            Value::Timestamp(t) => serializer.serialize_str(&t.to_iso()),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = serde_json::Value::deserialize(deserializer)?;
        Ok(match raw {
            serde_json::Value::Null => Value::Null,
            serde_json::Value::Bool(b) => Value::Int(b as i64),
            serde_json::Value::Number(n) => match n.as_i64() {
                Some(i) => Value::Int(i),
                None => Value::Float(n.as_f64().unwrap_or(f64::NAN)),
            },
            serde_json::Value::String(s) => Value::Text(s),
            other => Value::Text(other.to_string()),
        })
    }
}

/// Tabular query result.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl ResultSet {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn single(column: &str, value: Value) -> Self {
        let mut rs = Self::new(&[column]);
        rs.rows.push(vec![value]);
        rs
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Canonical form for cross-adapter comparison: timestamps rendered as
    /// ISO-8601 UTC, rows sorted lexicographically, column order preserved.
    pub fn normalize(&self) -> ResultSet {
        let mut rows: Vec<Vec<Value>> = self
            .rows
            .iter()
            .map(|row| row.iter().map(Value::canonical).collect())
            .collect();
        rows.sort_by(|a, b| compare_rows(a, b));
        ResultSet { columns: self.columns.clone(), rows }
    }

    /// Whether two results are semantically equal after normalization.
    /// Column names are not compared; arity and cell values are.
    pub fn equivalent(&self, other: &ResultSet) -> bool {
        self.equivalent_within(other, FLOAT_REL_TOLERANCE)
    }

    pub fn equivalent_within(&self, other: &ResultSet, rel_tol: f64) -> bool {
        let (a, b) = (self.normalize(), other.normalize());
        a.rows.len() == b.rows.len()
            && a.rows.iter().zip(&b.rows).all(|(ra, rb)| {
                ra.len() == rb.len() && ra.iter().zip(rb).all(|(x, y)| x.approx_eq_within(y, rel_tol))
            })
    }
}

fn compare_rows(a: &[Value], b: &[Value]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_sorts_rows() {
        let rs = ResultSet {
            columns: vec!["n".into()],
            rows: vec![vec![Value::Int(2)], vec![Value::Int(1)]],
        };
        assert_eq!(rs.normalize().rows, vec![vec![Value::Int(1)], vec![Value::Int(2)]]);
        assert_eq!(ResultSet::default().normalize(), ResultSet::default());
    }

    #[test]
    fn close_floats_compare_equal() {
        let a = ResultSet::single("avg", Value::Float(1.0000001));
        let b = ResultSet::single("avg", Value::Float(1.0000002));
        assert!(a.equivalent(&b));
        let c = ResultSet::single("avg", Value::Float(1.001));
        assert!(!a.equivalent(&c));
        assert!(ResultSet::single("n", Value::Int(300)).equivalent(&ResultSet::single("x", Value::Float(300.0))));
    }

    #[test]
    fn timestamps_compare_with_equivalent_text() {
        let t = TimeInstant::from_ymd_hms(2025, 11, 10, 10, 0, 0);
        let a = ResultSet::single("h", Value::Timestamp(t));
        let b = ResultSet::single("h", Value::Text("2025-11-10 11:00:00+01:00".into()));
        assert!(a.equivalent(&b));
    }

    #[test]
    fn order_and_off_by_one() {
        let a = ResultSet {
            columns: vec!["id".into()],
            rows: vec![vec![Value::Int(3)], vec![Value::Int(1)], vec![Value::Int(2)]],
        };
        let mut b = a.clone();
        b.rows.reverse();
        assert!(a.equivalent(&b));
        b.rows[0][0] = Value::Int(4);
        assert!(!a.equivalent(&b));
    }

    fn arb_value() -> impl Strategy<Value = Value> {
        prop_oneof![
            Just(Value::Null),
            any::<i64>().prop_map(Value::Int),
            (-1e9f64..1e9).prop_map(Value::Float),
            "[a-z]{0,6}".prop_map(Value::Text),
            (0i64..4_000_000_000_000_000).prop_map(|m| Value::Timestamp(TimeInstant::from_micros(m))),
        ]
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(rows in prop::collection::vec(prop::collection::vec(arb_value(), 2), 0..20)) {
            let rs = ResultSet { columns: vec!["a".into(), "b".into()], rows };
            let once = rs.normalize();
            prop_assert_eq!(once.normalize(), once.clone());
            prop_assert!(rs.equivalent(&once));
        }
    }
}
