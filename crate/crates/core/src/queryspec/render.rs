//! Placeholder scanning and per-dialect literal encoding.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::params::{ParamSet, ParamValue};
use super::TemplateError;

/// Sub-field of a compound parameter value (`:p.start`, `:pair.from`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    Start,
    End,
    From,
    To,
}

impl Component {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "start" => Some(Component::Start),
            "end" => Some(Component::End),
            "from" => Some(Component::From),
            "to" => Some(Component::To),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Component::Start => "start",
            Component::End => "end",
            Component::From => "from",
            Component::To => "to",
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Placeholder {
    pub name: String,
    pub component: Option<Component>,
    /// Byte range of the whole token, including the colon and suffix.
    pub span: std::ops::Range<usize>,
}

fn is_name_start(b: u8) -> bool {
    b.is_ascii_lowercase() || b == b'_'
}

fn is_name_char(b: u8) -> bool {
    b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_'
}

/// Finds `:name` placeholders outside single-quoted literals. `::` casts and
/// colons glued to a preceding identifier or digit are not placeholders.
pub fn scan_placeholders(text: &str) -> Vec<Placeholder> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut in_quote = false;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b == b'\'' {
            in_quote = !in_quote;
            i += 1;
            continue;
        }
        if in_quote || b != b':' {
            i += 1;
            continue;
        }
        let prev = if i > 0 { bytes[i - 1] } else { b' ' };
        if prev == b':' || prev.is_ascii_alphanumeric() || prev == b'_' {
            i += 1;
            continue;
        }
        if i + 1 >= bytes.len() || !is_name_start(bytes[i + 1]) {
            i += 1;
            continue;
        }
        let start = i;
        let mut end = i + 1;
        while end < bytes.len() && is_name_char(bytes[end]) {
            end += 1;
        }
        let name = text[start + 1..end].to_string();
        let mut component = None;
        if end < bytes.len() && bytes[end] == b'.' {
            let mut c_end = end + 1;
            while c_end < bytes.len() && bytes[c_end].is_ascii_lowercase() {
                c_end += 1;
            }
            if let Some(c) = Component::parse(&text[end + 1..c_end]) {
                component = Some(c);
                end = c_end;
            }
        }
        out.push(Placeholder { name, component, span: start..end });
        i = end;
    }
    out
}

/// How a dialect writes a period literal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeriodStyle {
    /// `'ts1' AND 'ts2'`, for `BETWEEN :p`.
    #[default]
    Between,
    /// `'[ts1, ts2)'`, a closed-open range literal.
    Range,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialectEncoding {
    #[serde(default)]
    pub period: PeriodStyle,
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

fn number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Literal text for one parameter value under a dialect.
pub fn encode_value(
    value: &ParamValue,
    component: Option<Component>,
    encoding: &DialectEncoding,
) -> Result<String, String> {
    Ok(match (value, component) {
        (ParamValue::Period(p), None) => match encoding.period {
            PeriodStyle::Between => format!("{} AND {}", quote(&p.start.to_iso()), quote(&p.end.to_iso())),
            PeriodStyle::Range => quote(&format!("[{}, {})", p.start.to_iso(), p.end.to_iso())),
        },
        (ParamValue::Period(p), Some(Component::Start)) => quote(&p.start.to_iso()),
        (ParamValue::Period(p), Some(Component::End)) => quote(&p.end.to_iso()),
        (ParamValue::Name(s), None) => quote(s),
        (ParamValue::Point(p), None) => quote(&p.to_wkt()),
        (ParamValue::Meters(m), None) => number(*m),
        (ParamValue::Hour(h), None) => h.to_string(),
        (ParamValue::Count(c), None) => c.to_string(),
        (ParamValue::Pair(a, b), None) => format!("{}, {}", quote(a), quote(b)),
        (ParamValue::Pair(a, _), Some(Component::From)) => quote(a),
        (ParamValue::Pair(_, b), Some(Component::To)) => quote(b),
        (v, Some(c)) => return Err(format!("component `.{c}` does not apply to {}", v.type_name())),
    })
}

/// Substitutes every placeholder of `text` with the encoded value from `params`.
pub fn substitute(
    template: &str,
    text: &str,
    params: &ParamSet,
    encoding: &DialectEncoding,
) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(text.len() + 64);
    let mut cursor = 0;
    for ph in scan_placeholders(text) {
        out.push_str(&text[cursor..ph.span.start]);
        let value = params.values.get(&ph.name).ok_or_else(|| TemplateError::MissingValue {
            template: template.to_string(),
            param: ph.name.clone(),
        })?;
        let literal = encode_value(value, ph.component, encoding).map_err(|message| TemplateError::Invalid {
            template: template.to_string(),
            message,
        })?;
        out.push_str(&literal);
        cursor = ph.span.end;
    }
    out.push_str(&text[cursor..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GeoPoint, Period, TimeInstant};

    fn names(text: &str) -> Vec<(String, Option<Component>)> {
        scan_placeholders(text).into_iter().map(|p| (p.name, p.component)).collect()
    }

    #[test]
    fn scanning_rules() {
        assert_eq!(names("SELECT COUNT(*), :period_medium FROM x"), vec![("period_medium".into(), None)]);
        assert_eq!(names("WHERE t::timestamp > :p.start"), vec![("p".into(), Some(Component::Start))]);
        assert_eq!(names("x = '10:30' AND y = ':not_me'"), vec![]);
        assert_eq!(names("a:b 12:30 :ok"), vec![("ok".into(), None)]);
        assert_eq!(names("f(:a,:b)"), vec![("a".into(), None), ("b".into(), None)]);
        assert_eq!(names(":pair.from :pair.to :pair.other"), vec![
            ("pair".into(), Some(Component::From)),
            ("pair".into(), Some(Component::To)),
            ("pair".into(), None),
        ]);
    }

    #[test]
    fn encodes_period_for_between_and_range_dialects() {
        let p = Period::new(
            TimeInstant::from_ymd_hms(2025, 11, 10, 10, 0, 0),
            TimeInstant::from_ymd_hms(2025, 11, 11, 10, 0, 0),
        )
        .unwrap();
        let v = ParamValue::Period(p);
        assert_eq!(
            encode_value(&v, None, &DialectEncoding::default()).unwrap(),
            "'2025-11-10T10:00:00.000000Z' AND '2025-11-11T10:00:00.000000Z'"
        );
        assert_eq!(
            encode_value(&v, None, &DialectEncoding { period: PeriodStyle::Range }).unwrap(),
            "'[2025-11-10T10:00:00.000000Z, 2025-11-11T10:00:00.000000Z)'"
        );
        assert_eq!(
            encode_value(&v, Some(Component::End), &DialectEncoding::default()).unwrap(),
            "'2025-11-11T10:00:00.000000Z'"
        );
    }

    #[test]
    fn encodes_scalars() {
        let enc = DialectEncoding::default();
        assert_eq!(encode_value(&ParamValue::Name("Mitte".into()), None, &enc).unwrap(), "'Mitte'");
        assert_eq!(encode_value(&ParamValue::Name("O'Brien".into()), None, &enc).unwrap(), "'O''Brien'");
        assert_eq!(encode_value(&ParamValue::Meters(250.0), None, &enc).unwrap(), "250");
        assert_eq!(encode_value(&ParamValue::Meters(12.5), None, &enc).unwrap(), "12.5");
        assert_eq!(
            encode_value(&ParamValue::Point(GeoPoint::lonlat(13.4, 52.5)), None, &enc).unwrap(),
            "'POINT(13.4 52.5)'"
        );
        assert_eq!(
            encode_value(&ParamValue::Pair("Piraeus".into(), "Hydra".into()), Some(Component::To), &enc).unwrap(),
            "'Hydra'"
        );
        assert!(encode_value(&ParamValue::Hour(3), Some(Component::Start), &enc).is_err());
    }
}
