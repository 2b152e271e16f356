//! Observable scenario events and the patterns that match them.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::meadow::Rational;

/// A scenario event: a kind plus string-valued fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Event {
    pub kind: String,
    pub fields: BTreeMap<String, String>,
}

impl Event {
    pub fn new(kind: impl Into<String>) -> Event {
        Event {
            kind: kind.into(),
            fields: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Into<String>) -> Event {
        self.fields.insert(key.into(), value.into());
        self
    }

    pub fn field(&self, key: &str) -> Option<&str> {
        self.fields.get(key).map(String::as_str)
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        write_fields(f, &self.fields)
    }
}

fn write_fields(f: &mut fmt::Formatter<'_>, fields: &BTreeMap<String, String>) -> fmt::Result {
    if fields.is_empty() {
        return Ok(());
    }
    write!(f, "{{")?;
    for (i, (k, v)) in fields.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{k}={v}")?;
    }
    write!(f, "}}")
}

/// Event-kind match plus optional field equalities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventPattern {
    pub kind: String,
    pub fields: BTreeMap<String, String>,
}

impl EventPattern {
    pub fn new(kind: impl Into<String>) -> EventPattern {
        EventPattern {
            kind: kind.into(),
            fields: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Into<String>) -> EventPattern {
        self.fields.insert(key.into(), value.into());
        self
    }

    pub fn matches(&self, event: &Event) -> bool {
        self.kind == event.kind
            && self
                .fields
                .iter()
                .all(|(k, v)| event.field(k).is_some_and(|actual| values_equal(v, actual)))
    }
}

impl fmt::Display for EventPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        write_fields(f, &self.fields)
    }
}

/// Field values compare as rationals when both parse as one (`10/2 == 5`),
/// otherwise as strings.
pub fn values_equal(a: &str, b: &str) -> bool {
    match (a.parse::<Rational>(), b.parse::<Rational>()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_matching() {
        let e = Event::new("transfer").with("amount", "10/2").with("to", "b");
        assert!(EventPattern::new("transfer").matches(&e));
        assert!(EventPattern::new("transfer").with("amount", "5").matches(&e));
        assert!(!EventPattern::new("transfer").with("to", "c").matches(&e));
        assert!(!EventPattern::new("transfer").with("from", "a").matches(&e));
        assert!(!EventPattern::new("deploy").matches(&e));
        assert_eq!(e.to_string(), "transfer{amount=10/2, to=b}");
    }
}
