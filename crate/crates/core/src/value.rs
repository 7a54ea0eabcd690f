use std::fmt;

use serde::{Deserialize, Serialize};

/// A typed field or cell value.
///
/// Times are minutes after midnight. Text compares case-insensitively
/// through [`Value::same_as`]; the derived `PartialEq` stays exact so that
/// packs and rows have plain value equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum Value {
    Text(String),
    Number(i64),
    Time(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Text,
    Number,
    Time,
}

impl ColumnType {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "text" => Some(ColumnType::Text),
            "number" => Some(ColumnType::Number),
            "time" | "minutes" => Some(ColumnType::Time),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ColumnType::Text => "text",
            ColumnType::Number => "number",
            ColumnType::Time => "time",
        }
    }

    /// Parse a cell as written in dataset files and result pages.
    pub fn parse_cell(self, raw: &str) -> Option<Value> {
        let raw = raw.trim();
        match self {
            ColumnType::Text => Some(Value::Text(raw.to_string())),
            ColumnType::Number => raw.parse().ok().map(Value::Number),
            ColumnType::Time => parse_clock(raw).map(Value::Time),
        }
    }
}

impl Value {
    pub fn text(s: impl Into<String>) -> Self {
        Value::Text(s.into())
    }

    /// Equality used by the dialogue layer: text is case-insensitive.
    pub fn same_as(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Text(a), Value::Text(b)) => a.eq_ignore_ascii_case(b),
            _ => self == other,
        }
    }

    pub fn as_minutes(&self) -> Option<u32> {
        match self {
            Value::Time(m) => Some(*m),
            _ => None,
        }
    }

    pub fn column_type(&self) -> ColumnType {
        match self {
            Value::Text(_) => ColumnType::Text,
            Value::Number(_) => ColumnType::Number,
            Value::Time(_) => ColumnType::Time,
        }
    }

    /// Form used in dataset files and on result pages.
    pub fn to_cell(&self) -> String {
        self.to_string()
    }

    /// Form used when speaking to the user.
    pub fn spoken(&self) -> String {
        match self {
            Value::Time(m) => spoken_clock(*m),
            other => other.to_string(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Text(s) => f.write_str(s),
            Value::Number(n) => write!(f, "{n}"),
            Value::Time(m) => write!(f, "{:02}:{:02}", m / 60, m % 60),
        }
    }
}

/// Parse `HH:MM` (24-hour).
pub fn parse_clock(s: &str) -> Option<u32> {
    let (h, m) = s.split_once(':')?;
    let h: u32 = h.parse().ok()?;
    let m: u32 = m.parse().ok()?;
    (h < 24 && m < 60).then_some(h * 60 + m)
}

/// `630` becomes `10:30 AM`.
pub fn spoken_clock(minutes: u32) -> String {
    let h = (minutes / 60) % 24;
    let m = minutes % 60;
    let (h12, half) = match h {
        0 => (12, "AM"),
        1..=11 => (h, "AM"),
        12 => (12, "PM"),
        _ => (h - 12, "PM"),
    };
    format!("{h12}:{m:02} {half}")
}
