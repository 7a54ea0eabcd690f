//! Choosing the question that best narrows a large match set.

use std::collections::HashMap;

use crate::value::Value;

fn bucket(v: &Value) -> (u8, String) {
    match v {
        Value::Text(s) => (0, s.to_lowercase()),
        Value::Number(n) => (1, n.to_string()),
        Value::Time(m) => (2, m.to_string()),
    }
}

/// Σ count_v² for the values in one column.
pub fn sum_sq_counts<'a>(values: impl Iterator<Item = &'a Value>) -> u64 {
    let mut counts: HashMap<(u8, String), u64> = HashMap::new();
    for v in values {
        *counts.entry(bucket(v)).or_default() += 1;
    }
    counts.values().map(|c| c * c).sum()
}

/// Expected number of rows left after learning this column's value:
/// E(f) = Σ count_v² / N.
pub fn expected_residual<'a>(values: impl Iterator<Item = &'a Value> + Clone) -> f64 {
    let n = values.clone().count();
    if n == 0 {
        return 0.0;
    }
    sum_sq_counts(values) as f64 / n as f64
}

/// The candidate minimizing E(f), earliest candidate on ties.
///
/// `candidates` pairs a field name with its column index in `rows` and
/// must be in schema order. N is the same for every candidate, so the
/// comparison uses the exact integer numerator.
pub fn select_informative_field(rows: &[Vec<Value>], candidates: &[(String, usize)]) -> Option<String> {
    let mut best: Option<(u64, &String)> = None;
    for (name, col) in candidates {
        let score = sum_sq_counts(rows.iter().map(|r| &r[*col]));
        if best.is_none_or(|(b, _)| score < b) {
            best = Some((score, name));
        }
    }
    best.map(|(_, n)| n.clone())
}
