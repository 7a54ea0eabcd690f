//! The bundled flight demonstration: dataset generator and mock airline
//! site.

pub mod mock;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::query::{QueryError, TableStore};
use crate::value::{ColumnType, Value};

pub const CITIES: [&str; 20] = [
    "Atlanta",
    "Boston",
    "Charlotte",
    "Chicago",
    "Dallas",
    "Denver",
    "Detroit",
    "Dulles",
    "Houston",
    "Las Vegas",
    "Los Angeles",
    "Miami",
    "Minneapolis",
    "Newark",
    "New York",
    "Orlando",
    "Philadelphia",
    "Phoenix",
    "San Francisco",
    "Seattle",
];

pub const STATUSES: [&str; 3] = ["on time", "delayed", "landed"];

/// Below this many rows the planted clusters are not added.
pub const PLANT_MIN_ROWS: usize = 16;

pub const COLUMNS: [(&str, ColumnType); 7] = [
    ("fltNumber", ColumnType::Number),
    ("depCity", ColumnType::Text),
    ("arrCity", ColumnType::Text),
    ("depTime", ColumnType::Time),
    ("arrTime", ColumnType::Time),
    ("gate", ColumnType::Text),
    ("status", ColumnType::Text),
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlightRow {
    pub flight_number: u16,
    pub departure_city: String,
    pub arrival_city: String,
    pub departure_time: u32,
    pub arrival_time: u32,
    pub gate: String,
    pub status: String,
}

impl FlightRow {
    pub fn to_values(&self) -> Vec<Value> {
        vec![
            Value::Number(i64::from(self.flight_number)),
            Value::text(&self.departure_city),
            Value::text(&self.arrival_city),
            Value::Time(self.departure_time),
            Value::Time(self.arrival_time),
            Value::text(&self.gate),
            Value::text(&self.status),
        ]
    }

    pub fn from_values(row: &[Value]) -> Option<Self> {
        match row {
            [Value::Number(n), Value::Text(dc), Value::Text(ac), Value::Time(dt), Value::Time(at), Value::Text(g), Value::Text(s)] => {
                Some(FlightRow {
                    flight_number: u16::try_from(*n).ok()?,
                    departure_city: dc.clone(),
                    arrival_city: ac.clone(),
                    departure_time: *dt,
                    arrival_time: *at,
                    gate: g.clone(),
                    status: s.clone(),
                })
            }
            _ => None,
        }
    }
}

pub fn to_store(rows: &[FlightRow]) -> TableStore {
    TableStore {
        columns: COLUMNS.iter().map(|(n, t)| (n.to_string(), *t)).collect(),
        rows: rows.iter().map(FlightRow::to_values).collect(),
    }
}

pub fn from_store(store: &TableStore) -> Result<Vec<FlightRow>, QueryError> {
    let expected: Vec<(String, ColumnType)> = COLUMNS.iter().map(|(n, t)| (n.to_string(), *t)).collect();
    if store.columns != expected {
        return Err(QueryError::Dataset("not a flight table".into()));
    }
    store
        .rows
        .iter()
        .map(|r| FlightRow::from_values(r).ok_or_else(|| QueryError::Dataset("bad flight row".into())))
        .collect()
}

/// The 32-bit linear congruential generator the dataset is defined by.
#[derive(Debug, Clone)]
pub struct Lcg(u32);

impl Lcg {
    pub fn new(seed: u32) -> Self {
        Lcg(seed)
    }

    pub fn next_u32(&mut self) -> u32 {
        self.0 = self.0.wrapping_mul(1_664_525).wrapping_add(1_013_904_223);
        self.0
    }

    /// Uniform-ish draw in `0..m` from the high 16 bits; the low bits of
    /// a power-of-two LCG have short periods.
    pub fn below(&mut self, m: u32) -> u32 {
        (self.next_u32() >> 16) % m
    }
}

fn clock(h: u32, m: u32) -> u32 {
    h * 60 + m
}

struct Gen {
    lcg: Lcg,
    used: HashSet<u16>,
}

impl Gen {
    fn flight_number(&mut self) -> u16 {
        loop {
            let n = 100 + self.lcg.below(900) as u16;
            if self.used.insert(n) {
                return n;
            }
        }
    }

    fn gate(&mut self) -> String {
        let letter = (b'A' + self.lcg.below(5) as u8) as char;
        format!("{letter}{}", 1 + self.lcg.below(40))
    }

    fn status(&mut self) -> String {
        STATUSES[self.lcg.below(3) as usize].to_string()
    }

    fn duration(&mut self) -> u32 {
        60 + 5 * self.lcg.below(61)
    }

    fn planted(&mut self, number: Option<u16>, from: &str, to: &str, dep: u32, arr: Option<u32>) -> FlightRow {
        let flight_number = match number {
            Some(n) => {
                self.used.insert(n);
                n
            }
            None => self.flight_number(),
        };
        let arrival_time = arr.unwrap_or_else(|| (dep + self.duration()) % 1440);
        FlightRow {
            flight_number,
            departure_city: from.to_string(),
            arrival_city: to.to_string(),
            departure_time: dep,
            arrival_time,
            gate: self.gate(),
            status: self.status(),
        }
    }
}

/// City pairs reserved for the planted clusters.
pub const RESERVED_PAIRS: [(&str, &str); 3] = [("Boston", "Chicago"), ("Newark", "Dallas"), ("Miami", "Houston")];

/// Generate `n` flights deterministically from `seed`.
///
/// With at least [`PLANT_MIN_ROWS`] rows the table starts with fourteen
/// planted flights: eight Boston to Chicago leaving 08:00 to 09:35, three
/// Newark to Dallas (one of them flight 472, arriving 10:30), two Miami to
/// Houston arriving 14:00 and 14:30, and one Dulles to Boston. Random rows
/// never use a reserved city pair.
pub fn generate_dataset(seed: u32, n: usize) -> Vec<FlightRow> {
    let mut g = Gen {
        lcg: Lcg::new(seed),
        used: HashSet::new(),
    };
    let mut rows = Vec::with_capacity(n);
    if n >= PLANT_MIN_ROWS {
        // Reserve 472 before any random draw can take it.
        g.used.insert(472);
        for dep in [clock(8, 0), clock(8, 15), clock(8, 25), clock(8, 40), clock(8, 50), clock(9, 5), clock(9, 20), clock(9, 35)] {
            let r = g.planted(None, "Boston", "Chicago", dep, None);
            rows.push(r);
        }
        let r = g.planted(None, "Newark", "Dallas", clock(6, 55), Some(clock(9, 45)));
        rows.push(r);
        let r = g.planted(Some(472), "Newark", "Dallas", clock(7, 40), Some(clock(10, 30)));
        rows.push(r);
        let r = g.planted(None, "Newark", "Dallas", clock(8, 50), Some(clock(11, 40)));
        rows.push(r);
        let r = g.planted(None, "Miami", "Houston", clock(12, 10), Some(clock(14, 0)));
        rows.push(r);
        let r = g.planted(None, "Miami", "Houston", clock(12, 40), Some(clock(14, 30)));
        rows.push(r);
        let r = g.planted(None, "Dulles", "Boston", clock(17, 5), Some(clock(18, 25)));
        rows.push(r);
    }
    while rows.len() < n {
        let from_idx = g.lcg.below(20) as usize;
        let mut to_idx = g.lcg.below(19) as usize;
        // Skip the departure city among the 19 remaining choices.
        if to_idx >= from_idx {
            to_idx += 1;
        }
        let from = CITIES[from_idx];
        let to = CITIES[to_idx];
        if RESERVED_PAIRS.contains(&(from, to)) {
            continue;
        }
        let dep = 300 + 5 * g.lcg.below(228);
        let r = g.planted(None, from, to, dep, None);
        rows.push(r);
    }
    rows
}

/// Result of checking one documented dataset guarantee.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guarantee {
    pub clause: &'static str,
    pub holds: bool,
}

/// Evaluate the dataset guarantees for few/many threshold `k`.
pub fn check_guarantees(rows: &[FlightRow], k: usize) -> Vec<Guarantee> {
    let mut numbers = HashSet::new();
    let unique = rows.iter().all(|r| numbers.insert(r.flight_number));
    let well_formed = rows.iter().all(|r| {
        r.departure_city != r.arrival_city
            && r.departure_time % 5 == 0
            && r.arrival_time % 5 == 0
            && r.departure_time < 1440
            && r.arrival_time < 1440
            && (100..=999).contains(&r.flight_number)
    });
    // Largest number of same-pair departures inside any closed 2-hour window.
    let mut best_window = std::collections::HashMap::new();
    for a in rows {
        let n = rows
            .iter()
            .filter(|b| {
                b.departure_city == a.departure_city
                    && b.arrival_city == a.arrival_city
                    && b.departure_time >= a.departure_time
                    && b.departure_time <= a.departure_time + 120
            })
            .count();
        let e = best_window.entry((a.departure_city.clone(), a.arrival_city.clone())).or_insert(0);
        *e = n.max(*e);
    }
    let has = |city: &str| rows.iter().any(|r| r.departure_city == city || r.arrival_city == city);
    vec![
        Guarantee { clause: "unique flight numbers", holds: unique },
        Guarantee { clause: "distinct cities, 5-minute grid, 3-digit numbers", holds: well_formed },
        Guarantee { clause: "a city pair with more than K flights in 2 hours", holds: best_window.values().any(|n| *n > k) },
        Guarantee { clause: "a city pair with 2 to K flights in 2 hours", holds: best_window.values().any(|n| (2..=k).contains(n)) },
        Guarantee { clause: "Dallas and Dulles both appear", holds: has("Dallas") && has("Dulles") },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lcg_first_values() {
        let mut l = Lcg::new(0);
        assert_eq!(l.next_u32(), 1_013_904_223);
        assert_eq!(l.next_u32(), 1_196_435_762);
    }

    #[test]
    fn deterministic_and_sized() {
        assert_eq!(generate_dataset(7, 200), generate_dataset(7, 200));
        assert_eq!(generate_dataset(7, 200).len(), 200);
        assert_ne!(generate_dataset(7, 200), generate_dataset(8, 200));
        let one = generate_dataset(7, 1);
        assert_eq!(one.len(), 1);
        assert!(check_guarantees(&one, 5)[..2].iter().all(|g| g.holds));
    }

    #[test]
    fn guarantees_hold() {
        for g in check_guarantees(&generate_dataset(7, 200), 5) {
            assert!(g.holds, "{}", g.clause);
        }
    }

    #[test]
    fn store_roundtrip() {
        let rows = generate_dataset(3, 40);
        assert_eq!(from_store(&to_store(&rows)).unwrap(), rows);
    }
}
