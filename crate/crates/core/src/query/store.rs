//! In-memory typed table and the local conjunctive filter.

use std::io::Read;
use std::path::Path;

use super::{QueryConstraint, QueryError, QueryOp, QueryResultSet, DEFAULT_ROW_CAP};
use crate::value::{ColumnType, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableStore {
    pub columns: Vec<(String, ColumnType)>,
    pub rows: Vec<Vec<Value>>,
}

impl TableStore {
    pub fn new(columns: Vec<(String, ColumnType)>, rows: Vec<Vec<Value>>) -> Result<Self, QueryError> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(QueryError::Dataset(format!("row {} has {} cells, expected {}", i + 1, row.len(), columns.len())));
            }
            for (v, (name, ty)) in row.iter().zip(&columns) {
                if v.column_type() != *ty {
                    return Err(QueryError::Dataset(format!("row {}: `{name}` is not {}", i + 1, ty.name())));
                }
            }
        }
        Ok(TableStore { columns, rows })
    }

    /// Read a comma-separated file whose header cells are `name:type`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, QueryError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let bad = |e: csv::Error| QueryError::Dataset(e.to_string());
        let mut columns = Vec::new();
        for cell in rdr.headers().map_err(bad)? {
            let (name, ty) = cell.split_once(':').unwrap_or((cell, "text"));
            let ty = ColumnType::parse(ty).ok_or_else(|| QueryError::Dataset(format!("unknown column type in `{cell}`")))?;
            columns.push((name.to_string(), ty));
        }
        let mut rows = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record.map_err(bad)?;
            let mut row = Vec::with_capacity(columns.len());
            for (raw, (name, ty)) in record.iter().zip(&columns) {
                row.push(
                    ty.parse_cell(raw)
                        .ok_or_else(|| QueryError::Dataset(format!("row {}: bad {} `{raw}` in `{name}`", i + 1, ty.name())))?,
                );
            }
            rows.push(row);
        }
        TableStore::new(columns, rows)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, QueryError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| QueryError::Dataset(format!("{}: {e}", path.display())))?;
        Self::from_csv(file)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|(n, t)| format!("{n}:{}", t.name())))
            .expect("write to memory");
        for row in &self.rows {
            w.write_record(row.iter().map(Value::to_cell)).expect("write to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 cells")
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|(n, _)| n == name)
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Rows satisfying every constraint, in store order.
    pub fn matching(&self, constraints: &[QueryConstraint]) -> Result<Vec<&Vec<Value>>, QueryError> {
        let mut compiled = Vec::with_capacity(constraints.len());
        for c in constraints {
            let idx = self
                .column_index(&c.column)
                .ok_or_else(|| QueryError::UnknownColumn(c.column.clone()))?;
            if matches!(c.op, QueryOp::WithinWindow(_)) && self.columns[idx].1 != ColumnType::Time {
                return Err(QueryError::UnknownColumn(format!("{} is not a time column", c.column)));
            }
            compiled.push((idx, c));
        }
        Ok(self
            .rows
            .iter()
            .filter(|row| compiled.iter().all(|(i, c)| c.accepts(&row[*i])))
            .collect())
    }
}

pub fn exec_local(store: &TableStore, constraints: &[QueryConstraint]) -> Result<QueryResultSet, QueryError> {
    exec_local_capped(store, constraints, DEFAULT_ROW_CAP)
}

pub fn exec_local_capped(
    store: &TableStore,
    constraints: &[QueryConstraint],
    cap: usize,
) -> Result<QueryResultSet, QueryError> {
    let hits = store.matching(constraints)?;
    let count = hits.len();
    Ok(QueryResultSet {
        columns: store.column_names(),
        count,
        rows: hits.into_iter().take(cap).cloned().collect(),
        truncated: count > cap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> TableStore {
        TableStore::from_csv(
            "fltNumber:number,arrCity:text,arrTime:time\n472,Dallas,10:30\n118,Dallas,13:00\n640,Newark,10:40\n".as_bytes(),
        )
        .unwrap()
    }

    #[test]
    fn csv_roundtrip() {
        let s = store();
        assert_eq!(s.rows[0][2], Value::Time(630));
        assert_eq!(TableStore::from_csv(s.to_csv().as_bytes()).unwrap(), s);
    }

    #[test]
    fn filters_conjunctively() {
        let s = store();
        let c = vec![
            QueryConstraint::eq("arrCity", Value::text("dallas")),
            QueryConstraint::within("arrTime", 630, 120),
        ];
        let r = exec_local(&s, &c).unwrap();
        assert_eq!(r.count, 1);
        assert_eq!(r.rows[0][0], Value::Number(472));
        let none = vec![
            QueryConstraint::eq("arrCity", Value::text("Dallas")),
            QueryConstraint::eq("arrCity", Value::text("Newark")),
        ];
        assert_eq!(exec_local(&s, &none).unwrap().count, 0);
    }

    #[test]
    fn cap_keeps_exact_count() {
        let r = exec_local_capped(&store(), &[], 2).unwrap();
        assert_eq!((r.count, r.rows.len(), r.truncated), (3, 2, true));
    }

    #[test]
    fn unknown_column_is_an_error() {
        let c = vec![QueryConstraint::eq("gate", Value::text("A1"))];
        assert!(matches!(exec_local(&store(), &c), Err(QueryError::UnknownColumn(_))));
    }
}
