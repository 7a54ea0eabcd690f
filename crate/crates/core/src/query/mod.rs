//! Query generation and execution against the local table store or a
//! web-form back-end.

pub mod cgi;
pub mod store;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cgi::{build_cgi_request, scrape_rows, CgiForm, CgiQuerier, CgiRequest, ScrapeSpec};
pub use store::{exec_local, exec_local_capped, TableStore};

use crate::dialog::context::DialogueContext;
use crate::schema::DomainPack;
use crate::value::Value;

pub const DEFAULT_ROW_CAP: usize = 50;
/// Half-width in minutes for "around ten thirty".
pub const BASE_WINDOW: u32 = 120;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("field `{0}` has no database mapping")]
    UnmappedField(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("no form accepts the bound fields")]
    NoFormSatisfiable,
    #[error("result page does not match the scrape spec: {0}")]
    ScrapeMismatch(String),
    #[error("back-end unavailable: {0}")]
    Unavailable(String),
    #[error("dataset: {0}")]
    Dataset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryOp {
    Eq,
    /// Accepts values within this many minutes of the constraint value.
    WithinWindow(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QueryConstraint {
    pub column: String,
    pub op: QueryOp,
    pub value: Value,
}

impl QueryConstraint {
    pub fn eq(column: &str, value: Value) -> Self {
        QueryConstraint {
            column: column.to_string(),
            op: QueryOp::Eq,
            value,
        }
    }

    pub fn within(column: &str, minutes: u32, window: u32) -> Self {
        QueryConstraint {
            column: column.to_string(),
            op: QueryOp::WithinWindow(window),
            value: Value::Time(minutes),
        }
    }

    /// Windows do not wrap past midnight.
    pub fn accepts(&self, cell: &Value) -> bool {
        match self.op {
            QueryOp::Eq => cell.same_as(&self.value),
            QueryOp::WithinWindow(w) => match (cell.as_minutes(), self.value.as_minutes()) {
                (Some(t), Some(c)) => t.abs_diff(c) <= w,
                _ => false,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryResultSet {
    pub columns: Vec<String>,
    pub count: usize,
    pub rows: Vec<Vec<Value>>,
    pub truncated: bool,
}

impl QueryResultSet {
    pub fn empty(columns: Vec<String>) -> Self {
        QueryResultSet {
            columns,
            count: 0,
            rows: Vec::new(),
            truncated: false,
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Cell of `row` under `column`.
    pub fn cell(&self, row: usize, column: &str) -> Option<&Value> {
        self.rows.get(row).and_then(|r| r.get(self.column_index(column)?))
    }
}

/// A back-end the dialogue manager can query.
pub trait Querier: Send + Sync {
    fn execute(&self, constraints: &[QueryConstraint]) -> Result<QueryResultSet, QueryError>;

    /// Every matching row, uncapped. Only back-ends with row access
    /// implement this; others fall back to a fixed question order.
    fn all_rows(&self, _constraints: &[QueryConstraint]) -> Option<Result<QueryResultSet, QueryError>> {
        None
    }

    fn row_access(&self) -> bool {
        false
    }
}

impl<Q: Querier + ?Sized> Querier for Arc<Q> {
    fn execute(&self, c: &[QueryConstraint]) -> Result<QueryResultSet, QueryError> {
        (**self).execute(c)
    }

    fn all_rows(&self, c: &[QueryConstraint]) -> Option<Result<QueryResultSet, QueryError>> {
        (**self).all_rows(c)
    }

    fn row_access(&self) -> bool {
        (**self).row_access()
    }
}

impl<Q: Querier + ?Sized> Querier for &Q {
    fn execute(&self, c: &[QueryConstraint]) -> Result<QueryResultSet, QueryError> {
        (**self).execute(c)
    }

    fn all_rows(&self, c: &[QueryConstraint]) -> Option<Result<QueryResultSet, QueryError>> {
        (**self).all_rows(c)
    }

    fn row_access(&self) -> bool {
        (**self).row_access()
    }
}

#[derive(Debug, Clone)]
pub struct LocalQuerier {
    pub store: Arc<TableStore>,
    pub cap: usize,
}

impl LocalQuerier {
    pub fn new(store: Arc<TableStore>) -> Self {
        LocalQuerier {
            store,
            cap: DEFAULT_ROW_CAP,
        }
    }
}

impl Querier for LocalQuerier {
    fn execute(&self, c: &[QueryConstraint]) -> Result<QueryResultSet, QueryError> {
        exec_local_capped(&self.store, c, self.cap)
    }

    fn all_rows(&self, c: &[QueryConstraint]) -> Option<Result<QueryResultSet, QueryError>> {
        Some(exec_local_capped(&self.store, c, usize::MAX))
    }

    fn row_access(&self) -> bool {
        true
    }
}

/// Column constraints for the current bindings, in schema field order.
pub fn compile_constraints(context: &DialogueContext, pack: &DomainPack) -> Result<Vec<QueryConstraint>, QueryError> {
    let mut out = Vec::new();
    for field in &pack.schema.fields {
        let Some(b) = context.bindings.get(&field.name) else {
            continue;
        };
        let column = pack
            .db_map
            .field_columns
            .get(&field.name)
            .ok_or_else(|| QueryError::UnmappedField(field.name.clone()))?;
        let constraint = match (&b.value, b.window.or(b.approx.then_some(BASE_WINDOW))) {
            (Value::Time(m), Some(w)) => QueryConstraint::within(column, *m, w),
            _ => QueryConstraint::eq(column, b.value.clone()),
        };
        out.push(constraint);
    }
    Ok(out)
}

/// SQL rendering of a constraint list, for logs only.
pub struct Sql<'a> {
    pub table: &'a str,
    pub constraints: &'a [QueryConstraint],
}

impl fmt::Display for Sql<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SELECT * FROM {}", self.table)?;
        for (i, c) in self.constraints.iter().enumerate() {
            f.write_str(if i == 0 { " WHERE " } else { " AND " })?;
            let lit = |v: &Value| match v {
                Value::Text(s) => format!("'{}'", s.replace('\'', "''")),
                Value::Number(n) => n.to_string(),
                Value::Time(m) => m.to_string(),
            };
            match c.op {
                QueryOp::Eq => write!(f, "{} = {}", c.column, lit(&c.value))?,
                QueryOp::WithinWindow(w) => {
                    let m = c.value.as_minutes().unwrap_or(0);
                    write!(f, "{} BETWEEN {} AND {}", c.column, m.saturating_sub(w), m + w)?
                }
            }
        }
        Ok(())
    }
}
