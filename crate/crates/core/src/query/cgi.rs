//! Web-form back-end: request building, result-page scraping and the
//! transports that fetch pages.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{QueryConstraint, QueryError, QueryOp, QueryResultSet, Querier, DEFAULT_ROW_CAP};
use crate::conf;
use crate::schema::{DomainPack, PackError, SCRAPE_FILE};
use crate::value::{ColumnType, Value};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CgiForm {
    pub form_id: String,
    pub url_path: String,
    pub required_params: Vec<String>,
    /// Accepted parameters in serialization order.
    pub params: Vec<String>,
    pub hidden_params: Vec<(String, String)>,
}

/// Wire contract shared by the request builder, the scraper and the
/// mock site.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScrapeSpec {
    pub path: String,
    pub hidden_param: String,
    pub begin_marker: String,
    pub end_marker: String,
    pub row_marker: String,
    pub no_match_marker: String,
    pub cells: Vec<(String, ColumnType)>,
    /// Time parameter → its window-code parameter.
    pub window_params: Vec<(String, String)>,
    /// Window half-width in minutes → code sent on the wire.
    pub window_codes: Vec<(u32, String)>,
    pub forms: Vec<CgiForm>,
}

fn perr(line: usize, reason: impl Into<String>) -> PackError {
    PackError::ParseError {
        file: SCRAPE_FILE.to_string(),
        line,
        reason: reason.into(),
    }
}

impl ScrapeSpec {
    pub fn parse(src: &str) -> Result<Self, PackError> {
        let sections = conf::parse(src, true).map_err(|e| perr(e.line, e.reason))?;
        let mut spec = ScrapeSpec {
            path: String::new(),
            hidden_param: String::new(),
            begin_marker: String::new(),
            end_marker: String::new(),
            row_marker: String::new(),
            no_match_marker: String::new(),
            cells: Vec::new(),
            window_params: Vec::new(),
            window_codes: Vec::new(),
            forms: Vec::new(),
        };
        for s in &sections {
            if let Some(l) = s.raw.first() {
                return Err(perr(l.number, "expected `key = value`"));
            }
            let need = |key: &str| {
                s.get(key)
                    .map(|e| e.value.clone())
                    .ok_or_else(|| perr(s.line, format!("[{}] needs `{key}`", s.kind)))
            };
            match s.kind.as_str() {
                "site" => {
                    spec.path = need("path")?;
                    spec.hidden_param = need("hidden")?;
                    spec.begin_marker = need("begin")?;
                    spec.end_marker = need("end")?;
                    spec.row_marker = need("row")?;
                    spec.no_match_marker = need("no_match")?;
                    for cell in conf::list(&need("cells")?) {
                        let (name, ty) = cell.split_once(':').unwrap_or((&cell, "text"));
                        let ty = ColumnType::parse(ty).ok_or_else(|| perr(s.line, format!("bad cell type in `{cell}`")))?;
                        spec.cells.push((name.trim().to_string(), ty));
                    }
                }
                "windows" => spec
                    .window_params
                    .extend(s.entries.iter().map(|e| (e.key.clone(), e.value.clone()))),
                "window_codes" => {
                    for e in &s.entries {
                        let minutes = e.key.parse().map_err(|_| perr(e.line, "window must be minutes"))?;
                        spec.window_codes.push((minutes, e.value.clone()));
                    }
                }
                "form" => {
                    if s.name.is_empty() {
                        return Err(perr(s.line, "form needs an id"));
                    }
                    let form = CgiForm {
                        form_id: s.name.clone(),
                        url_path: String::new(),
                        required_params: conf::list(&need("required")?),
                        params: conf::list(&need("params")?),
                        hidden_params: Vec::new(),
                    };
                    if let Some(p) = form.required_params.iter().find(|p| !form.params.contains(p)) {
                        return Err(perr(s.line, format!("required `{p}` is not among the params")));
                    }
                    spec.forms.push(form);
                }
                other => return Err(perr(s.line, format!("unknown section `{other}`"))),
            }
        }
        if spec.path.is_empty() {
            return Err(perr(1, "missing [site] section"));
        }
        if spec.forms.is_empty() {
            return Err(perr(1, "no forms declared"));
        }
        for f in &mut spec.forms {
            f.url_path = spec.path.clone();
            f.hidden_params = vec![(spec.hidden_param.clone(), f.form_id.clone())];
        }
        Ok(spec)
    }

    pub fn knows_param(&self, p: &str) -> bool {
        self.forms.iter().any(|f| f.params.iter().any(|q| q == p))
    }

    pub fn form(&self, id: &str) -> Option<&CgiForm> {
        self.forms.iter().find(|f| f.form_id == id)
    }

    pub fn window_param(&self, time_param: &str) -> Option<&str> {
        self.window_params
            .iter()
            .find(|(t, _)| t == time_param)
            .map(|(_, w)| w.as_str())
    }

    pub fn window_code(&self, minutes: u32) -> Option<&str> {
        self.window_codes.iter().find(|(m, _)| *m == minutes).map(|(_, c)| c.as_str())
    }

    pub fn window_minutes(&self, code: &str) -> Option<u32> {
        self.window_codes.iter().find(|(_, c)| c == code).map(|(m, _)| *m)
    }
}

/// Times go on the wire as `HHMM`.
pub fn time_param(minutes: u32) -> String {
    format!("{:02}{:02}", minutes / 60, minutes % 60)
}

pub fn parse_time_param(s: &str) -> Option<u32> {
    if s.len() != 4 || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let h: u32 = s[..2].parse().ok()?;
    let m: u32 = s[2..].parse().ok()?;
    (h < 24 && m < 60).then_some(h * 60 + m)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CgiRequest {
    pub method: String,
    pub url_path: String,
    pub params: Vec<(String, String)>,
    pub form_id: String,
}

impl CgiRequest {
    /// `path?query`, URL-encoded.
    pub fn path_and_query(&self) -> String {
        let query = url::form_urlencoded::Serializer::new(String::new())
            .extend_pairs(self.params.iter())
            .finish();
        format!("{}?{}", self.url_path, query)
    }
}

/// Column → form parameter, from the pack's field mappings.
pub fn param_map(pack: &DomainPack) -> BTreeMap<String, String> {
    pack.schema
        .fields
        .iter()
        .filter_map(|f| Some((f.db_column.clone(), f.cgi_param.clone()?)))
        .collect()
}

pub fn build_cgi_request(constraints: &[QueryConstraint], pack: &DomainPack) -> Result<CgiRequest, QueryError> {
    let spec = pack.scrape.as_ref().ok_or(QueryError::NoFormSatisfiable)?;
    build_request(constraints, spec, &param_map(pack))
}

pub fn build_request(
    constraints: &[QueryConstraint],
    spec: &ScrapeSpec,
    params: &BTreeMap<String, String>,
) -> Result<CgiRequest, QueryError> {
    let mut values: BTreeMap<String, String> = BTreeMap::new();
    for c in constraints {
        let p = params
            .get(&c.column)
            .ok_or_else(|| QueryError::UnmappedField(c.column.clone()))?;
        let window = match c.op {
            QueryOp::WithinWindow(w) => Some(w),
            QueryOp::Eq if matches!(c.value, Value::Time(_)) => Some(0),
            QueryOp::Eq => None,
        };
        let text = match &c.value {
            Value::Time(m) => time_param(*m),
            v => v.to_cell(),
        };
        if values.insert(p.clone(), text).is_some() {
            // Two constraints on one column cannot be expressed as a form.
            return Err(QueryError::NoFormSatisfiable);
        }
        if let Some(w) = window {
            let wp = spec
                .window_param(p)
                .ok_or_else(|| QueryError::UnmappedField(format!("window for {p}")))?;
            let code = spec
                .window_code(w)
                .ok_or_else(|| QueryError::UnmappedField(format!("window of {w} minutes")))?;
            values.insert(wp.to_string(), code.to_string());
        }
    }
    let form = spec
        .forms
        .iter()
        .find(|f| f.required_params.iter().all(|p| values.contains_key(p)))
        .ok_or(QueryError::NoFormSatisfiable)?;
    if let Some(p) = values.keys().find(|p| !form.params.contains(p)) {
        return Err(QueryError::UnmappedField(format!("{p} on form {}", form.form_id)));
    }
    let mut out = form.hidden_params.clone();
    out.extend(
        form.params
            .iter()
            .filter_map(|p| values.get(p).map(|v| (p.clone(), v.clone()))),
    );
    Ok(CgiRequest {
        method: "GET".to_string(),
        url_path: form.url_path.clone(),
        params: out,
        form_id: form.form_id.clone(),
    })
}

fn unescape(s: &str) -> String {
    s.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&amp;", "&")
}

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&#39;")
}

pub fn scrape_rows(html: &str, spec: &ScrapeSpec) -> Result<QueryResultSet, QueryError> {
    scrape_rows_capped(html, spec, DEFAULT_ROW_CAP)
}

pub fn scrape_rows_capped(html: &str, spec: &ScrapeSpec, cap: usize) -> Result<QueryResultSet, QueryError> {
    let columns: Vec<String> = spec.cells.iter().map(|(n, _)| n.clone()).collect();
    if html.contains(&spec.no_match_marker) {
        return Ok(QueryResultSet::empty(columns));
    }
    let start = html
        .find(&spec.begin_marker)
        .ok_or_else(|| QueryError::ScrapeMismatch("begin marker missing".into()))?
        + spec.begin_marker.len();
    let len = html[start..]
        .find(&spec.end_marker)
        .ok_or_else(|| QueryError::ScrapeMismatch("end marker missing".into()))?;
    let body = &html[start..start + len];

    let mut rows = Vec::new();
    for chunk in body.split(&spec.row_marker).skip(1) {
        let row_html = chunk.split("</tr>").next().unwrap_or("");
        let cells: Vec<String> = row_html
            .split("<td>")
            .skip(1)
            .map(|c| unescape(c.split("</td>").next().unwrap_or("").trim()))
            .collect();
        if cells.len() != spec.cells.len() {
            return Err(QueryError::ScrapeMismatch(format!(
                "row has {} cells, expected {}",
                cells.len(),
                spec.cells.len()
            )));
        }
        let mut row = Vec::with_capacity(cells.len());
        for (raw, (name, ty)) in cells.iter().zip(&spec.cells) {
            row.push(
                ty.parse_cell(raw)
                    .ok_or_else(|| QueryError::ScrapeMismatch(format!("bad {} cell `{raw}` in {name}", ty.name())))?,
            );
        }
        rows.push(row);
    }
    let count = rows.len();
    rows.truncate(cap);
    Ok(QueryResultSet {
        columns,
        count,
        rows,
        truncated: count > cap,
    })
}

/// Fetches `path?query` and returns (status, body).
pub trait CgiTransport: Send + Sync {
    fn get(&self, path_and_query: &str) -> Result<(u16, String), QueryError>;
}

/// Blocking HTTP with a 5 second timeout and one retry.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    pub base: url::Url,
    pub timeout: Duration,
}

impl HttpTransport {
    pub fn new(base: &str) -> Result<Self, QueryError> {
        Ok(HttpTransport {
            base: url::Url::parse(base).map_err(|e| QueryError::Unavailable(format!("bad url {base}: {e}")))?,
            timeout: Duration::from_secs(5),
        })
    }
}

impl CgiTransport for HttpTransport {
    fn get(&self, path_and_query: &str) -> Result<(u16, String), QueryError> {
        let url = self
            .base
            .join(path_and_query)
            .map_err(|e| QueryError::Unavailable(e.to_string()))?;
        // A client per request: blocking clients must not be dropped
        // inside an async runtime.
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| QueryError::Unavailable(e.to_string()))?;
        let mut last = String::new();
        for _ in 0..2 {
            match client.get(url.clone()).send() {
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    let body = resp.text().map_err(|e| QueryError::Unavailable(e.to_string()))?;
                    return Ok((status, body));
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(QueryError::Unavailable(last))
    }
}

/// Calls a request handler in-process, no sockets involved.
pub struct InProcessTransport<F>(pub F);

impl<F> CgiTransport for InProcessTransport<F>
where
    F: Fn(&str) -> (u16, String) + Send + Sync,
{
    fn get(&self, path_and_query: &str) -> Result<(u16, String), QueryError> {
        Ok((self.0)(path_and_query))
    }
}

pub struct CgiQuerier {
    pub spec: ScrapeSpec,
    pub params: BTreeMap<String, String>,
    pub transport: Arc<dyn CgiTransport>,
    pub cap: usize,
}

impl CgiQuerier {
    pub fn new(pack: &DomainPack, transport: Arc<dyn CgiTransport>) -> Result<Self, QueryError> {
        Ok(CgiQuerier {
            spec: pack.scrape.clone().ok_or(QueryError::NoFormSatisfiable)?,
            params: param_map(pack),
            transport,
            cap: DEFAULT_ROW_CAP,
        })
    }
}

impl Querier for CgiQuerier {
    fn execute(&self, constraints: &[QueryConstraint]) -> Result<QueryResultSet, QueryError> {
        let req = build_request(constraints, &self.spec, &self.params)?;
        let url = req.path_and_query();
        tracing::debug!(%url, "cgi request");
        let (status, body) = self.transport.get(&url)?;
        if status != 200 {
            return Err(QueryError::ScrapeMismatch(format!("status {status} for {url}")));
        }
        scrape_rows_capped(&body, &self.spec, self.cap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPEC: &str = r#"
[site]
path = /aa/flight
hidden = fltAns
begin = <!-- BEGIN RESULTS -->
end = <!-- END RESULTS -->
row = <tr class="flight">
no_match = <!-- NO MATCHES -->
cells = fltNumber:number, arrCity:text, arrTime:time

[windows]
arrTime = arrWin

[window_codes]
0 = 0
120 = 2

[form byNumber]
required = fltNumber
params = fltNumber, arrCity, arrTime, arrWin

[form byArrival]
required = arrCity, arrTime
params = arrCity, arrTime, arrWin
"#;

    fn spec() -> ScrapeSpec {
        ScrapeSpec::parse(SPEC).unwrap()
    }

    fn identity() -> BTreeMap<String, String> {
        ["fltNumber", "arrCity", "arrTime"].iter().map(|c| (c.to_string(), c.to_string())).collect()
    }

    #[test]
    fn builds_by_number() {
        let req = build_request(&[QueryConstraint::eq("fltNumber", Value::Number(472))], &spec(), &identity()).unwrap();
        assert_eq!(req.path_and_query(), "/aa/flight?fltAns=byNumber&fltNumber=472");
    }

    #[test]
    fn builds_window_and_encodes() {
        let c = [
            QueryConstraint::within("arrTime", 630, 120),
            QueryConstraint::eq("arrCity", Value::text("New York")),
        ];
        let req = build_request(&c, &spec(), &identity()).unwrap();
        assert_eq!(req.path_and_query(), "/aa/flight?fltAns=byArrival&arrCity=New+York&arrTime=1030&arrWin=2");
    }

    #[test]
    fn no_form() {
        let c = [QueryConstraint::eq("arrCity", Value::text("Dallas"))];
        assert_eq!(build_request(&c, &spec(), &identity()), Err(QueryError::NoFormSatisfiable));
        assert_eq!(build_request(&[], &spec(), &identity()), Err(QueryError::NoFormSatisfiable));
    }

    #[test]
    fn scrapes_rows_and_markers() {
        let s = spec();
        let page = "<html><!-- BEGIN RESULTS --><table>\
            <tr class=\"flight\"><td>472</td><td>Dallas</td><td>10:30</td></tr>\
            <tr class=\"flight\"><td>118</td><td>Fort &amp; Co</td><td>13:00</td></tr>\
            </table><!-- END RESULTS --></html>";
        let r = scrape_rows(page, &s).unwrap();
        assert_eq!(r.count, 2);
        assert_eq!(r.rows[1][1], Value::text("Fort & Co"));
        assert_eq!(scrape_rows("<!-- NO MATCHES -->", &s).unwrap().count, 0);
        assert!(matches!(
            scrape_rows("<!-- BEGIN RESULTS --><tr class=\"flight\">", &s),
            Err(QueryError::ScrapeMismatch(_))
        ));
    }

    #[test]
    fn time_params() {
        assert_eq!(time_param(480), "0800");
        assert_eq!(parse_time_param("1030"), Some(630));
        assert_eq!(parse_time_param("2460"), None);
    }
}
