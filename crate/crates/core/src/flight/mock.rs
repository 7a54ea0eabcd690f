//! A stand-in for the airline's web site: one CGI path, three logical
//! forms selected by the hidden `fltAns` field, HTML result pages.
//!
//! The site keeps its own notion of the forms and filters flights
//! directly, so it can serve as an oracle for the table-store path.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::FlightRow;
use crate::value::parse_clock;

pub const PATH: &str = "/aa/flight";
pub const BEGIN: &str = "<!-- BEGIN RESULTS -->";
pub const END: &str = "<!-- END RESULTS -->";
pub const NO_MATCH: &str = "<!-- NO MATCHES -->";

/// Form id and the parameters it cannot do without.
pub const FORMS: [(&str, &[&str]); 3] = [
    ("byNumber", &["fltNumber"]),
    ("byArrival", &["depCity", "arrCity", "arrTime"]),
    ("byDeparture", &["depCity", "arrCity", "depTime"]),
];

const KNOWN: [&str; 9] = [
    "fltAns", "fltNumber", "depCity", "arrCity", "depTime", "depWin", "arrTime", "arrWin", "status",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockSiteConfig {
    pub port: u16,
    pub dataset: Option<PathBuf>,
    pub latency_ms: u64,
}

impl Default for MockSiteConfig {
    fn default() -> Self {
        MockSiteConfig {
            port: 8089,
            dataset: None,
            latency_ms: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MockSite {
    pub flights: Arc<Vec<FlightRow>>,
}

fn page(title: &str, body: &str) -> String {
    format!(
        "<html>\n<head><title>{title}</title></head>\n<body>\n<h1>{title}</h1>\n{body}\n</body>\n</html>\n"
    )
}

fn error_page(status: u16, why: &str) -> (u16, String) {
    (status, page("Flight Information Error", &format!("<p class=\"error\">{}</p>", html_escape(why))))
}

fn html_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&#39;")
}

fn hhmm(m: u32) -> String {
    format!("{:02}:{:02}", m / 60, m % 60)
}

/// Window menu codes: 0 exact, 2 within two hours, 4 within four, 8
/// within eight.
fn window_minutes(code: &str) -> Option<u32> {
    match code {
        "0" => Some(0),
        "2" => Some(120),
        "4" => Some(240),
        "8" => Some(480),
        _ => None,
    }
}

fn wire_time(s: &str) -> Option<u32> {
    if s.len() != 4 || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    parse_clock(&format!("{}:{}", &s[..2], &s[2..]))
}

struct Filter {
    number: Option<u16>,
    dep_city: Option<String>,
    arr_city: Option<String>,
    dep: Option<(u32, u32)>,
    arr: Option<(u32, u32)>,
    status: Option<String>,
}

impl Filter {
    fn keeps(&self, f: &FlightRow) -> bool {
        let near = |t: u32, (c, w): (u32, u32)| if t > c { t - c <= w } else { c - t <= w };
        self.number.is_none_or(|n| f.flight_number == n)
            && self.dep_city.as_ref().is_none_or(|c| f.departure_city.eq_ignore_ascii_case(c))
            && self.arr_city.as_ref().is_none_or(|c| f.arrival_city.eq_ignore_ascii_case(c))
            && self.dep.is_none_or(|w| near(f.departure_time, w))
            && self.arr.is_none_or(|w| near(f.arrival_time, w))
            && self.status.as_ref().is_none_or(|s| f.status.eq_ignore_ascii_case(s))
    }
}

impl MockSite {
    pub fn new(flights: Vec<FlightRow>) -> Self {
        MockSite {
            flights: Arc::new(flights),
        }
    }

    /// Answer `path?query`; returns (status, html).
    pub fn handle_request(&self, path_and_query: &str) -> (u16, String) {
        let (path, query) = path_and_query.split_once('?').unwrap_or((path_and_query, ""));
        if path != PATH {
            return error_page(404, &format!("No such page: {path}"));
        }
        let params: Vec<(String, String)> = url::form_urlencoded::parse(query.as_bytes()).into_owned().collect();
        let get = |k: &str| params.iter().find(|(n, _)| n == k).map(|(_, v)| v.as_str());
        if let Some((k, _)) = params.iter().find(|(k, _)| !KNOWN.contains(&k.as_str())) {
            return error_page(400, &format!("Unexpected field {k}"));
        }
        let Some(form) = get("fltAns") else {
            return error_page(400, "Please use one of the flight information forms.");
        };
        let Some((_, required)) = FORMS.iter().find(|(id, _)| *id == form) else {
            return error_page(400, &format!("Unknown form {form}"));
        };
        if let Some(missing) = required.iter().find(|p| get(p).is_none_or(str::is_empty)) {
            return error_page(400, &format!("Missing required field {missing}"));
        }

        let number = match get("fltNumber") {
            Some(v) => match v.parse::<u16>() {
                Ok(n) => Some(n),
                Err(_) => return error_page(400, "Flight number must be a number"),
            },
            None => None,
        };
        let timed = |t: &str, w: &str| -> Result<Option<(u32, u32)>, (u16, String)> {
            match get(t) {
                None => Ok(None),
                Some(v) => {
                    let c = wire_time(v).ok_or_else(|| error_page(400, &format!("Bad time {v}")))?;
                    let win = match get(w) {
                        None => 0,
                        Some(code) => window_minutes(code).ok_or_else(|| error_page(400, &format!("Bad window {code}")))?,
                    };
                    Ok(Some((c, win)))
                }
            }
        };
        let dep = match timed("depTime", "depWin") {
            Ok(d) => d,
            Err(e) => return e,
        };
        let arr = match timed("arrTime", "arrWin") {
            Ok(a) => a,
            Err(e) => return e,
        };
        let filter = Filter {
            number,
            dep_city: get("depCity").map(str::to_string),
            arr_city: get("arrCity").map(str::to_string),
            dep,
            arr,
            status: get("status").map(str::to_string),
        };
        let hits: Vec<&FlightRow> = self.flights.iter().filter(|f| filter.keeps(f)).collect();
        (200, self.results_page(&hits))
    }

    fn results_page(&self, hits: &[&FlightRow]) -> String {
        if hits.is_empty() {
            return page(
                "Flight Information",
                &format!("{NO_MATCH}\n<p>We could not find any flights matching your request.</p>"),
            );
        }
        let mut body = format!(
            "<p>{} flight(s) found.</p>\n{BEGIN}\n<table>\n<tr><th>Flight</th><th>From</th><th>To</th><th>Departs</th><th>Arrives</th><th>Gate</th><th>Status</th></tr>\n",
            hits.len()
        );
        for f in hits {
            body.push_str(&format!(
                "<tr class=\"flight\"><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>\n",
                f.flight_number,
                html_escape(&f.departure_city),
                html_escape(&f.arrival_city),
                hhmm(f.departure_time),
                hhmm(f.arrival_time),
                html_escape(&f.gate),
                html_escape(&f.status),
            ));
        }
        body.push_str("</table>\n");
        body.push_str(END);
        page("Flight Information", &body)
    }

    /// Serve over HTTP until the process ends.
    pub async fn serve(self, cfg: MockSiteConfig) -> std::io::Result<()> {
        use axum::extract::State;
        use axum::http::{StatusCode, Uri};
        use axum::response::Html;

        let latency = std::time::Duration::from_millis(cfg.latency_ms);
        let app = axum::Router::new()
            .fallback(move |State(site): State<MockSite>, uri: Uri| async move {
                if !latency.is_zero() {
                    tokio::time::sleep(latency).await;
                }
                let target = uri.path_and_query().map(|p| p.as_str().to_string()).unwrap_or_default();
                let (status, body) = site.handle_request(&target);
                (StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR), Html(body))
            })
            .with_state(self);
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", cfg.port)).await?;
        tracing::info!(port = cfg.port, "mock airline site listening");
        axum::serve(listener, app).await
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flight::generate_dataset;

    fn site() -> MockSite {
        MockSite::new(generate_dataset(7, 200))
    }

    #[test]
    fn by_number_finds_one() {
        let (status, body) = site().handle_request("/aa/flight?fltAns=byNumber&fltNumber=472");
        assert_eq!(status, 200);
        assert_eq!(body.matches("<tr class=\"flight\">").count(), 1);
        assert!(body.contains("<td>472</td><td>Newark</td><td>Dallas</td>"));
    }

    #[test]
    fn form_dependence() {
        let s = site();
        assert_eq!(s.handle_request("/aa/flight?fltNumber=472").0, 400);
        assert_eq!(s.handle_request("/aa/flight?fltAns=byArrival&fltNumber=472").0, 400);
        assert_eq!(s.handle_request("/aa/other?fltAns=byNumber&fltNumber=472").0, 404);
        assert_eq!(s.handle_request("/aa/flight?fltAns=byNumber&fltNumber=472&x=1").0, 400);
    }

    #[test]
    fn no_match_page() {
        let (status, body) =
            site().handle_request("/aa/flight?fltAns=byArrival&depCity=Miami&arrCity=Houston&arrTime=0300&arrWin=0");
        assert_eq!(status, 200);
        assert!(body.contains(NO_MATCH));
    }
}
