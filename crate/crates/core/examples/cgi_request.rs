//! Build the CGI request for a set of constraints, answer it with the
//! in-process mock airline site, and scrape the rows back out of the
//! HTML.
//!
//! ```bash
//! cargo run --example cgi_request
//! ```

use pure_dialog::flight::{generate_dataset, mock::MockSite};
use pure_dialog::query::cgi::{build_cgi_request, scrape_rows};
use pure_dialog::query::{QueryConstraint, QueryOp};
use pure_dialog::{load_domain_pack, Value};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pack = load_domain_pack(concat!(env!("CARGO_MANIFEST_DIR"), "/../../packs/flights"))?;
    let site = MockSite::new(generate_dataset(7, 200));

    let constraints = vec![
        QueryConstraint::eq("depCity", Value::text("Newark")),
        QueryConstraint::eq("arrCity", Value::text("Dallas")),
        QueryConstraint {
            column: "depTime".into(),
            op: QueryOp::WithinWindow(120),
            value: Value::Time(8 * 60),
        },
    ];
    let req = build_cgi_request(&constraints, &pack)?;
    println!("form {}", req.form_id);
    println!("GET  {}", req.path_and_query());

    let (status, html) = site.handle_request(&req.path_and_query());
    println!("HTTP {status}, {} bytes", html.len());
    let spec = pack.scrape.as_ref().expect("flight pack has a scrape spec");
    let result = scrape_rows(&html, spec)?;
    for row in &result.rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        println!("  {}", cells.join(" | "));
    }

    // A constraint no form can carry.
    let bad = vec![QueryConstraint::eq("arrTime", Value::Time(10 * 60 + 30))];
    println!("arrival time only: {}", build_cgi_request(&bad, &pack).unwrap_err());
    Ok(())
}
