//! Start the mock airline site on a free local port and query it over
//! real HTTP through the CGI querier.
//!
//! ```bash
//! cargo run --example mock_site
//! ```

use std::sync::Arc;

use pure_dialog::flight::generate_dataset;
use pure_dialog::flight::mock::{MockSite, MockSiteConfig};
use pure_dialog::query::cgi::{CgiQuerier, HttpTransport};
use pure_dialog::query::{Querier, QueryConstraint};
use pure_dialog::{load_domain_pack, Value};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let port = std::net::TcpListener::bind("127.0.0.1:0")?.local_addr()?.port();
    let site = MockSite::new(generate_dataset(7, 200));
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().expect("runtime");
        let cfg = MockSiteConfig { port, ..MockSiteConfig::default() };
        if let Err(e) = rt.block_on(site.serve(cfg)) {
            eprintln!("mock site: {e}");
        }
    });
    std::thread::sleep(std::time::Duration::from_millis(200));

    let pack = load_domain_pack(concat!(env!("CARGO_MANIFEST_DIR"), "/../../packs/flights"))?;
    let transport = HttpTransport::new(&format!("http://127.0.0.1:{port}"))?;
    let querier = CgiQuerier::new(&pack, Arc::new(transport))?;

    let result = querier.execute(&[QueryConstraint::eq("fltNumber", Value::Number(472))])?;
    println!("flight 472 via http://127.0.0.1:{port}");
    for row in &result.rows {
        for (col, v) in result.columns.iter().zip(row) {
            println!("  {col:<10} {v}");
        }
    }
    Ok(())
}
