//! Serve the dialogue HTTP API on a free local port, then drive one
//! session through it with a plain HTTP client.
//!
//! ```bash
//! cargo run --example http_service
//! ```

use std::sync::Arc;

use pure_dialog::service::{http, SessionManager};
use serde_json::{json, Value};

fn post(client: &reqwest::blocking::Client, url: &str, body: Value) -> Result<Value, Box<dyn std::error::Error>> {
    let res = client
        .post(url)
        .header("content-type", "application/json")
        .body(body.to_string())
        .send()?;
    Ok(serde_json::from_str(&res.text()?)?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let manager = Arc::new(SessionManager::from_packs_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/../../packs"))?);
    let port = std::net::TcpListener::bind("127.0.0.1:0")?.local_addr()?.port();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().expect("runtime");
        if let Err(e) = rt.block_on(http::serve(manager, port)) {
            eprintln!("server: {e}");
        }
    });
    std::thread::sleep(std::time::Duration::from_millis(200));

    let base = format!("http://127.0.0.1:{port}/api");
    let client = reqwest::blocking::Client::new();
    println!("GET /domains -> {}", client.get(format!("{base}/domains")).send()?.text()?);

    let created = post(&client, &format!("{base}/session"), json!({"domain": "flights", "seed": 7}))?;
    let id = created["session_id"].as_str().ok_or("no session id")?;
    println!("S: {}", created["greeting"].as_str().unwrap_or_default());
    for text in ["I need to get from Newark to Dallas", "leaving around 8 in the morning", "when does it arrive?", "the second one"] {
        let turn = post(&client, &format!("{base}/session/{id}/utterance"), json!({ "text": text }))?;
        println!("U: {text}");
        println!("S: {}  [{}]", turn["reply"].as_str().unwrap_or_default().replace('\n', "\n   "), turn["state"]);
    }
    let transcript: Value = serde_json::from_str(&client.get(format!("{base}/session/{id}/transcript")).send()?.text()?)?;
    println!("transcript has {} entries", transcript.as_array().map_or(0, Vec::len));
    Ok(())
}
