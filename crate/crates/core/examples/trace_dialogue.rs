//! Run a scripted dialogue against the flight pack and print the state,
//! decision cause and query counts of every turn.
//!
//! ```bash
//! cargo run --example trace_dialogue -- "flight 472" "when does it arrive?"
//! ```

use pure_dialog::service::{Backend, SessionManager};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let packs = concat!(env!("CARGO_MANIFEST_DIR"), "/../../packs");
    let manager = SessionManager::from_packs_dir(packs)?;
    let mut turns: Vec<String> = std::env::args().skip(1).collect();
    let domain = match turns.first().and_then(|t| t.strip_prefix("--domain=")) {
        Some(d) => {
            let d = d.to_string();
            turns.remove(0);
            d
        }
        None => "flights".to_string(),
    };
    let (id, greeting) = manager.create_session(&domain, Backend::Local, 7)?;
    println!("S: {greeting}");
    for text in turns {
        let r = manager.step(&id, &text)?;
        let sub = r.sub_state.map(|s| format!("/{s}")).unwrap_or_default();
        println!("U: {text}");
        println!(
            "   [{}{sub}] cause={} q={} probes={} bindings={:?}",
            r.state, r.debug.cause, r.debug.classification_queries, r.debug.probe_queries, r.bindings
        );
        println!("S: {}", r.reply.replace('\n', "\n   "));
        if r.closed {
            break;
        }
    }
    Ok(())
}
