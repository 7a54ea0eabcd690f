//! Keep session transcripts on disk, restart the manager from them, and
//! replay a transcript file against the current engine.
//!
//! ```bash
//! cargo run --example persist_replay
//! ```

use pure_dialog::service::{read_transcript, replay, Backend, SessionManager};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let packs = concat!(env!("CARGO_MANIFEST_DIR"), "/../../packs");
    let dir = tempfile::tempdir()?;

    let first = SessionManager::from_packs_dir(packs)?.with_persistence(dir.path())?;
    let (id, _) = first.create_session("flights", Backend::Local, 7)?;
    first.step(&id, "flights from Boston to Chicago")?;
    first.step(&id, "leaving around 8:30 in the morning")?;
    drop(first);

    // A new manager picks the session up where it stopped.
    let second = SessionManager::from_packs_dir(packs)?.with_persistence(dir.path())?;
    let r = second.step(&id, "arriving about 11")?;
    println!("after restart: [{}] {}", r.state, r.reply.replace('\n', "\n   "));

    let path = dir.path().join(format!("{id}.jsonl"));
    let (_, config, entries) = read_transcript(&path)?;
    for e in &entries {
        println!("{:>2} {:<18} {}", e.turn, e.state.to_string(), e.utterance);
    }
    let domain = second.domain("flights").expect("flights").clone();
    let diffs = replay(domain, config, &entries)?;
    println!("replay: {} mismatches", diffs.len());
    Ok(())
}
