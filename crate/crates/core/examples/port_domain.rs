//! A new domain is a set of pack files; the engine code does not change.
//! This builds the library pack from its sources, adds one author to its
//! lexicon in memory, and talks to it.
//!
//! ```bash
//! cargo run --example port_domain
//! ```

use std::fs;
use std::sync::Arc;

use pure_dialog::dialog::{decide_state, DialogConfig, DialogueContext};
use pure_dialog::interactor::render_or_apologize;
use pure_dialog::nlu::understand;
use pure_dialog::query::{LocalQuerier, TableStore};
use pure_dialog::schema::{build_domain_pack, PackSources};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::path::Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../packs/library"));
    let read = |f: &str| fs::read_to_string(root.join(f));
    let mut src = PackSources {
        schema: read("schema.conf")?,
        db_map: read("db-map.conf")?,
        lexicon: read("lexicon.conf")?,
        consistency: read("consistency.conf")?,
        render_rules: read("render-rules.conf")?,
        help: read("help.conf")?,
        scrape: None,
        words: read("words.conf").ok(),
        cues: read("cues.conf").ok(),
    };
    src.lexicon.push_str("\nhardy | author | Thomas Hardy\nthomas hardy | author | Thomas Hardy\n");
    let pack = build_domain_pack(&src)?;

    let s = &pack.schema;
    println!("domain {} with {} fields and {} query types", s.domain_name, s.fields.len(), s.query_types.len());

    let store = Arc::new(TableStore::from_path(pack.dataset_path(root).expect("dataset"))?);
    let querier = LocalQuerier::new(store);
    let mut ctx = DialogueContext::default();
    for text in ["books by Dickens", "Charles", "where are they", "anything by Hardy?"] {
        ctx.begin_turn();
        let (_, x) = understand(text, &pack, &ctx);
        let (d, next) = decide_state(&ctx, &x, &pack, &querier, &DialogConfig::default())?;
        ctx = next;
        println!("U: {text}");
        println!("S: {}  [{}]", render_or_apologize(&d.template, &pack.rules, None).replace('\n', "\n   "), d.state);
    }
    Ok(())
}
