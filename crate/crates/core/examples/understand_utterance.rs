//! Show what the language layer makes of one utterance: tokens, semantic
//! tags, phrase chunks, dialogue acts and the field bindings extracted
//! with no prior context.
//!
//! ```bash
//! cargo run --example understand_utterance -- "from the Big Apple to Dallas around half past six"
//! ```

use pure_dialog::dialog::DialogueContext;
use pure_dialog::load_domain_pack;
use pure_dialog::nlu::understand;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = std::env::args().nth(1).unwrap_or_else(|| "no, I said Dallas, arriving about 10:30".into());
    let pack = load_domain_pack(concat!(env!("CARGO_MANIFEST_DIR"), "/../../packs/flights"))?;
    let (a, x) = understand(&text, &pack, &DialogueContext::default());

    let tokens: Vec<String> = a.tokens.iter().map(|t| format!("{}:{:?}", t.norm, t.category)).collect();
    println!("tokens   {}", tokens.join(" "));
    for t in &a.tags {
        let readings: Vec<String> = t.readings.iter().map(|r| format!("{}={}", r.semantic_class, r.value)).collect();
        let approx = if t.approx { " ~" } else { "" };
        println!("tag      [{}..{}) {:?} -> {}{approx}", t.start, t.end, t.surface, readings.join(" | "));
    }
    for c in &a.chunks {
        let words: Vec<&str> = a.tokens[c.start..c.end].iter().map(|t| t.text.as_str()).collect();
        println!("chunk    {:?} {:?}", c.kind, words.join(" "));
    }
    println!("acts     {:?}", a.acts.acts);
    for b in &x.bindings {
        println!("binding  {} = {}", b.field, b.value);
    }
    for amb in &x.ambiguities {
        let opts: Vec<String> = amb.options.iter().map(|o| format!("{}={}", o.field, o.value)).collect();
        println!("unclear  {:?} {:?}: {}", amb.kind, amb.term, opts.join(", "));
    }
    if let Some(q) = &x.query_type {
        println!("asks for {q}");
    }
    if !x.unknown_terms.is_empty() {
        println!("unknown  {:?}", x.unknown_terms);
    }
    Ok(())
}
