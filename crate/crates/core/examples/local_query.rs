//! Turn a set of bindings into query constraints and run them against the
//! bundled flight table.
//!
//! ```bash
//! cargo run --example local_query -- Boston Chicago 8:30
//! ```

use pure_dialog::dialog::context::FieldBinding;
use pure_dialog::dialog::DialogueContext;
use pure_dialog::query::{compile_constraints, exec_local, TableStore};
use pure_dialog::value::parse_clock;
use pure_dialog::{load_domain_pack, Value};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../packs/flights");
    let pack = load_domain_pack(root)?;
    let store = TableStore::from_path(pack.dataset_path(root.as_ref()).expect("dataset"))?;

    let args: Vec<String> = std::env::args().skip(1).collect();
    let from = args.first().map(String::as_str).unwrap_or("Boston");
    let to = args.get(1).map(String::as_str).unwrap_or("Chicago");
    let at = Value::Time(args.get(2).and_then(|t| parse_clock(t)).unwrap_or(8 * 60 + 30));

    let mut ctx = DialogueContext::default();
    ctx.bind("departure_city", "city", Value::text(from));
    ctx.bind("arrival_city", "city", Value::text(to));
    ctx.bind("departure_time", "time", at);
    // "around" widens a time to a two-hour window.
    let b: &mut FieldBinding = ctx.bindings.get_mut("departure_time").unwrap();
    b.approx = true;
    b.window = Some(120);

    let constraints = compile_constraints(&ctx, &pack)?;
    for c in &constraints {
        println!("{} {:?} {}", c.column, c.op, c.value);
    }
    let result = exec_local(&store, &constraints)?;
    println!("{} rows", result.count);
    println!("{}", result.columns.join("\t"));
    for row in &result.rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        println!("{}", cells.join("\t"));
    }
    Ok(())
}
