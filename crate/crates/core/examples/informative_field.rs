//! When a query matches too many rows the system asks for the field that
//! is expected to leave the fewest rows. This prints the expected residual
//! for each open field on the Boston to Chicago morning flights.
//!
//! ```bash
//! cargo run --example informative_field
//! ```

use pure_dialog::dialog::{expected_residual, select_informative_field};
use pure_dialog::query::{exec_local, QueryConstraint, TableStore};
use pure_dialog::{load_domain_pack, Value};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../packs/flights");
    let pack = load_domain_pack(root)?;
    let store = TableStore::from_path(pack.dataset_path(root.as_ref()).expect("dataset"))?;
    let result = exec_local(
        &store,
        &[
            QueryConstraint::eq("depCity", Value::text("Boston")),
            QueryConstraint::eq("arrCity", Value::text("Chicago")),
        ],
    )?;
    println!("{} matches", result.count);

    let open = ["departure_time", "arrival_time", "status"];
    let mut candidates = Vec::new();
    for field in open {
        let column = pack.column_for(field).expect("mapped");
        let idx = result.column_index(column).expect("column present");
        let e = expected_residual(result.rows.iter().map(|r| &r[idx]));
        println!("  {field:<15} E = {e:.2}");
        candidates.push((field.to_string(), idx));
    }
    let pick = select_informative_field(&result.rows, &candidates).expect("some field");
    println!("ask for: {}", pack.label_for(&pick));
    Ok(())
}
