//! Generate the flight table and check its guarantee clauses.
//!
//! ```bash
//! cargo run --example generate_dataset -- 7 200 > packs/flights/flights.csv
//! ```

use pure_dialog::flight::{check_guarantees, generate_dataset, to_store};

fn main() {
    let mut args = std::env::args().skip(1);
    let seed: u32 = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);

    let rows = generate_dataset(seed, n);
    for g in check_guarantees(&rows, 5) {
        eprintln!("{:<5} {}", if g.holds { "ok" } else { "FAIL" }, g.clause);
    }
    print!("{}", to_store(&rows).to_csv());
}
