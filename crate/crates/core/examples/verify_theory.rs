//! Runs every verification suite and prints one line per check.
//!
//! ```text
//! cargo run --release --example verify_theory -- [seed]
//! ```

use somd::verify::{run_suite, Suite};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let reports = run_suite(Suite::All, seed);
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("{} checks, {failed} failed", reports.len());
    if failed > 0 {
        std::process::exit(4);
    }
}
