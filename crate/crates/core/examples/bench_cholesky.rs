//! Times the batched Cholesky stage for a reduced and a full embedding size
//! on the same grid.
//!
//! ```text
//! cargo run --release --example bench_cholesky -- [grid] [f] [k]
//! ```

use somd::bench::{batched_cholesky, spd_pool, CHOLESKY_POOL};

fn main() -> somd::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let grid = args.first().copied().unwrap_or(64);
    let f = args.get(1).copied().unwrap_or(448);
    let k = args.get(2).copied().unwrap_or(100);
    let locations = grid * grid;

    let reduced = batched_cholesky(&spd_pool(k, CHOLESKY_POOL, 1), locations)?;
    let full = batched_cholesky(&spd_pool(f, CHOLESKY_POOL, 2), locations)?;
    let speedup = full.as_secs_f64() / reduced.as_secs_f64();
    let predicted = (f as f64 / k as f64).powi(3);
    println!("{grid}x{grid} grid, {locations} factorizations");
    println!("k={k:<4} {:>10.1} ms", reduced.as_secs_f64() * 1e3);
    println!("k={f:<4} {:>10.1} ms", full.as_secs_f64() * 1e3);
    println!("speedup {speedup:.1}x (cubic prediction {predicted:.1}x)");
    Ok(())
}
