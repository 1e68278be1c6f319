//! Draws a Haar-distributed semi-orthogonal embedding and checks its basic
//! properties: orthonormal columns, reproducibility from the seed, and the
//! embedded covariance of a random SPD matrix.
//!
//! ```text
//! cargo run --example semi_orthogonal_embedding -- [f] [k] [seed]
//! ```

use somd::embedding::semi_orthogonal;
use somd::linalg::{gaussian_matrix, sym_eig, SpdMatrix};

fn main() -> somd::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let f = args.first().copied().unwrap_or(448) as usize;
    let k = args.get(1).copied().unwrap_or(100) as usize;
    let seed = args.get(2).copied().unwrap_or(0);

    let w = semi_orthogonal(f, k, seed)?;
    println!("W: {f}x{k}, seed {seed}");
    println!("max |WᵀW - I| = {:.3e}", w.orthonormality_error());
    let again = semi_orthogonal(f, k, seed)?;
    println!("same seed reproduces W bit for bit: {}", again == w);

    // A covariance with a wide spectrum, then its k-dimensional embedding.
    let g = gaussian_matrix(f, f, seed + 1);
    let c = SpdMatrix::symmetrize(g.t_matmul(&g).scale(1.0 / f as f64));
    let s = w.embed_covariance(&c);
    let full = sym_eig(&c).eigenvalues;
    let embedded = sym_eig(&s).eigenvalues;
    println!(
        "C eigenvalues in [{:.3e}, {:.3e}]",
        full[0],
        full[f - 1]
    );
    println!(
        "WᵀCW eigenvalues in [{:.3e}, {:.3e}] (interlaced inside the range above)",
        embedded[0],
        embedded[k - 1]
    );
    Ok(())
}
