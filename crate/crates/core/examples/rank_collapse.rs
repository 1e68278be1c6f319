//! Embedded spectra of a covariance whose features are duplicated: random
//! channel selection often picks both copies of a feature and loses rank,
//! while semi-orthogonal and Gaussian embeddings keep full rank.
//!
//! ```text
//! cargo run --release --example rank_collapse -- [out.csv]
//! ```

use std::path::PathBuf;

use somd::verify::{rank_collapse_report, spectra_experiment, SpectraParams};

fn main() -> somd::Result<()> {
    let out: Option<PathBuf> = std::env::args().nth(1).map(PathBuf::from);
    let params = SpectraParams {
        f: 32,
        l: 16,
        k: 12,
        n: 200,
        seeds: 100,
        seed: 0,
    };
    let summary = spectra_experiment(params, out.as_deref())?;
    for s in &summary.strategies {
        let mean = s.mean_spectrum();
        println!(
            "{:<17} full rank {:5.1}%  mean spectrum head {:.3e} tail {:.3e}",
            s.strategy.name(),
            100.0 * s.full_rank_fraction(params.k),
            mean[0],
            mean[params.k - 1]
        );
    }
    println!("{}", rank_collapse_report(&summary));
    Ok(())
}
