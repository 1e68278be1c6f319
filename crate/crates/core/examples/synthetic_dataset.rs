//! Writes a synthetic dataset in the on-disk layout the `somd` binary
//! consumes: `train/manifest.json`, `test/manifest.json` and
//! `test/masks.json`, each with its NPY tensors.
//!
//! ```text
//! cargo run --example synthetic_dataset -- <out-dir> [seed]
//! somd fit --manifest <out-dir>/train/manifest.json --out model.somd --k 32
//! somd score --model model.somd --manifest <out-dir>/test/manifest.json --out scores
//! somd evaluate --scores scores --masks <out-dir>/test/masks.json
//! ```

use somd::synthetic::{write_synthetic, SyntheticConfig};

fn main() -> somd::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "synthetic".into());
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let paths = write_synthetic(&out, &SyntheticConfig { seed, ..Default::default() })?;
    println!("train manifest: {}", paths.train_manifest.display());
    println!("test manifest:  {}", paths.test_manifest.display());
    println!("masks:          {}", paths.mask_manifest.display());
    Ok(())
}
