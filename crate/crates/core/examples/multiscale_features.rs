//! Reads a layer manifest, resizes every layer to the largest grid and
//! stacks them into one feature tensor, showing how channels line up.
//!
//! ```text
//! cargo run --example multiscale_features -- [manifest.json]
//! ```

use somd::features::{concat_multiscale, LayerManifest};
use somd::synthetic::{write_synthetic, SyntheticConfig};

fn main() -> somd::Result<()> {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let manifest_path = match std::env::args().nth(1) {
        Some(p) => p.into(),
        None => write_synthetic(tmp.path(), &SyntheticConfig::default())?.train_manifest,
    };
    let loaded = LayerManifest::load(&manifest_path)?;
    let m = &loaded.manifest;
    println!("{} / {} / {} (digest {})", m.backbone, m.category, m.split, &loaded.digest[..12]);
    let mut offset = 0;
    for layer in &m.layers {
        let [n, f, h, w] = layer.shape;
        println!(
            "  {:<8} {n} x {f:>4} x {h:>3} x {w:>3}  -> channels {offset}..{}",
            layer.name,
            offset + f
        );
        offset += f;
    }
    let grid = m.largest_grid();
    let t = concat_multiscale(&loaded, grid)?;
    println!("concatenated: {:?} (F = {})", t.shape(), m.total_features());
    Ok(())
}
