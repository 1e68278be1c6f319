//! Compares every embedding strategy on the same synthetic split: fit time,
//! PRO and ROC-AUC at a fixed k.
//!
//! ```text
//! cargo run --release --example strategy_ablation -- [k]
//! ```

use std::time::Instant;

use somd::embedding::Strategy;
use somd::features::{concat_multiscale, finalize_scores, LayerManifest, MaskManifest};
use somd::metrics::{evaluate, DEFAULT_FPR_LIMIT, DEFAULT_THRESHOLDS};
use somd::model::{GaussianModel, RunConfig};
use somd::synthetic::{write_synthetic, SyntheticConfig};

fn main() -> somd::Result<()> {
    let k: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(24);
    let tmp = tempfile::tempdir().expect("temporary directory");
    let paths = write_synthetic(tmp.path(), &SyntheticConfig::default())?;
    let train_m = LayerManifest::load(&paths.train_manifest)?;
    let grid = train_m.manifest.largest_grid();
    let train = concat_multiscale(&train_m, grid)?;
    let test = concat_multiscale(&LayerManifest::load(&paths.test_manifest)?, grid)?;
    let masks: Vec<_> = MaskManifest::load(&paths.mask_manifest)?.into_iter().map(|(_, m)| m).collect();

    println!("{:<17} {:>5} {:>9} {:>7} {:>8}", "strategy", "k", "fit ms", "PRO", "ROC-AUC");
    for strategy in Strategy::ALL {
        let k = if strategy == Strategy::Full { train.features() } else { k };
        let mut cfg = RunConfig::new(strategy, k).with_seed(1);
        cfg.output_size = (64, 64);
        let start = Instant::now();
        let model = GaussianModel::fit(&train, &cfg)?;
        let fit_ms = start.elapsed().as_secs_f64() * 1e3;
        let scores: Vec<_> = model
            .score_all(&test)?
            .iter()
            .map(|m| finalize_scores(m, model.config()))
            .collect();
        let r = evaluate(&scores, &masks, DEFAULT_FPR_LIMIT, DEFAULT_THRESHOLDS)?;
        println!("{:<17} {k:>5} {fit_ms:>9.2} {:>7.4} {:>8.4}", strategy.name(), r.pro, r.roc_auc);
    }
    Ok(())
}
