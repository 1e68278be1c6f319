//! End-to-end pipeline on a synthetic dataset: write multi-scale features,
//! fit a semi-orthogonal model, score the test split, evaluate PRO and
//! ROC-AUC, and compare against the full-rank model.
//!
//! ```text
//! cargo run --release --example fit_and_score -- [k]
//! ```

use somd::embedding::Strategy;
use somd::features::{concat_multiscale, finalize_scores, LayerManifest, MaskManifest};
use somd::metrics::{evaluate, DEFAULT_FPR_LIMIT, DEFAULT_THRESHOLDS};
use somd::model::{GaussianModel, RunConfig};
use somd::synthetic::{write_synthetic, SyntheticConfig};

fn main() -> somd::Result<()> {
    let k: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(32);
    let dir = tempfile::tempdir().expect("temporary directory");
    let paths = write_synthetic(dir.path(), &SyntheticConfig::default())?;

    let train_manifest = LayerManifest::load(&paths.train_manifest)?;
    let test_manifest = LayerManifest::load(&paths.test_manifest)?;
    let grid = train_manifest.manifest.largest_grid();
    let train = concat_multiscale(&train_manifest, grid)?;
    let test = concat_multiscale(&test_manifest, grid)?;
    let masks: Vec<_> = MaskManifest::load(&paths.mask_manifest)?.into_iter().map(|(_, m)| m).collect();
    println!(
        "train {} x F={} on a {}x{} grid, test {} images",
        train.samples(),
        train.features(),
        grid.0,
        grid.1,
        test.samples()
    );

    for (strategy, k) in [(Strategy::SemiOrthogonal, k), (Strategy::Full, train.features())] {
        let mut cfg = RunConfig::new(strategy, k).with_seed(7);
        cfg.output_size = (64, 64);
        let model = GaussianModel::fit(&train, &cfg)?;
        let scores: Vec<_> = model
            .score_all(&test)?
            .iter()
            .map(|raw| finalize_scores(raw, model.config()))
            .collect();
        let result = evaluate(&scores, &masks, DEFAULT_FPR_LIMIT, DEFAULT_THRESHOLDS)?;
        println!(
            "{strategy:<16} k={k:<4} PRO={:.4} ROC-AUC={:.4} regions={}",
            result.pro, result.roc_auc, result.regions
        );
    }
    Ok(())
}
