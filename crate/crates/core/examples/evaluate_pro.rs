//! PRO and ROC-AUC on hand-built score maps: a perfect detector, a noisy
//! one and an inverted one, plus the first rows of the PRO curve.

use somd::features::ScoreMap;
use somd::metrics::{curve_csv, evaluate, GroundTruthMask, DEFAULT_FPR_LIMIT, DEFAULT_THRESHOLDS};

fn main() -> somd::Result<()> {
    let (h, w) = (32, 32);
    let mut mask = GroundTruthMask::empty(h, w);
    for i in 4..10 {
        for j in 4..12 {
            mask.set(i, j, true);
        }
    }
    for i in 20..28 {
        for j in 18..22 {
            mask.set(i, j, true);
        }
    }

    let truth = |i: usize, j: usize| if mask.get(i, j) { 1.0 } else { 0.0 };
    let perfect = ScoreMap::new(h, w, (0..h * w).map(|p| truth(p / w, p % w)).collect())?;
    let noisy = ScoreMap::new(
        h,
        w,
        (0..h * w)
            .map(|p| truth(p / w, p % w) + 1.6 * (((p * 7919) % 97) as f64 / 97.0))
            .collect(),
    )?;
    let inverted = perfect.map(|s| 1.0 - s)?;

    for (name, map) in [("perfect", &perfect), ("noisy", &noisy), ("inverted", &inverted)] {
        let r = evaluate(std::slice::from_ref(map), std::slice::from_ref(&mask), DEFAULT_FPR_LIMIT, DEFAULT_THRESHOLDS)?;
        println!("{name:<9} PRO={:.4} ROC-AUC={:.4} regions={}", r.pro, r.roc_auc, r.regions);
        if name == "noisy" {
            print!("{}", curve_csv(&r.curve[..6]));
        }
    }
    Ok(())
}
