//! Threshold-sweep evaluation of score maps against ground-truth masks:
//! per-region overlap (PRO) and pixel-level ROC-AUC.
//!
//! PRO averages the true-positive rate of every connected ground-truth
//! region (pooled over all images, each region weighted equally), plots it
//! against the global false-positive rate, and integrates up to an FPR
//! limit. The area is divided by the limit so a perfect detector scores 1.

mod labeling;

pub use labeling::{connected_components, GroundTruthMask, RegionLabeling};

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::ScoreMap;

pub const DEFAULT_FPR_LIMIT: f64 = 0.3;
pub const DEFAULT_THRESHOLDS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub fpr: f64,
    pub mean_region_tpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProCurve {
    pub pro: f64,
    pub regions: usize,
    /// Ordered by decreasing threshold, i.e. non-decreasing FPR.
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub pro: f64,
    pub roc_auc: f64,
    pub fpr_limit: f64,
    pub regions: usize,
    pub curve: Vec<CurvePoint>,
}

fn check_pairs(scores: &[ScoreMap], masks: &[GroundTruthMask]) -> Result<()> {
    if scores.len() != masks.len() {
        return Err(Error::PairingError(format!(
            "{} score maps for {} masks",
            scores.len(),
            masks.len()
        )));
    }
    for (idx, (s, m)) in scores.iter().zip(masks).enumerate() {
        if (s.height(), s.width()) != (m.height(), m.width()) {
            return Err(Error::ShapeMismatch(format!(
                "pair {idx}: score map {}x{} vs mask {}x{}",
                s.height(),
                s.width(),
                m.height(),
                m.width()
            )));
        }
    }
    Ok(())
}

/// Quantile thresholds of the pooled scores, descending, with `+∞` first
/// and `−∞` last. Pixels with `score >= threshold` are predicted anomalous.
pub fn quantile_thresholds(scores: &[ScoreMap], count: usize) -> Vec<f64> {
    let mut pooled: Vec<f64> = scores.iter().flat_map(|s| s.values().iter().copied()).collect();
    pooled.sort_unstable_by(f64::total_cmp);
    let mut out = vec![f64::INFINITY];
    if !pooled.is_empty() && count > 0 {
        let last = pooled.len() - 1;
        let mut picked: Vec<f64> = (0..count)
            .map(|t| {
                let idx = if count == 1 {
                    last
                } else {
                    ((t as f64) * last as f64 / (count - 1) as f64).round() as usize
                };
                pooled[idx.min(last)]
            })
            .collect();
        picked.dedup();
        out.extend(picked.into_iter().rev());
    }
    out.push(f64::NEG_INFINITY);
    out
}

/// Area under a `(fpr, y)` polyline over `[0, limit]`, by trapezoids with
/// linear interpolation at the limit, divided by `limit`.
pub fn partial_auc(points: &[(f64, f64)], limit: f64) -> f64 {
    let mut area = 0.0;
    for pair in points.windows(2) {
        let ((x0, y0), (x1, y1)) = (pair[0], pair[1]);
        if x0 >= limit {
            break;
        }
        if x1 <= limit {
            area += (x1 - x0) * (y0 + y1) / 2.0;
        } else {
            let y_cut = y0 + (y1 - y0) * (limit - x0) / (x1 - x0);
            area += (limit - x0) * (y0 + y_cut) / 2.0;
            break;
        }
    }
    area / limit
}

/// PRO curve and its normalized partial area.
pub fn pro_score(
    scores: &[ScoreMap],
    masks: &[GroundTruthMask],
    fpr_limit: f64,
    thresholds: usize,
) -> Result<ProCurve> {
    check_pairs(scores, masks)?;
    if !(fpr_limit > 0.0 && fpr_limit <= 1.0) {
        return Err(Error::InvalidConfig(format!("fpr limit must be in (0, 1], got {fpr_limit}")));
    }
    let thr = quantile_thresholds(scores, thresholds);
    let buckets = thr.len();
    let bucket_of = |score: f64| thr.partition_point(|&t| t > score);

    let mut normal_hist = vec![0u64; buckets];
    let mut anomalous_hist = vec![0u64; buckets];
    // Per-region histograms, pooled across images.
    let mut region_hists: Vec<Vec<u64>> = Vec::new();
    let mut region_sizes: Vec<u64> = Vec::new();

    for (score, mask) in scores.iter().zip(masks) {
        let labeling = connected_components(mask);
        let base = region_hists.len();
        region_hists.extend((0..labeling.region_count).map(|_| vec![0u64; buckets]));
        region_sizes.extend(labeling.regions.iter().map(|r| r.len() as u64));
        for (p, &v) in score.values().iter().enumerate() {
            let b = bucket_of(v);
            match labeling.labels[p] {
                0 => normal_hist[b] += 1,
                label => {
                    anomalous_hist[b] += 1;
                    region_hists[base + label as usize - 1][b] += 1;
                }
            }
        }
    }

    let total_normal: u64 = normal_hist.iter().sum();
    let total_anomalous: u64 = anomalous_hist.iter().sum();
    if region_sizes.is_empty() {
        return Err(Error::NoAnomalousRegion);
    }
    if total_normal == 0 {
        return Err(Error::NoNormalPixel);
    }

    let regions = region_sizes.len();
    let mut cum_normal = 0u64;
    let mut cum_anomalous = 0u64;
    let mut cum_regions = vec![0u64; regions];
    let mut points = Vec::with_capacity(buckets);
    for (b, &threshold) in thr.iter().enumerate() {
        cum_normal += normal_hist[b];
        cum_anomalous += anomalous_hist[b];
        let mut tpr_sum = 0.0;
        for (r, cum) in cum_regions.iter_mut().enumerate() {
            *cum += region_hists[r][b];
            tpr_sum += *cum as f64 / region_sizes[r] as f64;
        }
        points.push(CurvePoint {
            threshold,
            fpr: cum_normal as f64 / total_normal as f64,
            mean_region_tpr: tpr_sum / regions as f64,
            tpr: cum_anomalous as f64 / total_anomalous as f64,
        });
    }

    let polyline: Vec<(f64, f64)> = points.iter().map(|p| (p.fpr, p.mean_region_tpr)).collect();
    Ok(ProCurve {
        pro: partial_auc(&polyline, fpr_limit),
        regions,
        points,
    })
}

/// Pixel-level ROC-AUC via the Mann–Whitney rank statistic; tied scores
/// share their average rank (each tie counts 1/2).
pub fn roc_auc(scores: &[ScoreMap], masks: &[GroundTruthMask]) -> Result<f64> {
    check_pairs(scores, masks)?;
    let mut pixels: Vec<(f64, bool)> = scores
        .iter()
        .zip(masks)
        .flat_map(|(s, m)| s.values().iter().copied().zip(m.data().iter().copied()))
        .collect();
    let positives = pixels.iter().filter(|p| p.1).count();
    let negatives = pixels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }
    pixels.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    let mut positive_rank_sum = 0.0;
    let mut start = 0;
    while start < pixels.len() {
        let mut end = start;
        while end < pixels.len() && pixels[end].0 == pixels[start].0 {
            end += 1;
        }
        // Ranks start..end (1-based: start+1..=end) share their mean.
        let mean_rank = (start + 1 + end) as f64 / 2.0;
        let tied_positives = pixels[start..end].iter().filter(|p| p.1).count();
        positive_rank_sum += mean_rank * tied_positives as f64;
        start = end;
    }
    let p = positives as f64;
    let n = negatives as f64;
    Ok((positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// PRO, ROC-AUC and the shared threshold curve.
pub fn evaluate(
    scores: &[ScoreMap],
    masks: &[GroundTruthMask],
    fpr_limit: f64,
    thresholds: usize,
) -> Result<EvalResult> {
    let curve = pro_score(scores, masks, fpr_limit, thresholds)?;
    let roc_auc = roc_auc(scores, masks)?;
    Ok(EvalResult {
        pro: curve.pro,
        roc_auc,
        fpr_limit,
        regions: curve.regions,
        curve: curve.points,
    })
}

/// CSV with header `threshold,fpr,mean_region_tpr,tpr`.
pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("threshold,fpr,mean_region_tpr,tpr\n");
    for p in points {
        let _ = writeln!(out, "{},{},{},{}", p.threshold, p.fpr, p.mean_region_tpr, p.tpr);
    }
    out
}

pub fn write_curve_csv(path: impl AsRef<Path>, points: &[CurvePoint]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, curve_csv(points)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_case() -> (Vec<ScoreMap>, Vec<GroundTruthMask>) {
        let mut mask = GroundTruthMask::empty(4, 4);
        mask.set(1, 1, true);
        mask.set(1, 2, true);
        mask.set(3, 3, true);
        let values: Vec<f64> = mask.data().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        (vec![ScoreMap::new(4, 4, values).unwrap()], vec![mask])
    }

    #[test]
    fn perfect_detector() {
        let (scores, masks) = square_case();
        let r = evaluate(&scores, &masks, 0.3, 500).unwrap();
        assert_eq!(r.pro, 1.0);
        assert_eq!(r.roc_auc, 1.0);
        assert_eq!(r.regions, 2);
    }

    #[test]
    fn all_ties_give_half_auc() {
        let (_, masks) = square_case();
        let flat = vec![ScoreMap::constant(4, 4, 0.7)];
        assert_eq!(roc_auc(&flat, &masks).unwrap(), 0.5);
    }

    #[test]
    fn inverted_detector_scores_zero_below_limit() {
        let (scores, masks) = square_case();
        let inverted: Vec<ScoreMap> = scores.iter().map(|s| s.map(|v| 1.0 - v).unwrap()).collect();
        let r = evaluate(&inverted, &masks, 0.3, 500).unwrap();
        // Every normal pixel fires before any anomalous one does.
        assert_eq!(r.pro, 0.0);
        assert_eq!(r.roc_auc, 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        let empty = vec![GroundTruthMask::empty(2, 2)];
        let s = vec![ScoreMap::constant(2, 2, 1.0)];
        assert!(matches!(pro_score(&s, &empty, 0.3, 10), Err(Error::NoAnomalousRegion)));
        assert!(matches!(roc_auc(&s, &empty), Err(Error::SingleClass)));
        let full = vec![GroundTruthMask::new(2, 2, vec![true; 4]).unwrap()];
        assert!(matches!(pro_score(&s, &full, 0.3, 10), Err(Error::NoNormalPixel)));
        assert!(matches!(pro_score(&s, &[], 0.3, 10), Err(Error::PairingError(_))));
        let wrong = vec![ScoreMap::constant(3, 2, 1.0)];
        assert!(matches!(pro_score(&wrong, &full, 0.3, 10), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn partial_auc_interpolates_at_the_limit() {
        // y = x on [0, 1]: area over [0, 0.3] is 0.045, normalized 0.15.
        let pts = [(0.0, 0.0), (1.0, 1.0)];
        assert!((partial_auc(&pts, 0.3) - 0.15).abs() < 1e-15);
        let step = [(0.0, 1.0), (0.3, 1.0), (1.0, 1.0)];
        assert!((partial_auc(&step, 0.3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn thresholds_bracket_the_data() {
        let s = vec![ScoreMap::new(1, 4, vec![3.0, 1.0, 2.0, 2.0]).unwrap()];
        let t = quantile_thresholds(&s, 500);
        assert_eq!(t, vec![f64::INFINITY, 3.0, 2.0, 1.0, f64::NEG_INFINITY]);
    }

    #[test]
    fn curve_csv_header() {
        let (scores, masks) = square_case();
        let r = evaluate(&scores, &masks, 0.3, 500).unwrap();
        let csv = curve_csv(&r.curve);
        assert!(csv.starts_with("threshold,fpr,mean_region_tpr,tpr\ninf,0,0,0\n"));
        assert_eq!(csv.lines().count(), r.curve.len() + 1);
    }
}
