//! Independent reference implementations shared by the integration tests.

#![allow(dead_code)]

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use somd::features::ScoreMap;
use somd::metrics::GroundTruthMask;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mask with roughly `density` foreground pixels.
pub fn random_mask(h: usize, w: usize, density: f64, seed: u64) -> GroundTruthMask {
    let mut r = rng(seed);
    GroundTruthMask::new(h, w, (0..h * w).map(|_| r.random_bool(density)).collect()).unwrap()
}

/// Scores that loosely follow the mask, optionally quantized so ties occur.
pub fn random_scores(mask: &GroundTruthMask, quantize: bool, seed: u64) -> ScoreMap {
    let mut r = rng(seed);
    let values = mask
        .data()
        .iter()
        .map(|&a| {
            let v: f64 = r.random::<f64>() + if a { 0.6 } else { 0.0 };
            if quantize {
                (v * 8.0).floor()
            } else {
                v
            }
        })
        .collect();
    ScoreMap::new(mask.height(), mask.width(), values).unwrap()
}

/// Breadth-first 8-connected labeling; labels follow row-major discovery.
pub fn flood_fill_labels(mask: &GroundTruthMask) -> (Vec<u32>, usize) {
    let (h, w) = (mask.height(), mask.width());
    let mut labels = vec![0u32; h * w];
    let mut next = 0u32;
    for start in 0..h * w {
        if !mask.data()[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            let (i, j) = ((p / w) as isize, (p % w) as isize);
            for di in -1..=1 {
                for dj in -1..=1 {
                    let (ni, nj) = (i + di, j + dj);
                    if ni < 0 || nj < 0 || ni >= h as isize || nj >= w as isize {
                        continue;
                    }
                    let q = ni as usize * w + nj as usize;
                    if mask.data()[q] && labels[q] == 0 {
                        labels[q] = next;
                        queue.push_back(q);
                    }
                }
            }
        }
    }
    (labels, next as usize)
}

/// PRO by sweeping every distinct score value as a threshold.
pub fn brute_force_pro(scores: &[ScoreMap], masks: &[GroundTruthMask], limit: f64) -> f64 {
    let mut regions: Vec<Vec<f64>> = Vec::new();
    let mut normal: Vec<f64> = Vec::new();
    for (s, m) in scores.iter().zip(masks) {
        let (labels, count) = flood_fill_labels(m);
        let mut per = vec![Vec::new(); count];
        for (p, &v) in s.values().iter().enumerate() {
            match labels[p] {
                0 => normal.push(v),
                l => per[l as usize - 1].push(v),
            }
        }
        regions.extend(per);
    }
    let mut thresholds: Vec<f64> = scores.iter().flat_map(|s| s.values().iter().copied()).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut sweep = vec![f64::INFINITY];
    sweep.extend(thresholds);
    sweep.push(f64::NEG_INFINITY);

    let points: Vec<(f64, f64)> = sweep
        .iter()
        .map(|&t| {
            let fpr = normal.iter().filter(|&&v| v >= t).count() as f64 / normal.len() as f64;
            let tpr = regions
                .iter()
                .map(|r| r.iter().filter(|&&v| v >= t).count() as f64 / r.len() as f64)
                .sum::<f64>()
                / regions.len() as f64;
            (fpr, tpr)
        })
        .collect();

    let mut area = 0.0;
    for seg in points.windows(2) {
        let ((x0, y0), (x1, y1)) = (seg[0], seg[1]);
        if x0 >= limit {
            break;
        }
        if x1 <= limit {
            area += (x1 - x0) * (y0 + y1) / 2.0;
        } else {
            let y = y0 + (y1 - y0) * (limit - x0) / (x1 - x0);
            area += (limit - x0) * (y0 + y) / 2.0;
            break;
        }
    }
    area / limit
}

/// Pixel ROC-AUC by comparing every anomalous/normal pair.
pub fn pairwise_roc_auc(scores: &[ScoreMap], masks: &[GroundTruthMask]) -> f64 {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (s, m) in scores.iter().zip(masks) {
        for (&v, &a) in s.values().iter().zip(m.data()) {
            if a {
                pos.push(v)
            } else {
                neg.push(v)
            }
        }
    }
    let mut wins = 0.0;
    for &p in &pos {
        for &n in &neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// A random 8×8 evaluation instance with at least one region and one
/// normal pixel: 1 to 3 images.
pub fn metric_instance(seed: u64) -> (Vec<ScoreMap>, Vec<GroundTruthMask>) {
    let mut r = rng(seed);
    let images = r.random_range(1..=3);
    let quantize = r.random_bool(0.5);
    loop {
        let masks: Vec<_> = (0..images)
            .map(|i| random_mask(8, 8, r.random_range(0.1..0.4), seed * 31 + i as u64 + r.random::<u32>() as u64))
            .collect();
        let anomalous: usize = masks.iter().map(|m| m.anomalous_pixels()).sum();
        if anomalous == 0 || anomalous == images * 64 {
            continue;
        }
        let scores = masks
            .iter()
            .enumerate()
            .map(|(i, m)| random_scores(m, quantize, seed * 17 + i as u64))
            .collect();
        return (scores, masks);
    }
}
