//! Grid resampling and smoothing for feature planes and score maps.

use crate::error::{Error, Result};
use crate::model::RunConfig;

/// A dense `height × width` field of anomaly scores, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ScoreMap {
    /// Validates shape, finiteness and non-negativity.
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "score map {height}x{width} needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidScores(format!("score {v} is not a finite non-negative value")));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            values: vec![value; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.width + j]
    }

    /// Applies `f` to every score. `f` must keep scores finite and
    /// non-negative.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<ScoreMap> {
        ScoreMap::new(self.height, self.width, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Source sample pair and weight for one destination index, pixel-center
/// convention.
fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    let last = (src - 1) as f64;
    (0..dst)
        .map(|d| {
            let c = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let i0 = c.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, c - i0 as f64)
        })
        .collect()
}

/// Bilinear resize of a row-major `h × w` grid to `out_h × out_w`.
///
/// The source coordinate of destination index `d` is
/// `(d + 0.5)·(src/dst) − 0.5`, clamped to `[0, src − 1]`.
pub fn interpolate_bilinear(grid: &[f64], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    assert_eq!(grid.len(), h * w, "grid size mismatch");
    assert!(h > 0 && w > 0 && out_h > 0 && out_w > 0, "empty grid");
    if (h, w) == (out_h, out_w) {
        return grid.to_vec();
    }
    let rows = axis_taps(h, out_h);
    let cols = axis_taps(w, out_w);
    let mut out = Vec::with_capacity(out_h * out_w);
    for &(r0, r1, ty) in &rows {
        let top = &grid[r0 * w..(r0 + 1) * w];
        let bottom = &grid[r1 * w..(r1 + 1) * w];
        for &(c0, c1, tx) in &cols {
            let upper = top[c0] + (top[c1] - top[c0]) * tx;
            let lower = bottom[c0] + (bottom[c1] - bottom[c0]) * tx;
            out.push(upper + (lower - upper) * ty);
        }
    }
    out
}

/// Normalized Gaussian taps for offsets `−r..=r`, `r = ceil(4σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|t| (-(t * t) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`) of an
/// arbitrary index into `0..n`.
#[inline]
pub fn reflect_index(i: i64, n: usize) -> usize {
    let period = 2 * n as i64;
    let m = i.rem_euclid(period);
    if m < n as i64 {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

fn convolve_rows(src: &[f64], h: usize, w: usize, kernel: &[f64], out: &mut [f64]) {
    let radius = (kernel.len() / 2) as i64;
    for i in 0..h {
        let row = &src[i * w..(i + 1) * w];
        for j in 0..w {
            let mut acc = 0.0;
            for (t, kv) in kernel.iter().enumerate() {
                acc += kv * row[reflect_index(j as i64 + t as i64 - radius, w)];
            }
            out[i * w + j] = acc;
        }
    }
}

fn convolve_cols(src: &[f64], h: usize, w: usize, kernel: &[f64], out: &mut [f64]) {
    let radius = (kernel.len() / 2) as i64;
    out.fill(0.0);
    for i in 0..h {
        let dst = &mut out[i * w..(i + 1) * w];
        for (t, kv) in kernel.iter().enumerate() {
            let r = reflect_index(i as i64 + t as i64 - radius, h);
            for (o, s) in dst.iter_mut().zip(&src[r * w..(r + 1) * w]) {
                *o += kv * s;
            }
        }
    }
}

/// Separable Gaussian blur with reflect padding; `sigma = 0` is the identity.
pub fn gaussian_smooth(map: &ScoreMap, sigma: f64) -> ScoreMap {
    if sigma <= 0.0 {
        return map.clone();
    }
    let (h, w) = (map.height, map.width);
    let kernel = gaussian_kernel(sigma);
    let mut tmp = vec![0.0; h * w];
    let mut out = vec![0.0; h * w];
    convolve_rows(&map.values, h, w, &kernel, &mut tmp);
    convolve_cols(&tmp, h, w, &kernel, &mut out);
    // Convolution with a non-negative kernel cannot go below zero beyond
    // roundoff.
    out.iter_mut().for_each(|v| *v = v.max(0.0));
    ScoreMap {
        height: h,
        width: w,
        values: out,
    }
}

/// Upsamples a raw score map to `cfg.output_size`, then smooths it with
/// `cfg.smoothing_sigma`.
pub fn finalize_scores(raw: &ScoreMap, cfg: &RunConfig) -> ScoreMap {
    let (out_h, out_w) = cfg.output_size;
    let values = interpolate_bilinear(&raw.values, raw.height, raw.width, out_h, out_w);
    let upsampled = ScoreMap {
        height: out_h,
        width: out_w,
        values,
    };
    gaussian_smooth(&upsampled, cfg.smoothing_sigma)
}
