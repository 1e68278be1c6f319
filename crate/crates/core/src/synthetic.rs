//! Small synthetic datasets in the on-disk feature layout: per-layer NPY
//! tensors with a layer manifest for a train and a test split, plus
//! ground-truth masks for the test split.
//!
//! Normal features are a fixed linear map of a low-dimensional Gaussian
//! latent plus isotropic noise. Every odd test image carries one
//! rectangular defect whose features are shifted along a fixed direction.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::{Error, Result};
use crate::features::{write_npy, write_tensor, LayerEntry, LayerManifest, MaskManifest};
use crate::linalg::{gaussian_matrix, seeded_rng, stream_seed, Matrix};
use crate::model::FeatureTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLayer {
    pub name: String,
    pub features: usize,
    pub height: usize,
    pub width: usize,
}

impl SyntheticLayer {
    pub fn new(name: &str, features: usize, height: usize, width: usize) -> Self {
        Self {
            name: name.into(),
            features,
            height,
            width,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub layers: Vec<SyntheticLayer>,
    pub train_samples: usize,
    pub test_samples: usize,
    pub image_size: usize,
    pub latent_dim: usize,
    pub noise: f64,
    /// Length of the feature shift inside a defect.
    pub defect_strength: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            layers: vec![
                SyntheticLayer::new("layer1", 16, 16, 16),
                SyntheticLayer::new("layer2", 32, 8, 8),
                SyntheticLayer::new("layer3", 64, 4, 4),
            ],
            train_samples: 40,
            test_samples: 8,
            image_size: 64,
            latent_dim: 6,
            noise: 0.3,
            defect_strength: 4.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPaths {
    pub train_manifest: PathBuf,
    pub test_manifest: PathBuf,
    pub mask_manifest: PathBuf,
}

/// Defect rectangle in image pixels: `(top, left, height, width)`.
type Rect = (usize, usize, usize, usize);

fn defect_rect(size: usize, seed: u64) -> Rect {
    let mut rng = seeded_rng(seed);
    let h = rng.random_range(size / 6..=size / 3).max(1);
    let w = rng.random_range(size / 6..=size / 3).max(1);
    (rng.random_range(0..=size - h), rng.random_range(0..=size - w), h, w)
}

fn inside((top, left, h, w): Rect, y: f64, x: f64) -> bool {
    y >= top as f64 && y < (top + h) as f64 && x >= left as f64 && x < (left + w) as f64
}

fn layer_tensor(
    cfg: &SyntheticConfig,
    layer_idx: usize,
    n: usize,
    defects: &[Option<Rect>],
    seed: u64,
) -> FeatureTensor {
    let layer = &cfg.layers[layer_idx];
    let (f, h, w) = (layer.features, layer.height, layer.width);
    let layer_seed = stream_seed(cfg.seed, 100 + layer_idx as u64);
    let mixing = gaussian_matrix(f, cfg.latent_dim, stream_seed(layer_seed, 0));
    let shift: Vec<f64> = {
        let d = gaussian_matrix(1, f, stream_seed(layer_seed, 1)).into_vec();
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        d.iter().map(|v| v / norm * cfg.defect_strength).collect()
    };
    let latent = gaussian_matrix(n * h * w, cfg.latent_dim, stream_seed(seed, 0));
    let noise = gaussian_matrix(n * h * w, f, stream_seed(seed, 1));
    // Rows are (sample, i, j); columns are channels.
    let signal: Matrix = latent.matmul(&mixing.transpose());
    let scale = cfg.image_size as f64;
    FeatureTensor::from_fn(n, f, h, w, |s, c, i, j| {
        let row = (s * h + i) * w + j;
        let mut v = signal[(row, c)] + cfg.noise * noise[(row, c)];
        if let Some(rect) = defects[s] {
            let y = (i as f64 + 0.5) * scale / h as f64;
            let x = (j as f64 + 0.5) * scale / w as f64;
            if inside(rect, y, x) {
                v += shift[c];
            }
        }
        v as f32
    })
}

fn write_split(
    dir: &Path,
    split: &str,
    cfg: &SyntheticConfig,
    n: usize,
    defects: &[Option<Rect>],
) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let split_seed = stream_seed(cfg.seed, if split == "train" { 1 } else { 2 });
    let mut layers = Vec::new();
    for (idx, layer) in cfg.layers.iter().enumerate() {
        let t = layer_tensor(cfg, idx, n, defects, stream_seed(split_seed, idx as u64));
        let file = format!("{}.npy", layer.name);
        write_tensor(dir.join(&file), &t)?;
        layers.push(LayerEntry {
            name: layer.name.clone(),
            path: file,
            shape: t.shape(),
        });
    }
    let manifest = LayerManifest {
        backbone: "synthetic".into(),
        category: "synthetic".into(),
        split: split.into(),
        image_size: [cfg.image_size, cfg.image_size],
        layers,
        images: Some(image_ids(split, n)),
        normalization: None,
    };
    let path = dir.join("manifest.json");
    manifest.save(&path)?;
    Ok(path)
}

fn image_ids(split: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{split}_{i:03}")).collect()
}

/// Writes `train/`, `test/` and the test masks under `dir`.
pub fn write_synthetic(dir: impl AsRef<Path>, cfg: &SyntheticConfig) -> Result<SyntheticPaths> {
    let dir = dir.as_ref();
    let train_defects = vec![None; cfg.train_samples];
    let test_defects: Vec<Option<Rect>> = (0..cfg.test_samples)
        .map(|s| (s % 2 == 1).then(|| defect_rect(cfg.image_size, stream_seed(cfg.seed, 1000 + s as u64))))
        .collect();
    let train_manifest = write_split(&dir.join("train"), "train", cfg, cfg.train_samples, &train_defects)?;
    let test_manifest = write_split(&dir.join("test"), "test", cfg, cfg.test_samples, &test_defects)?;

    let size = cfg.image_size;
    let mut masks = vec![0f32; cfg.test_samples * size * size];
    for (s, rect) in test_defects.iter().enumerate() {
        if let Some(rect) = rect {
            for y in 0..size {
                for x in 0..size {
                    if inside(*rect, y as f64 + 0.5, x as f64 + 0.5) {
                        masks[(s * size + y) * size + x] = 1.0;
                    }
                }
            }
        }
    }
    let test_dir = dir.join("test");
    write_npy(test_dir.join("masks.npy"), &[cfg.test_samples, size, size], &masks)?;
    let mask_manifest = test_dir.join("masks.json");
    MaskManifest {
        category: "synthetic".into(),
        images: image_ids("test", cfg.test_samples),
        path: "masks.npy".into(),
        shape: [cfg.test_samples, size, size],
    }
    .save(&mask_manifest)?;
    Ok(SyntheticPaths {
        train_manifest,
        test_manifest,
        mask_manifest,
    })
}
