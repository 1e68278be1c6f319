//! Feature tensor I/O, multi-scale concatenation and score-map
//! post-processing.

pub mod npy;
mod resample;

pub use npy::{npy_bytes, parse_npy, read_npy, write_npy, NpyArray};
pub use resample::{
    finalize_scores, gaussian_kernel, gaussian_smooth, interpolate_bilinear, reflect_index, ScoreMap,
};

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::GroundTruthMask;
use crate::model::FeatureTensor;

/// Reads an `(n, f, h, w)` `<f4` tensor.
pub fn read_tensor(path: impl AsRef<Path>) -> Result<FeatureTensor> {
    let path = path.as_ref();
    let arr = read_npy(path)?;
    match arr.shape[..] {
        [n, f, h, w] => FeatureTensor::new(n, f, h, w, arr.data),
        _ => Err(Error::ShapeMismatch(format!(
            "{}: expected a 4-D (n, f, h, w) tensor, got shape {:?}",
            path.display(),
            arr.shape
        ))),
    }
}

pub fn write_tensor(path: impl AsRef<Path>, t: &FeatureTensor) -> Result<()> {
    write_npy(path, &t.shape(), t.data())
}

/// Writes a score map as a 2-D `<f4` array.
pub fn write_score_map(path: impl AsRef<Path>, map: &ScoreMap) -> Result<()> {
    let data: Vec<f32> = map.values().iter().map(|&v| v as f32).collect();
    write_npy(path, &[map.height(), map.width()], &data)
}

pub fn read_score_map(path: impl AsRef<Path>) -> Result<ScoreMap> {
    let path = path.as_ref();
    let arr = read_npy(path)?;
    match arr.shape[..] {
        [h, w] => ScoreMap::new(h, w, arr.data.iter().map(|&v| f64::from(v)).collect()),
        _ => Err(Error::ShapeMismatch(format!(
            "{}: expected a 2-D score map, got shape {:?}",
            path.display(),
            arr.shape
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub name: String,
    /// Relative paths resolve against the manifest's directory.
    pub path: String,
    /// `[n, f, h, w]`.
    pub shape: [usize; 4],
}

/// Description of one extracted split: which backbone layers feed the
/// concatenated feature map and where their tensors live.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerManifest {
    pub backbone: String,
    pub category: String,
    pub split: String,
    /// `[height, width]` of the input images.
    pub image_size: [usize; 2],
    pub layers: Vec<LayerEntry>,
    /// Per-sample identifiers, in tensor order. Optional; defaults to
    /// zero-padded indices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<Vec<String>>,
    /// Per-channel input normalization applied by the extractor, kept for
    /// provenance only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// A manifest together with where it was read from.
#[derive(Debug, Clone)]
pub struct LoadedManifest {
    pub manifest: LayerManifest,
    pub base_dir: PathBuf,
    /// SHA-256 (hex) of the manifest file bytes.
    pub digest: String,
}

impl LayerManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<LoadedManifest> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let manifest: LayerManifest = serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))?;
        manifest.validate()?;
        Ok(LoadedManifest {
            manifest,
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            digest: hex::encode(Sha256::digest(&bytes)),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_vec_pretty(self).map_err(|e| Error::json(path, e))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .layers
            .first()
            .ok_or_else(|| Error::ShapeMismatch("manifest lists no layers".into()))?;
        let n = first.shape[0];
        for layer in &self.layers {
            if layer.shape[0] != n {
                return Err(Error::ShapeMismatch(format!(
                    "layer {} has {} samples, layer {} has {n}",
                    layer.name, layer.shape[0], first.name
                )));
            }
            if layer.shape.contains(&0) {
                return Err(Error::ShapeMismatch(format!("layer {} has an empty axis", layer.name)));
            }
        }
        if let Some(images) = &self.images {
            if images.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "manifest lists {} image ids for {n} samples",
                    images.len()
                )));
            }
        }
        if self.image_size[0] == 0 || self.image_size[1] == 0 {
            return Err(Error::ShapeMismatch("image_size must be positive".into()));
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        self.layers.first().map_or(0, |l| l.shape[0])
    }

    /// Total channel count of the concatenated feature map.
    pub fn total_features(&self) -> usize {
        self.layers.iter().map(|l| l.shape[1]).sum()
    }

    /// Largest layer grid, the default concatenation target.
    pub fn largest_grid(&self) -> (usize, usize) {
        self.layers
            .iter()
            .map(|l| (l.shape[2], l.shape[3]))
            .max_by_key(|&(h, w)| h * w)
            .unwrap_or((1, 1))
    }

    pub fn image_ids(&self) -> Vec<String> {
        match &self.images {
            Some(ids) => ids.clone(),
            None => (0..self.samples()).map(|i| format!("{i:06}")).collect(),
        }
    }
}

/// Bilinearly resizes every plane of every layer to `target_hw` and stacks
/// the layers along the channel axis, in order.
pub fn concat_layers(layers: &[FeatureTensor], target_hw: (usize, usize)) -> Result<FeatureTensor> {
    let first = layers
        .first()
        .ok_or_else(|| Error::ShapeMismatch("no layers to concatenate".into()))?;
    let n = first.samples();
    if let Some(bad) = layers.iter().find(|l| l.samples() != n) {
        return Err(Error::ShapeMismatch(format!(
            "layers disagree on sample count ({} vs {n})",
            bad.samples()
        )));
    }
    let (th, tw) = target_hw;
    if th == 0 || tw == 0 {
        return Err(Error::ShapeMismatch("target grid must be non-empty".into()));
    }
    let total_f: usize = layers.iter().map(FeatureTensor::features).sum();
    let plane = th * tw;
    let mut data = vec![0.0f32; n * total_f * plane];
    for s in 0..n {
        let mut channel_offset = 0;
        for layer in layers {
            let (h, w) = (layer.height(), layer.width());
            for c in 0..layer.features() {
                let dst_start = (s * total_f + channel_offset + c) * plane;
                let dst = &mut data[dst_start..dst_start + plane];
                let src = layer.channel(s, c);
                if (h, w) == (th, tw) {
                    dst.copy_from_slice(src);
                } else {
                    let src64: Vec<f64> = src.iter().map(|&v| f64::from(v)).collect();
                    let resized = interpolate_bilinear(&src64, h, w, th, tw);
                    for (d, v) in dst.iter_mut().zip(resized) {
                        *d = v as f32;
                    }
                }
            }
            channel_offset += layer.features();
        }
    }
    FeatureTensor::new(n, total_f, th, tw, data)
}

/// Loads every layer of a manifest and concatenates them on `target_hw`.
pub fn concat_multiscale(loaded: &LoadedManifest, target_hw: (usize, usize)) -> Result<FeatureTensor> {
    let mut layers = Vec::with_capacity(loaded.manifest.layers.len());
    for entry in &loaded.manifest.layers {
        let path = loaded.base_dir.join(&entry.path);
        let t = read_tensor(&path)?;
        if t.shape() != entry.shape {
            return Err(Error::ShapeMismatch(format!(
                "{}: tensor shape {:?} disagrees with manifest shape {:?}",
                path.display(),
                t.shape(),
                entry.shape
            )));
        }
        layers.push(t);
    }
    concat_layers(&layers, target_hw)
}

/// Ground-truth masks for a test split: one `(n, h, w)` array plus the
/// image ids that pair each mask with a score map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskManifest {
    #[serde(default)]
    pub category: String,
    pub images: Vec<String>,
    pub path: String,
    /// `[n, h, w]`.
    pub shape: [usize; 3],
}

impl MaskManifest {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_vec_pretty(self).map_err(|e| Error::json(path, e))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    /// Reads the manifest and its mask array; returns `(id, mask)` pairs.
    pub fn load(path: impl AsRef<Path>) -> Result<Vec<(String, GroundTruthMask)>> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let manifest: MaskManifest = serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let arr = read_npy(base.join(&manifest.path))?;
        let [n, h, w] = manifest.shape;
        if arr.shape != [n, h, w] {
            return Err(Error::ShapeMismatch(format!(
                "mask array shape {:?} disagrees with manifest shape {:?}",
                arr.shape, manifest.shape
            )));
        }
        if manifest.images.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "mask manifest lists {} ids for {n} masks",
                manifest.images.len()
            )));
        }
        manifest
            .images
            .into_iter()
            .enumerate()
            .map(|(s, id)| {
                let plane = &arr.data[s * h * w..(s + 1) * h * w];
                Ok((id, GroundTruthMask::from_values(h, w, plane)?))
            })
            .collect()
    }
}
