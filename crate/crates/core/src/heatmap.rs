//! Grayscale PGM rendering of score maps.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::ScoreMap;

/// Scores at or above this value render white.
pub const HEATMAP_CLAMP: f64 = 10.0;

pub fn gray_level(score: f64) -> u8 {
    (score.clamp(0.0, HEATMAP_CLAMP) / HEATMAP_CLAMP * 255.0).round() as u8
}

/// Binary (P5) PGM with maxval 255.
pub fn pgm_bytes(map: &ScoreMap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", map.width(), map.height()).into_bytes();
    out.extend(map.values().iter().map(|&s| gray_level(s)));
    out
}

pub fn write_pgm(path: impl AsRef<Path>, map: &ScoreMap) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, pgm_bytes(map)).map_err(|e| Error::io(path, e))
}
