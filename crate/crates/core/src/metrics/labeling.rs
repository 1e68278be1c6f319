//! 8-connected component labeling of binary masks.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl GroundTruthMask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "mask {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    /// Any positive value marks an anomalous pixel (masks stored as 0/1 or
    /// 0/255 both work).
    pub fn from_values(height: usize, width: usize, values: &[f32]) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::ShapeMismatch(format!("mask value {v} is not binary")));
        }
        Self::new(height, width, values.iter().map(|&v| v > 0.0).collect())
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![false; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.width + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.data[i * self.width + j] = value;
    }

    pub fn anomalous_pixels(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionLabeling {
    /// 0 is background, regions are `1..=region_count`.
    pub labels: Vec<u32>,
    pub region_count: usize,
    /// Flat pixel indices of each region, ascending; `regions[r]` is label `r + 1`.
    pub regions: Vec<Vec<usize>>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        // Keep the earlier pixel as root.
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

/// Labels the 8-connected foreground regions of `mask`. Label order follows
/// the row-major position of each region's first pixel.
pub fn connected_components(mask: &GroundTruthMask) -> RegionLabeling {
    let (h, w) = (mask.height, mask.width);
    let mut parent: Vec<usize> = (0..h * w).collect();
    for i in 0..h {
        for j in 0..w {
            let p = i * w + j;
            if !mask.data[p] {
                continue;
            }
            // Already-visited neighbours: W, NW, N, NE.
            if j > 0 && mask.data[p - 1] {
                union(&mut parent, p, p - 1);
            }
            if i > 0 {
                let up = p - w;
                if mask.data[up] {
                    union(&mut parent, p, up);
                }
                if j > 0 && mask.data[up - 1] {
                    union(&mut parent, p, up - 1);
                }
                if j + 1 < w && mask.data[up + 1] {
                    union(&mut parent, p, up + 1);
                }
            }
        }
    }

    let mut labels = vec![0u32; h * w];
    let mut root_label = vec![0u32; h * w];
    let mut regions: Vec<Vec<usize>> = Vec::new();
    for p in 0..h * w {
        if !mask.data[p] {
            continue;
        }
        let root = find(&mut parent, p);
        if root_label[root] == 0 {
            regions.push(Vec::new());
            root_label[root] = regions.len() as u32;
        }
        let label = root_label[root];
        labels[p] = label;
        regions[label as usize - 1].push(p);
    }
    RegionLabeling {
        labels,
        region_count: regions.len(),
        regions,
    }
}
