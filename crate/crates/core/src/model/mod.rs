//! Per-location Gaussian statistics in the embedded feature space and the
//! localized Mahalanobis anomaly score.
//!
//! For every grid location `(i, j)` with training features `x_1..x_N`:
//!
//! ```text
//! μ = (1/N) Σ x_n
//! z_n = Wᵀ (x_n − μ)
//! S = (1/N) Σ z_n z_nᵀ + ε I_k
//! d²(x) = (Wᵀ(x − μ))ᵀ S⁻¹ (Wᵀ(x − μ))
//! ```
//!
//! For the data-independent strategies the `F × F` covariance is never
//! formed; residuals are projected first and only the `k × k` statistics
//! are accumulated.

mod io;

pub use io::{load_model, model_from_bytes, model_to_bytes, save_model, MODEL_FORMAT_VERSION, MODEL_MAGIC};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{
    eigen_embedding, shared_embedding, EigenSide, Embedding, EmbeddingGrid, EmbeddingMatrix,
    Strategy, MAX_EIGEN_FEATURES,
};
use crate::error::{Error, Result};
use crate::features::ScoreMap;
use crate::linalg::{axpy, cholesky, CholeskyFactor, Matrix, SpdMatrix, PRNG_NAME};

/// `n × f × h × w` stack of feature maps, `f32`, C order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    n: usize,
    f: usize,
    h: usize,
    w: usize,
    data: Vec<f32>,
}

impl FeatureTensor {
    pub fn new(n: usize, f: usize, h: usize, w: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != n * f * h * w {
            return Err(Error::ShapeMismatch(format!(
                "tensor ({n}, {f}, {h}, {w}) needs {} values, got {}",
                n * f * h * w,
                data.len()
            )));
        }
        if n == 0 || f == 0 || h == 0 || w == 0 {
            return Err(Error::ShapeMismatch(format!("tensor ({n}, {f}, {h}, {w}) has an empty axis")));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch(format!("non-finite feature value at flat index {pos}")));
        }
        Ok(Self { n, f, h, w, data })
    }

    pub fn zeros(n: usize, f: usize, h: usize, w: usize) -> Self {
        Self {
            n,
            f,
            h,
            w,
            data: vec![0.0; n * f * h * w],
        }
    }

    pub fn from_fn(
        n: usize,
        f: usize,
        h: usize,
        w: usize,
        mut value: impl FnMut(usize, usize, usize, usize) -> f32,
    ) -> Self {
        let mut t = Self::zeros(n, f, h, w);
        for s in 0..n {
            for c in 0..f {
                for i in 0..h {
                    for j in 0..w {
                        let idx = t.offset(s, c, i, j);
                        t.data[idx] = value(s, c, i, j);
                    }
                }
            }
        }
        t
    }

    pub fn samples(&self) -> usize {
        self.n
    }

    pub fn features(&self) -> usize {
        self.f
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.n, self.f, self.h, self.w]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    fn offset(&self, s: usize, c: usize, i: usize, j: usize) -> usize {
        ((s * self.f + c) * self.h + i) * self.w + j
    }

    pub fn get(&self, s: usize, c: usize, i: usize, j: usize) -> f32 {
        self.data[self.offset(s, c, i, j)]
    }

    pub fn set(&mut self, s: usize, c: usize, i: usize, j: usize, value: f32) {
        let idx = self.offset(s, c, i, j);
        self.data[idx] = value;
    }

    /// `h × w` plane of one channel of one sample.
    pub fn channel(&self, s: usize, c: usize) -> &[f32] {
        let start = self.offset(s, c, 0, 0);
        &self.data[start..start + self.h * self.w]
    }

    /// Feature vector of sample `s` at flat location `loc = i·w + j`.
    pub fn feature_vector(&self, s: usize, loc: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.f];
        self.gather_into(s, loc, &mut out);
        out
    }

    fn gather_into(&self, s: usize, loc: usize, out: &mut [f64]) {
        let plane = self.h * self.w;
        let base = s * self.f * plane + loc;
        for (c, o) in out.iter_mut().enumerate() {
            *o = f64::from(self.data[base + c * plane]);
        }
    }

    /// Copy of a single sample as an `n = 1` tensor.
    pub fn image(&self, s: usize) -> FeatureTensor {
        let len = self.f * self.h * self.w;
        FeatureTensor {
            n: 1,
            f: self.f,
            h: self.h,
            w: self.w,
            data: self.data[s * len..(s + 1) * len].to_vec(),
        }
    }
}

fn default_epsilon() -> f64 {
    0.01
}

fn default_sigma() -> f64 {
    4.0
}

fn default_output_size() -> (usize, usize) {
    (256, 256)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Embedded dimension.
    pub k: usize,
    /// Ridge added to the embedded covariance.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
    pub strategy: Strategy,
    /// Standard deviation of the score-map smoothing kernel, in output pixels.
    #[serde(default = "default_sigma")]
    pub smoothing_sigma: f64,
    /// `(height, width)` of the final score maps.
    #[serde(default = "default_output_size")]
    pub output_size: (usize, usize),
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k: 100,
            epsilon: default_epsilon(),
            seed: 0,
            strategy: Strategy::SemiOrthogonal,
            smoothing_sigma: default_sigma(),
            output_size: default_output_size(),
        }
    }
}

impl RunConfig {
    pub fn new(strategy: Strategy, k: usize) -> Self {
        Self {
            strategy,
            k,
            ..Self::default()
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Checks the configuration against a feature size.
    pub fn validate(&self, features: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.k > features {
            return Err(Error::InvalidConfig(format!(
                "k={} exceeds the feature size F={features}",
                self.k
            )));
        }
        if self.strategy == Strategy::Full && self.k != features {
            return Err(Error::InvalidConfig(format!(
                "the full strategy needs k = F = {features}, got k={}",
                self.k
            )));
        }
        if self.strategy.is_per_location() && features > MAX_EIGEN_FEATURES {
            return Err(Error::InvalidConfig(format!(
                "{} materializes F x F covariances per location; F={features} exceeds {MAX_EIGEN_FEATURES}",
                self.strategy
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(self.smoothing_sigma >= 0.0 && self.smoothing_sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "smoothing sigma must be >= 0, got {}",
                self.smoothing_sigma
            )));
        }
        if self.output_size.0 == 0 || self.output_size.1 == 0 {
            return Err(Error::InvalidConfig("output size must be positive".into()));
        }
        Ok(())
    }
}

/// Fitted statistics of one grid location.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationGaussian {
    /// Training mean in the original `F`-dimensional space.
    pub mean: Vec<f64>,
    /// Cholesky factor of the regularized embedded covariance `S`.
    pub chol: CholeskyFactor,
}

impl LocationGaussian {
    /// `S = L Lᵀ`, reconstructed from the stored factor.
    pub fn embedded_cov(&self) -> SpdMatrix {
        self.chol.reconstruct()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub prng: String,
    /// SHA-256 (hex) of the training manifest, when fitted from one.
    pub manifest_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    height: usize,
    width: usize,
    features: usize,
    config: RunConfig,
    embedding: Embedding,
    grid: Vec<LocationGaussian>,
    provenance: Provenance,
}

/// How `Wᵀ r` is evaluated for a given embedding.
enum Projector<'a> {
    Identity,
    Select(Vec<usize>),
    Dense(&'a Matrix),
}

impl<'a> Projector<'a> {
    fn new(w: &'a EmbeddingMatrix) -> Self {
        match w.strategy() {
            Strategy::Full => Projector::Identity,
            Strategy::RandomSelection => match w.selected_indices() {
                Some(idx) => Projector::Select(idx),
                None => Projector::Dense(w.matrix()),
            },
            _ => Projector::Dense(w.matrix()),
        }
    }

    fn project_into(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Projector::Identity => z.copy_from_slice(r),
            Projector::Select(idx) => {
                for (zj, &i) in z.iter_mut().zip(idx) {
                    *zj = r[i];
                }
            }
            Projector::Dense(w) => {
                z.fill(0.0);
                for (c, &rc) in r.iter().enumerate() {
                    if rc != 0.0 {
                        axpy(rc, w.row(c), z);
                    }
                }
            }
        }
    }
}

/// Sample mean and centered residuals (`n × f`, row-major) at one location.
fn centered_samples(train: &FeatureTensor, loc: usize) -> (Vec<f64>, Vec<f64>) {
    let (n, f) = (train.n, train.f);
    let mut rows = vec![0.0; n * f];
    for s in 0..n {
        train.gather_into(s, loc, &mut rows[s * f..(s + 1) * f]);
    }
    let mut mean = vec![0.0; f];
    for row in rows.chunks_exact(f) {
        axpy(1.0, row, &mut mean);
    }
    let inv_n = 1.0 / n as f64;
    mean.iter_mut().for_each(|m| *m *= inv_n);
    for row in rows.chunks_exact_mut(f) {
        for (x, m) in row.iter_mut().zip(&mean) {
            *x -= m;
        }
    }
    (mean, rows)
}

/// `(1/N) Σ z zᵀ + ε I` over the given `n × k` rows.
fn regularized_scatter(z_rows: &[f64], k: usize, n: usize, epsilon: f64) -> SpdMatrix {
    let mut s = Matrix::zeros(k, k);
    for z in z_rows.chunks_exact(k) {
        for a in 0..k {
            let za = z[a];
            if za != 0.0 {
                axpy(za, &z[..=a], &mut s.as_mut_slice()[a * k..a * k + a + 1]);
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    for a in 0..k {
        for b in 0..=a {
            let v = s[(a, b)] * inv_n + if a == b { epsilon } else { 0.0 };
            s[(a, b)] = v;
            s[(b, a)] = v;
        }
    }
    SpdMatrix::symmetrize(s)
}

fn fit_shared_location(
    train: &FeatureTensor,
    loc: usize,
    projector: &Projector<'_>,
    k: usize,
    epsilon: f64,
) -> Result<LocationGaussian> {
    let (mean, residuals) = centered_samples(train, loc);
    let n = train.n;
    let z_rows = match projector {
        Projector::Identity => residuals,
        _ => {
            let mut z = vec![0.0; n * k];
            for (r, zr) in residuals.chunks_exact(train.f).zip(z.chunks_exact_mut(k)) {
                projector.project_into(r, zr);
            }
            z
        }
    };
    let s = regularized_scatter(&z_rows, k, n, epsilon);
    let chol = cholesky(&s)?;
    Ok(LocationGaussian { mean, chol })
}

fn fit_eigen_location(
    train: &FeatureTensor,
    loc: usize,
    k: usize,
    epsilon: f64,
    side: EigenSide,
) -> Result<(EmbeddingMatrix, LocationGaussian)> {
    let (mean, residuals) = centered_samples(train, loc);
    let c = regularized_scatter(&residuals, train.f, train.n, 0.0);
    let w = eigen_embedding(&c, k, side)?;
    let mut s = w.embed_covariance(&c).into_matrix();
    s.add_diagonal(epsilon);
    let chol = cholesky(&SpdMatrix::symmetrize(s))?;
    Ok((w, LocationGaussian { mean, chol }))
}

impl GaussianModel {
    /// Fits the model to a training tensor.
    pub fn fit(train: &FeatureTensor, cfg: &RunConfig) -> Result<Self> {
        Self::fit_with_digest(train, cfg, None)
    }

    /// As [`GaussianModel::fit`], recording the digest of the manifest the
    /// features came from.
    pub fn fit_with_digest(
        train: &FeatureTensor,
        cfg: &RunConfig,
        manifest_digest: Option<String>,
    ) -> Result<Self> {
        if train.n < 2 {
            return Err(Error::InsufficientSamples(train.n));
        }
        cfg.validate(train.f)?;
        let (h, w, k) = (train.h, train.w, cfg.k);
        let locations = h * w;

        let (embedding, grid) = if cfg.strategy.is_per_location() {
            let side = if cfg.strategy == Strategy::EigenLower {
                EigenSide::Lower
            } else {
                EigenSide::Higher
            };
            let fitted: Vec<(EmbeddingMatrix, LocationGaussian)> = (0..locations)
                .into_par_iter()
                .map(|loc| fit_eigen_location(train, loc, k, cfg.epsilon, side))
                .collect::<Result<_>>()?;
            let (mats, grid): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();
            (Embedding::PerLocation(EmbeddingGrid::new(h, w, mats)?), grid)
        } else {
            let emb = shared_embedding(cfg.strategy, train.f, k, cfg.seed)?;
            let projector = Projector::new(&emb);
            let grid = (0..locations)
                .into_par_iter()
                .map(|loc| fit_shared_location(train, loc, &projector, k, cfg.epsilon))
                .collect::<Result<Vec<_>>>()?;
            (Embedding::Shared(emb), grid)
        };

        Ok(Self {
            height: h,
            width: w,
            features: train.f,
            config: cfg.clone(),
            embedding,
            grid,
            provenance: Provenance {
                seed: cfg.seed,
                prng: PRNG_NAME.to_string(),
                manifest_digest,
            },
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn config_mut(&mut self) -> &mut RunConfig {
        &mut self.config
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    pub fn grid(&self) -> &[LocationGaussian] {
        &self.grid
    }

    pub fn location(&self, i: usize, j: usize) -> &LocationGaussian {
        &self.grid[i * self.width + j]
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    fn check_compatible(&self, test: &FeatureTensor) -> Result<()> {
        if test.f != self.features || test.h != self.height || test.w != self.width {
            return Err(Error::ModelMismatch(format!(
                "model expects (F, H, W) = ({}, {}, {}), features are ({}, {}, {})",
                self.features, self.height, self.width, test.f, test.h, test.w
            )));
        }
        Ok(())
    }

    /// Raw `H × W` map of `d = sqrt(d²)` for sample `image` of `test`.
    pub fn score_image(&self, test: &FeatureTensor, image: usize) -> Result<ScoreMap> {
        self.check_compatible(test)?;
        if image >= test.n {
            return Err(Error::ModelMismatch(format!(
                "image index {image} out of range for {} samples",
                test.n
            )));
        }
        let locations = self.height * self.width;
        let shared = match &self.embedding {
            Embedding::Shared(w) => Some(Projector::new(w)),
            Embedding::PerLocation(_) => None,
        };
        let values = (0..locations)
            .into_par_iter()
            .map_init(
                || (vec![0.0; self.features], vec![0.0; self.config.k]),
                |(x, z), loc| {
                    test.gather_into(image, loc, x);
                    let g = &self.grid[loc];
                    for (xi, m) in x.iter_mut().zip(&g.mean) {
                        *xi -= m;
                    }
                    match &shared {
                        Some(p) => p.project_into(x, z),
                        None => Projector::Dense(self.embedding.at(loc).matrix()).project_into(x, z),
                    }
                    g.chol.inverse_quadratic_form(z).map(f64::sqrt)
                },
            )
            .collect::<Result<Vec<f64>>>()?;
        ScoreMap::new(self.height, self.width, values)
    }

    /// Raw score maps for every sample of `test`.
    pub fn score_all(&self, test: &FeatureTensor) -> Result<Vec<ScoreMap>> {
        (0..test.n).map(|s| self.score_image(test, s)).collect()
    }

    pub(crate) fn from_parts(
        height: usize,
        width: usize,
        features: usize,
        config: RunConfig,
        embedding: Embedding,
        grid: Vec<LocationGaussian>,
        provenance: Provenance,
    ) -> Self {
        Self {
            height,
            width,
            features,
            config,
            embedding,
            grid,
            provenance,
        }
    }
}

/// `zᵀ S⁻¹ z` with `z = Wᵀ(x − μ)`; always `>= 0`.
pub fn mahalanobis_sq(x: &[f64], g: &LocationGaussian, w: &EmbeddingMatrix) -> Result<f64> {
    if x.len() != g.mean.len() || x.len() != w.source_dim() {
        return Err(Error::DimensionMismatch {
            expected: g.mean.len(),
            actual: x.len(),
        });
    }
    if w.target_dim() != g.chol.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.chol.dim(),
            actual: w.target_dim(),
        });
    }
    let r: Vec<f64> = x.iter().zip(&g.mean).map(|(a, b)| a - b).collect();
    g.chol.inverse_quadratic_form(&w.project(&r))
}

#[cfg(test)]
mod tests;
