//! Feature embeddings `W ∈ R^{F×k}` used to shrink per-location covariances.
//!
//! The central construction is [`semi_orthogonal`]: a Haar-distributed matrix
//! with orthonormal columns, obtained from the QR factorization of a Gaussian
//! matrix with the signs of `diag(R)` folded back into `Q`. The other
//! strategies exist as baselines and ablations.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, reduced_qr, seeded_rng, sym_eig, Matrix, SpdMatrix};

/// Eigenvalues at or below this fraction of the largest one are counted as
/// collapsed when measuring the effective rank of an embedded covariance.
pub const RANK_THRESHOLD: f64 = 1e-4;

/// Largest feature size accepted by the per-location eigen strategies.
pub const MAX_EIGEN_FEATURES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// `W = I_F`; plain Mahalanobis distance.
    Full,
    /// Haar-random orthonormal columns.
    SemiOrthogonal,
    /// `k` distinct columns of `I_F`.
    RandomSelection,
    /// Raw Gaussian matrix, no orthogonalization.
    #[serde(rename = "gaussian")]
    GaussianRandom,
    /// Per-location eigenvectors of the `k` smallest eigenvalues.
    EigenLower,
    /// Per-location eigenvectors of the `k` largest eigenvalues.
    EigenHigher,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Full,
        Strategy::SemiOrthogonal,
        Strategy::RandomSelection,
        Strategy::GaussianRandom,
        Strategy::EigenLower,
        Strategy::EigenHigher,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Full => "full",
            Strategy::SemiOrthogonal => "semi-orthogonal",
            Strategy::RandomSelection => "random-selection",
            Strategy::GaussianRandom => "gaussian",
            Strategy::EigenLower => "eigen-lower",
            Strategy::EigenHigher => "eigen-higher",
        }
    }

    /// Whether each grid location gets its own `W`.
    pub fn is_per_location(self) -> bool {
        matches!(self, Strategy::EigenLower | Strategy::EigenHigher)
    }

    /// Whether `WᵀW = I_k` holds by construction.
    pub fn is_orthonormal(self) -> bool {
        !matches!(self, Strategy::GaussianRandom)
    }

    pub fn is_seeded(self) -> bool {
        matches!(
            self,
            Strategy::SemiOrthogonal | Strategy::RandomSelection | Strategy::GaussianRandom
        )
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.trim().to_ascii_lowercase().replace('_', "-");
        let strategy = match normalized.as_str() {
            "full" | "full-rank" => Strategy::Full,
            "semi-orthogonal" | "semiorthogonal" | "ortho" => Strategy::SemiOrthogonal,
            "random-selection" | "random" | "sampled-features" => Strategy::RandomSelection,
            "gaussian" | "gaussian-random" => Strategy::GaussianRandom,
            "eigen-lower" => Strategy::EigenLower,
            "eigen-higher" => Strategy::EigenHigher,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "unknown strategy {s:?} (expected one of: {})",
                    Strategy::ALL.map(Strategy::name).join(", ")
                )))
            }
        };
        Ok(strategy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenSide {
    Lower,
    Higher,
}

/// A projection `W` (`F × k`) together with how it was made.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    w: Matrix,
    strategy: Strategy,
    seed: Option<u64>,
}

impl EmbeddingMatrix {
    /// Reassembles an embedding from stored parts, checking the
    /// strategy-specific invariants.
    pub fn from_parts(w: Matrix, strategy: Strategy, seed: Option<u64>) -> Result<Self> {
        let (f, k) = w.shape();
        if k == 0 || k > f {
            return Err(Error::InvalidConfig(format!("embedding shape {f}x{k} needs 1 <= k <= F")));
        }
        if strategy == Strategy::Full && (k != f || w != Matrix::identity(f)) {
            return Err(Error::InvalidConfig("full embedding must be the identity".into()));
        }
        let emb = Self { w, strategy, seed };
        if strategy.is_orthonormal() && emb.orthonormality_error() > 1e-10 {
            return Err(Error::InvalidConfig(format!(
                "{strategy} embedding is not semi-orthogonal (error {:e})",
                emb.orthonormality_error()
            )));
        }
        Ok(emb)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.w
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn source_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn target_dim(&self) -> usize {
        self.w.cols()
    }

    /// `Wᵀ x`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.w.t_matvec(x)
    }

    /// `‖WᵀW − I_k‖_max`.
    pub fn orthonormality_error(&self) -> f64 {
        let k = self.target_dim();
        self.w.t_matmul(&self.w).max_abs_diff(&Matrix::identity(k))
    }

    /// `WᵀCW`.
    pub fn embed_covariance(&self, c: &SpdMatrix) -> SpdMatrix {
        c.congruence(&self.w)
    }

    /// Feature indices picked by a random-selection embedding, in column order.
    pub fn selected_indices(&self) -> Option<Vec<usize>> {
        (self.strategy == Strategy::RandomSelection).then(|| {
            (0..self.target_dim())
                .map(|j| (0..self.source_dim()).find(|&i| self.w[(i, j)] == 1.0).unwrap_or(0))
                .collect()
        })
    }
}

fn check_dims(f: usize, k: usize) -> Result<()> {
    if k == 0 || k > f {
        return Err(Error::InvalidConfig(format!(
            "target dimension k={k} must satisfy 1 <= k <= F={f}"
        )));
    }
    Ok(())
}

/// Multiplies column `j` of `q` by `sign(r_jj)`, with `sign(0) = +1`.
///
/// This makes the factorization unique and the resulting `Q` Haar-distributed
/// regardless of the sign convention of the QR routine that produced it.
pub fn haar_sign_correction(q: &Matrix, r: &Matrix) -> Matrix {
    let signs: Vec<f64> = (0..q.cols())
        .map(|j| if r[(j, j)] < 0.0 { -1.0 } else { 1.0 })
        .collect();
    Matrix::from_fn(q.rows(), q.cols(), |i, j| q[(i, j)] * signs[j])
}

/// Haar-random `F × k` matrix with orthonormal columns.
pub fn semi_orthogonal(f: usize, k: usize, seed: u64) -> Result<EmbeddingMatrix> {
    check_dims(f, k)?;
    let omega = gaussian_matrix(f, k, seed);
    let qr = reduced_qr(&omega)?;
    Ok(EmbeddingMatrix {
        w: haar_sign_correction(&qr.q, &qr.r),
        strategy: Strategy::SemiOrthogonal,
        seed: Some(seed),
    })
}

/// `k` distinct indices of `0..f`, uniform over ordered selections
/// (partial Fisher–Yates).
pub fn sample_indices(f: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = seeded_rng(seed);
    let mut pool: Vec<usize> = (0..f).collect();
    for i in 0..k.min(f) {
        let j = rng.random_range(i..f);
        pool.swap(i, j);
    }
    pool.truncate(k.min(f));
    pool
}

/// Columns of `I_F` at [`sample_indices`]; equivalent to keeping `k`
/// random features.
pub fn random_selection(f: usize, k: usize, seed: u64) -> Result<EmbeddingMatrix> {
    check_dims(f, k)?;
    let picks = sample_indices(f, k, seed);
    let mut w = Matrix::zeros(f, k);
    for (j, &i) in picks.iter().enumerate() {
        w[(i, j)] = 1.0;
    }
    Ok(EmbeddingMatrix {
        w,
        strategy: Strategy::RandomSelection,
        seed: Some(seed),
    })
}

/// Unnormalized Gaussian projection.
pub fn gaussian_random(f: usize, k: usize, seed: u64) -> Result<EmbeddingMatrix> {
    check_dims(f, k)?;
    Ok(EmbeddingMatrix {
        w: gaussian_matrix(f, k, seed),
        strategy: Strategy::GaussianRandom,
        seed: Some(seed),
    })
}

/// Eigenvectors of the `k` smallest (`Lower`) or largest (`Higher`)
/// eigenvalues of `c`. Columns follow the ascending eigenvalue order.
pub fn eigen_embedding(c: &SpdMatrix, k: usize, which: EigenSide) -> Result<EmbeddingMatrix> {
    let f = c.dim();
    check_dims(f, k)?;
    let eig = sym_eig(c);
    let (indices, strategy): (Vec<usize>, _) = match which {
        EigenSide::Lower => ((0..k).collect(), Strategy::EigenLower),
        EigenSide::Higher => ((f - k..f).collect(), Strategy::EigenHigher),
    };
    Ok(EmbeddingMatrix {
        w: eig.vectors(&indices),
        strategy,
        seed: None,
    })
}

pub fn full_embedding(f: usize) -> EmbeddingMatrix {
    EmbeddingMatrix {
        w: Matrix::identity(f),
        strategy: Strategy::Full,
        seed: None,
    }
}

/// Builds the single global `W` of a data-independent strategy.
pub fn shared_embedding(strategy: Strategy, f: usize, k: usize, seed: u64) -> Result<EmbeddingMatrix> {
    match strategy {
        Strategy::Full => {
            if k != f {
                return Err(Error::InvalidConfig(format!(
                    "full embedding needs k = F, got k={k}, F={f}"
                )));
            }
            Ok(full_embedding(f))
        }
        Strategy::SemiOrthogonal => semi_orthogonal(f, k, seed),
        Strategy::RandomSelection => random_selection(f, k, seed),
        Strategy::GaussianRandom => gaussian_random(f, k, seed),
        Strategy::EigenLower | Strategy::EigenHigher => Err(Error::InvalidConfig(format!(
            "{strategy} embeddings are data dependent and built per location"
        ))),
    }
}

/// One embedding per grid location, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingGrid {
    height: usize,
    width: usize,
    matrices: Vec<EmbeddingMatrix>,
}

impl EmbeddingGrid {
    pub fn new(height: usize, width: usize, matrices: Vec<EmbeddingMatrix>) -> Result<Self> {
        if matrices.len() != height * width {
            return Err(Error::DimensionMismatch {
                expected: height * width,
                actual: matrices.len(),
            });
        }
        Ok(Self {
            height,
            width,
            matrices,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn matrices(&self) -> &[EmbeddingMatrix] {
        &self.matrices
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Embedding {
    Shared(EmbeddingMatrix),
    PerLocation(EmbeddingGrid),
}

impl Embedding {
    /// The embedding used at flat location index `loc`.
    pub fn at(&self, loc: usize) -> &EmbeddingMatrix {
        match self {
            Embedding::Shared(w) => w,
            Embedding::PerLocation(grid) => &grid.matrices[loc],
        }
    }

    pub fn strategy(&self) -> Strategy {
        match self {
            Embedding::Shared(w) => w.strategy,
            Embedding::PerLocation(grid) => grid
                .matrices
                .first()
                .map_or(Strategy::EigenLower, |w| w.strategy),
        }
    }
}

/// Number of eigenvalues above [`RANK_THRESHOLD`] times the largest.
pub fn effective_rank(eigenvalues: &[f64]) -> usize {
    let max = eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return 0;
    }
    eigenvalues.iter().filter(|&&l| l > RANK_THRESHOLD * max).count()
}
