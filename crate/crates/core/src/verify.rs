//! Numerical certification of the low-rank precision approximation.
//!
//! Each check draws independent trials from `(seed, trial index)` streams,
//! runs them in parallel and folds the outcome into a [`VerifyReport`].
//! Checks never fail with an error; a trial that hits a numerical failure is
//! counted as a violation and described in the report notes.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{
    eigen_embedding, effective_rank, semi_orthogonal, shared_embedding, EigenSide, EmbeddingMatrix,
    Strategy,
};
use crate::error::{Error, Result};
use crate::linalg::{
    cholesky, gaussian_matrix, matrix_norms, seeded_rng, stream_seed, sym_eig, Matrix, SpdMatrix,
};
use crate::model::{FeatureTensor, GaussianModel, RunConfig};

/// Log-uniform eigenvalue range of generated test matrices.
pub const SPECTRUM_RANGE: (f64, f64) = (1e-2, 1e2);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub check: String,
    pub instance: String,
    pub trials: usize,
    /// Worst value seen across trials (a deviation, a margin or a count,
    /// depending on the check).
    pub observed: f64,
    /// What `observed` is compared against.
    pub bound: f64,
    pub tolerance: f64,
    pub violations: usize,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl VerifyReport {
    fn from_outcomes(
        check: &str,
        instance: String,
        bound: f64,
        tolerance: f64,
        outcomes: Vec<Result<f64>>,
    ) -> Self {
        let trials = outcomes.len();
        let mut observed = f64::NEG_INFINITY;
        let mut violations = 0;
        let mut notes = Vec::new();
        for (t, outcome) in outcomes.into_iter().enumerate() {
            match outcome {
                Ok(v) => {
                    observed = observed.max(v);
                    if !(v <= bound + tolerance) {
                        violations += 1;
                    }
                }
                Err(e) => {
                    violations += 1;
                    notes.push(format!("trial {t}: {e}"));
                }
            }
        }
        if trials == 0 {
            observed = 0.0;
        }
        Self {
            check: check.to_string(),
            instance,
            trials,
            observed,
            bound,
            tolerance,
            violations,
            passed: violations == 0,
            notes,
        }
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:<22} {:<44} trials={:<5} observed={:.3e} bound={:.3e} tol={:.0e} violations={}",
            if self.passed { "PASS" } else { "FAIL" },
            self.check,
            self.instance,
            self.trials,
            self.observed,
            self.bound,
            self.tolerance,
            self.violations
        )?;
        for note in &self.notes {
            write!(f, "\n       note: {note}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    Frobenius,
    Spectral,
}

impl Norm {
    pub fn name(self) -> &'static str {
        match self {
            Norm::Frobenius => "frobenius",
            Norm::Spectral => "spectral",
        }
    }

    /// Squared norm of a (numerically) symmetric matrix.
    pub fn squared(self, m: &Matrix) -> f64 {
        match self {
            Norm::Frobenius => m.frobenius().powi(2),
            Norm::Spectral => {
                let sym = SpdMatrix::symmetrize(m.clone()).into_matrix();
                matrix_norms(&sym).spectral.powi(2)
            }
        }
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frobenius" => Ok(Norm::Frobenius),
            "spectral" => Ok(Norm::Spectral),
            other => Err(Error::InvalidConfig(format!("unknown norm {other:?}"))),
        }
    }
}

/// SPD matrix with a known eigendecomposition `C = Q diag(λ) Qᵀ`.
#[derive(Debug, Clone)]
pub struct TestSpd {
    pub c: SpdMatrix,
    /// Orthogonal; column `i` pairs with `eigenvalues[i]`.
    pub q: Matrix,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
}

impl TestSpd {
    pub fn from_spectrum(q: Matrix, mut eigenvalues: Vec<f64>) -> Self {
        let f = q.rows();
        // Sort eigenpairs ascending.
        let mut order: Vec<usize> = (0..f).collect();
        order.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]));
        let q = q.select_columns(&order);
        eigenvalues = order.iter().map(|&i| eigenvalues[i]).collect();
        let c = SpdMatrix::symmetrize(spectral_sum(&q, &eigenvalues, &(0..f).collect::<Vec<_>>(), |l| l));
        Self { c, q, eigenvalues }
    }

    /// Haar eigenvectors and a log-uniform spectrum in [`SPECTRUM_RANGE`].
    pub fn random(f: usize, seed: u64) -> Self {
        let q = semi_orthogonal(f, f, stream_seed(seed, 0))
            .expect("square Gaussian matrices are full rank")
            .matrix()
            .clone();
        let mut rng = seeded_rng(stream_seed(seed, 1));
        let (lo, hi) = (SPECTRUM_RANGE.0.log10(), SPECTRUM_RANGE.1.log10());
        let eigenvalues = (0..f).map(|_| 10f64.powf(rng.random_range(lo..hi))).collect();
        Self::from_spectrum(q, eigenvalues)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn inverse(&self) -> Matrix {
        self.partial_inverse(&(0..self.dim()).collect::<Vec<_>>())
    }

    /// `Σ_{i ∈ indices} q_i q_iᵀ / λ_i`.
    pub fn partial_inverse(&self, indices: &[usize]) -> Matrix {
        spectral_sum(&self.q, &self.eigenvalues, indices, |l| 1.0 / l)
    }

    pub fn condition_number(&self) -> f64 {
        self.eigenvalues[self.dim() - 1] / self.eigenvalues[0]
    }
}

fn spectral_sum(q: &Matrix, eigenvalues: &[f64], indices: &[usize], g: impl Fn(f64) -> f64) -> Matrix {
    let f = q.rows();
    let mut out = Matrix::zeros(f, f);
    let data = out.as_mut_slice();
    for &i in indices {
        let s = g(eigenvalues[i]);
        let col = q.column(i);
        for a in 0..f {
            let sa = s * col[a];
            for b in 0..f {
                data[a * f + b] += sa * col[b];
            }
        }
    }
    out
}

/// `W (WᵀCW)⁻¹ Wᵀ`.
pub fn approximate_precision(c: &SpdMatrix, w: &Matrix) -> Result<Matrix> {
    let s = c.congruence(w);
    let s_inv = cholesky(&s)?.inverse();
    Ok(w.matmul(&s_inv).matmul(&w.transpose()))
}

/// `‖C⁻¹ − W(WᵀCW)⁻¹Wᵀ‖_F / ‖C⁻¹‖_F` with `C⁻¹` from a Cholesky inverse.
pub fn precision_identity_error(c: &SpdMatrix, w: &Matrix) -> Result<f64> {
    let inv = cholesky(c)?.inverse();
    let approx = approximate_precision(c, w)?;
    Ok(inv.sub(&approx).frobenius() / inv.frobenius())
}

fn run_trials(trials: usize, seed: u64, trial: impl Fn(u64) -> Result<f64> + Sync) -> Vec<Result<f64>> {
    (0..trials)
        .into_par_iter()
        .map(|t| trial(stream_seed(seed, t as u64)))
        .collect()
}

/// `n × f` samples with correlated channels, as a 1×1 feature grid.
fn correlated_samples(n: usize, f: usize, seed: u64) -> FeatureTensor {
    let x = gaussian_matrix(n, f, stream_seed(seed, 0));
    let mix = gaussian_matrix(f, f, stream_seed(seed, 1)).scale(1.0 / (f as f64).sqrt());
    let mut mixed = x.matmul(&mix);
    // Keep each sample distinct from a pure rotation of white noise.
    for (idx, v) in mixed.as_mut_slice().iter_mut().enumerate() {
        *v += 0.5 * x.as_slice()[idx];
    }
    FeatureTensor::new(n, f, 1, 1, mixed.as_slice().iter().map(|&v| v as f32).collect())
        .expect("samples are finite")
}

/// Mean training squared distance must equal `k` when `ε = 0`.
pub fn check_expectation(f: usize, n: usize, k: usize, trials: usize, seed: u64) -> VerifyReport {
    check_expectation_with(Strategy::SemiOrthogonal, f, n, k, trials, seed)
}

/// [`check_expectation`] with any orthonormal strategy, including the
/// per-location eigen embeddings.
pub fn check_expectation_with(
    strategy: Strategy,
    f: usize,
    n: usize,
    k: usize,
    trials: usize,
    seed: u64,
) -> VerifyReport {
    let outcomes = run_trials(trials, seed, |s| {
        let train = correlated_samples(n, f, s);
        let cfg = RunConfig::new(strategy, k).with_epsilon(0.0).with_seed(stream_seed(s, 2));
        let model = GaussianModel::fit(&train, &cfg)?;
        let mean_sq = model
            .score_all(&train)?
            .iter()
            .map(|m| m.values()[0].powi(2))
            .sum::<f64>()
            / n as f64;
        Ok((mean_sq - k as f64).abs() / k as f64)
    });
    VerifyReport::from_outcomes(
        "expectation",
        format!("{strategy} f={f} n={n} k={k}"),
        0.0,
        1e-6,
        outcomes,
    )
}

/// Square orthogonal `W` reproduces the exact precision matrix, both as a
/// matrix identity and through the fit/score pipeline.
pub fn check_orthogonal_invariance(f: usize, n: usize, trials: usize, seed: u64) -> VerifyReport {
    let outcomes = run_trials(trials, seed, |s| {
        let spd = TestSpd::random(f, stream_seed(s, 0));
        let w = semi_orthogonal(f, f, stream_seed(s, 1))?;
        let identity_err = precision_identity_error(&spd.c, w.matrix())?;

        let train = correlated_samples(n, f, stream_seed(s, 2));
        let test = correlated_samples(4, f, stream_seed(s, 3));
        let full = GaussianModel::fit(&train, &RunConfig::new(Strategy::Full, f))?;
        let ortho = GaussianModel::fit(
            &train,
            &RunConfig::new(Strategy::SemiOrthogonal, f).with_seed(stream_seed(s, 4)),
        )?;
        let mut score_err = 0.0f64;
        for (a, b) in full.score_all(&test)?.iter().zip(ortho.score_all(&test)?.iter()) {
            for (x, y) in a.values().iter().zip(b.values()) {
                score_err = score_err.max((x - y).abs() / x.abs().max(f64::MIN_POSITIVE));
            }
        }
        Ok(identity_err.max(score_err))
    });
    VerifyReport::from_outcomes("orthogonal-invariance", format!("f={f} n={n}"), 0.0, 1e-8, outcomes)
}

/// The three errors of the sandwich bound for one matrix and one `W`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sandwich {
    pub lower: f64,
    pub mid: f64,
    pub upper: f64,
}

impl Sandwich {
    pub fn compute(spd: &TestSpd, w: &Matrix, norm: Norm) -> Result<Self> {
        let (f, k) = w.shape();
        let inv = spd.inverse();
        let smallest: Vec<usize> = (0..k).collect();
        let largest: Vec<usize> = (f - k..f).collect();
        let lower = norm.squared(&inv.sub(&spd.partial_inverse(&smallest)));
        let upper = norm.squared(&inv.sub(&spd.partial_inverse(&largest)));
        let mid = norm.squared(&inv.sub(&approximate_precision(&spd.c, w)?));
        Ok(Self { lower, mid, upper })
    }

    /// Largest relative amount by which either inequality is broken
    /// (negative when both hold with room to spare).
    pub fn excess(&self) -> f64 {
        let scale = self.upper.abs().max(f64::MIN_POSITIVE);
        ((self.lower - self.mid) / scale).max((self.mid - self.upper) / scale)
    }
}

pub const SANDWICH_SLACK: f64 = 1e-9;

pub fn check_error_bounds(f: usize, k: usize, trials: usize, seed: u64, norm: Norm) -> VerifyReport {
    error_bounds(f, k, trials, seed, norm, None)
}

/// Like [`check_error_bounds`], but the smallest eigenvalue of every test
/// matrix is replaced by `min_eigenvalue`.
pub fn check_error_bounds_near_singular(
    f: usize,
    k: usize,
    trials: usize,
    seed: u64,
    norm: Norm,
    min_eigenvalue: f64,
) -> VerifyReport {
    error_bounds(f, k, trials, seed, norm, Some(min_eigenvalue))
}

fn error_bounds(
    f: usize,
    k: usize,
    trials: usize,
    seed: u64,
    norm: Norm,
    min_eigenvalue: Option<f64>,
) -> VerifyReport {
    let make = |s: u64| {
        let spd = TestSpd::random(f, stream_seed(s, 0));
        match min_eigenvalue {
            Some(m) => {
                let mut eig = spd.eigenvalues.clone();
                eig[0] = m;
                TestSpd::from_spectrum(spd.q, eig)
            }
            None => spd,
        }
    };
    let outcomes = run_trials(trials, seed, |s| {
        let spd = make(s);
        let w = semi_orthogonal(f, k, stream_seed(s, 1))?;
        Ok(Sandwich::compute(&spd, w.matrix(), norm)?.excess())
    });
    let mut instance = format!("{} f={f} k={k}", norm.name());
    if let Some(m) = min_eigenvalue {
        instance.push_str(&format!(" min_eig={m:.0e}"));
    }
    let mut report = VerifyReport::from_outcomes("error-bounds", instance, 0.0, SANDWICH_SLACK, outcomes);
    let worst_cond = (0..trials)
        .map(|t| make(stream_seed(seed, t as u64)).condition_number())
        .fold(0.0f64, f64::max);
    if worst_cond > 1e6 {
        report
            .notes
            .push(format!("ill-conditioned inputs: condition number up to {worst_cond:.2e}"));
    }
    report
}

/// Error of the approximation when `C = αI`; every semi-orthogonal `W` gives
/// `(f − k)/α²` (Frobenius²) or `1/α²` (spectral², `k < f`).
pub fn flat_spectrum_error(f: usize, k: usize, alpha: f64) -> (f64, f64) {
    let a2 = alpha * alpha;
    let spectral = if k < f { 1.0 / a2 } else { 0.0 };
    ((f - k) as f64 / a2, spectral)
}

pub fn check_flat_eigenvalues(
    f: usize,
    k: usize,
    alpha: f64,
    trials: usize,
    seed: u64,
    norm: Norm,
) -> VerifyReport {
    let (fro, spec) = flat_spectrum_error(f, k, alpha);
    let target = match norm {
        Norm::Frobenius => fro,
        Norm::Spectral => spec,
    };
    let c = SpdMatrix::symmetrize(Matrix::identity(f).scale(alpha));
    let outcomes = run_trials(trials, seed, |s| {
        let w = semi_orthogonal(f, k, s)?;
        let inv = Matrix::identity(f).scale(1.0 / alpha);
        let err = norm.squared(&inv.sub(&approximate_precision(&c, w.matrix())?));
        Ok((err - target).abs() / target.max(1.0))
    });
    let mut report = VerifyReport::from_outcomes(
        "flat-eigenvalues",
        format!("{} f={f} k={k} alpha={alpha}", norm.name()),
        0.0,
        1e-9,
        outcomes,
    );
    // The same error with a single power of 1/alpha, for comparison.
    let single_power = target * alpha;
    report.notes.push(format!(
        "expected {target:.12e}; a 1/alpha scaling would give {single_power:.12e}"
    ));
    report
}

/// Eigen-lower error must not exceed that of any sampled semi-orthogonal
/// `W`, in both norms. Each of `instances` draws a fresh test matrix.
pub fn check_svd_optimality(
    f: usize,
    k: usize,
    instances: usize,
    random_w_count: usize,
    seed: u64,
) -> VerifyReport {
    let outcomes = run_trials(instances, seed, |s| {
        let spd = TestSpd::random(f, stream_seed(s, 0));
        optimality_excess(&spd, k, random_w_count, stream_seed(s, 1))
    });
    VerifyReport::from_outcomes(
        "svd-optimality",
        format!("f={f} k={k} w_per_instance={random_w_count}"),
        0.0,
        SANDWICH_SLACK,
        outcomes,
    )
}

/// Largest amount by which the eigen-lower error exceeds a random `W`'s
/// error, over both norms, relative to `‖C⁻¹‖²`.
pub fn optimality_excess(spd: &TestSpd, k: usize, random_w_count: usize, seed: u64) -> Result<f64> {
    let inv = spd.inverse();
    let lower = eigen_embedding(&spd.c, k, EigenSide::Lower)?;
    let best = approximate_precision(&spd.c, lower.matrix())?;
    let e_best = inv.sub(&best);
    let norms = [Norm::Frobenius, Norm::Spectral];
    let best = norms.map(|n| n.squared(&e_best));
    let scale = norms.map(|n| n.squared(&inv));
    let mut excess = f64::NEG_INFINITY;
    for r in 0..random_w_count {
        let w = semi_orthogonal(spd.dim(), k, stream_seed(seed, r as u64))?;
        let e = inv.sub(&approximate_precision(&spd.c, w.matrix())?);
        for i in 0..2 {
            excess = excess.max((best[i] - norms[i].squared(&e)) / scale[i]);
        }
    }
    Ok(excess)
}

/// Largest bracket violation of `λ_i(WᵀCW) ∈ [λ_{f−k+i}(C), λ_i(C)]`
/// (descending order), relative to `λ_max(C)`.
pub fn interlacing_excess(c_eigenvalues_ascending: &[f64], s: &SpdMatrix) -> f64 {
    let f = c_eigenvalues_ascending.len();
    let k = s.dim();
    let c_desc: Vec<f64> = c_eigenvalues_ascending.iter().rev().copied().collect();
    let s_desc: Vec<f64> = sym_eig(s).eigenvalues.into_iter().rev().collect();
    let scale = c_desc[0].abs().max(f64::MIN_POSITIVE);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..k {
        let (lo, hi) = (c_desc[f - k + i], c_desc[i]);
        worst = worst.max((lo - s_desc[i]) / scale).max((s_desc[i] - hi) / scale);
    }
    worst
}

pub fn check_interlacing(f: usize, k: usize, trials: usize, seed: u64) -> VerifyReport {
    let outcomes = run_trials(trials, seed, |s| {
        let spd = TestSpd::random(f, stream_seed(s, 0));
        let w = semi_orthogonal(f, k, stream_seed(s, 1))?;
        Ok(interlacing_excess(&spd.eigenvalues, &spd.c.congruence(w.matrix())))
    });
    VerifyReport::from_outcomes("interlacing", format!("f={f} k={k}"), 0.0, 1e-9, outcomes)
}

/// Interlacing on a fixed matrix with `W` from any orthonormal strategy.
pub fn check_interlacing_on(c: &SpdMatrix, k: usize, strategy: Strategy, trials: usize, seed: u64) -> VerifyReport {
    let eig = sym_eig(c).eigenvalues;
    let f = c.dim();
    let outcomes = run_trials(trials, seed, |s| {
        let w = strategy_embedding(strategy, c, k, s)?;
        Ok(interlacing_excess(&eig, &c.congruence(w.matrix())))
    });
    VerifyReport::from_outcomes(
        "interlacing",
        format!("{strategy} fixed-matrix f={f} k={k}"),
        0.0,
        1e-9,
        outcomes,
    )
}

fn strategy_embedding(strategy: Strategy, c: &SpdMatrix, k: usize, seed: u64) -> Result<EmbeddingMatrix> {
    match strategy {
        Strategy::EigenLower => eigen_embedding(c, k, EigenSide::Lower),
        Strategy::EigenHigher => eigen_embedding(c, k, EigenSide::Higher),
        other => shared_embedding(other, c.dim(), k, seed),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectraParams {
    pub f: usize,
    /// Number of independent features; feature `c` copies feature `c mod l`.
    pub l: usize,
    pub k: usize,
    pub n: usize,
    pub seeds: usize,
    pub seed: u64,
}

impl SpectraParams {
    pub fn validate(&self) -> Result<()> {
        if self.l == 0 || self.l > self.f {
            return Err(Error::InvalidConfig(format!("need 1 <= l <= f, got l={} f={}", self.l, self.f)));
        }
        if self.k == 0 || self.k > self.f {
            return Err(Error::InvalidConfig(format!("need 1 <= k <= f, got k={} f={}", self.k, self.f)));
        }
        if self.n < 2 {
            return Err(Error::InsufficientSamples(self.n));
        }
        Ok(())
    }
}

pub const SPECTRA_STRATEGIES: [Strategy; 3] = [
    Strategy::SemiOrthogonal,
    Strategy::RandomSelection,
    Strategy::GaussianRandom,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySpectra {
    pub strategy: Strategy,
    /// Descending eigenvalues of `WᵀCW`, one vector per seed.
    pub spectra: Vec<Vec<f64>>,
    pub ranks: Vec<usize>,
}

impl StrategySpectra {
    pub fn mean_spectrum(&self) -> Vec<f64> {
        let k = self.spectra.first().map_or(0, Vec::len);
        let n = self.spectra.len().max(1) as f64;
        (0..k)
            .map(|i| self.spectra.iter().map(|s| s[i]).sum::<f64>() / n)
            .collect()
    }

    pub fn full_rank_fraction(&self, k: usize) -> f64 {
        self.ranks.iter().filter(|&&r| r == k).count() as f64 / self.ranks.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectraSummary {
    pub params: SpectraParams,
    pub strategies: Vec<StrategySpectra>,
}

impl SpectraSummary {
    pub fn get(&self, strategy: Strategy) -> Option<&StrategySpectra> {
        self.strategies.iter().find(|s| s.strategy == strategy)
    }

    /// Rows `strategy,seed,index,eigenvalue,rank`: one block per seed, then a
    /// `mean` block with the seed-averaged spectrum and mean rank.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("strategy,seed,index,eigenvalue,rank\n");
        for s in &self.strategies {
            for (seed, (spectrum, rank)) in s.spectra.iter().zip(&s.ranks).enumerate() {
                for (i, v) in spectrum.iter().enumerate() {
                    out.push_str(&format!("{},{seed},{i},{v:e},{rank}\n", s.strategy));
                }
            }
            let mean_rank = s.ranks.iter().sum::<usize>() as f64 / s.ranks.len().max(1) as f64;
            for (i, v) in s.mean_spectrum().iter().enumerate() {
                out.push_str(&format!("{},mean,{i},{v:e},{mean_rank}\n", s.strategy));
            }
        }
        out
    }
}

/// Covariance of `n` samples of `l` independent Gaussian features, each
/// duplicated up to `f` channels.
pub fn duplicated_covariance(f: usize, l: usize, n: usize, seed: u64) -> SpdMatrix {
    let x = gaussian_matrix(n, l, seed);
    let means: Vec<f64> = (0..l).map(|c| x.column(c).iter().sum::<f64>() / n as f64).collect();
    let centered = Matrix::from_fn(n, l, |r, c| x[(r, c)] - means[c]);
    let base = centered.t_matmul(&centered).scale(1.0 / n as f64);
    SpdMatrix::symmetrize(Matrix::from_fn(f, f, |a, b| base[(a % l, b % l)]))
}

/// Spectra of `WᵀCW` for a rank-`l` covariance with duplicated features,
/// per strategy and seed. Writes the CSV to `out` when given.
pub fn spectra_experiment(params: SpectraParams, out: Option<&Path>) -> Result<SpectraSummary> {
    params.validate()?;
    let SpectraParams { f, l, k, n, seeds, seed } = params;
    let per_seed: Vec<Vec<(Vec<f64>, usize)>> = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let s_seed = stream_seed(seed, s as u64);
            let c = duplicated_covariance(f, l, n, stream_seed(s_seed, 0));
            SPECTRA_STRATEGIES
                .iter()
                .enumerate()
                .map(|(idx, &strategy)| {
                    let w = shared_embedding(strategy, f, k, stream_seed(s_seed, 1 + idx as u64))?;
                    let mut eig = sym_eig(&c.congruence(w.matrix())).eigenvalues;
                    eig.reverse();
                    let rank = effective_rank(&eig);
                    Ok((eig, rank))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let strategies = SPECTRA_STRATEGIES
        .iter()
        .enumerate()
        .map(|(idx, &strategy)| StrategySpectra {
            strategy,
            spectra: per_seed.iter().map(|row| row[idx].0.clone()).collect(),
            ranks: per_seed.iter().map(|row| row[idx].1).collect(),
        })
        .collect();
    let summary = SpectraSummary { params, strategies };
    if let Some(path) = out {
        fs::write(path, summary.to_csv()).map_err(|e| Error::io(path, e))?;
    }
    Ok(summary)
}

/// Semi-orthogonal and Gaussian embeddings keep full rank `k` in every seed;
/// random selection loses rank in more than half of them.
pub fn rank_collapse_report(summary: &SpectraSummary) -> VerifyReport {
    let p = summary.params;
    let frac = |s: Strategy| summary.get(s).map_or(0.0, |x| x.full_rank_fraction(p.k));
    let semi = frac(Strategy::SemiOrthogonal);
    let gauss = frac(Strategy::GaussianRandom);
    let collapsed = 1.0 - frac(Strategy::RandomSelection);
    let mut violations = 0;
    if semi < 1.0 {
        violations += 1;
    }
    if gauss < 1.0 {
        violations += 1;
    }
    if collapsed <= 0.5 {
        violations += 1;
    }
    VerifyReport {
        check: "rank-collapse".into(),
        instance: format!("f={} l={} k={} n={} seeds={}", p.f, p.l, p.k, p.n, p.seeds),
        trials: p.seeds,
        observed: collapsed,
        bound: 0.5,
        tolerance: 0.0,
        violations,
        passed: violations == 0,
        notes: vec![format!(
            "full rank: semi-orthogonal {:.0}%, gaussian {:.0}%; random-selection collapsed in {:.0}%",
            semi * 100.0,
            gauss * 100.0,
            collapsed * 100.0
        )],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    All,
    Expectation,
    Invariance,
    Bounds,
    Flat,
    Optimality,
    Interlacing,
    Rank,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::All,
        Suite::Expectation,
        Suite::Invariance,
        Suite::Bounds,
        Suite::Flat,
        Suite::Optimality,
        Suite::Interlacing,
        Suite::Rank,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::All => "all",
            Suite::Expectation => "expectation",
            Suite::Invariance => "invariance",
            Suite::Bounds => "bounds",
            Suite::Flat => "flat",
            Suite::Optimality => "optimality",
            Suite::Interlacing => "interlacing",
            Suite::Rank => "rank",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown verify suite {s:?}")))
    }
}

/// Runs a suite with its default instance sizes.
pub fn run_suite(suite: Suite, seed: u64) -> Vec<VerifyReport> {
    let wants = |s: Suite| suite == Suite::All || suite == s;
    let mut reports = Vec::new();
    if wants(Suite::Expectation) {
        reports.push(check_expectation(16, 200, 8, 100, seed));
        reports.push(check_expectation(16, 200, 16, 20, seed));
        reports.push(check_expectation_with(Strategy::RandomSelection, 16, 200, 8, 20, seed));
        reports.push(check_expectation_with(Strategy::EigenLower, 16, 200, 8, 20, seed));
        reports.push(check_expectation_with(Strategy::EigenHigher, 16, 200, 8, 20, seed));
    }
    if wants(Suite::Invariance) {
        reports.push(check_orthogonal_invariance(8, 64, 100, seed));
    }
    if wants(Suite::Bounds) {
        for norm in [Norm::Frobenius, Norm::Spectral] {
            reports.push(check_error_bounds(10, 4, 200, seed, norm));
            reports.push(check_error_bounds_near_singular(10, 4, 50, seed, norm, 1e-6));
        }
    }
    if wants(Suite::Flat) {
        for (f, k, alpha) in [(10, 4, 2.0), (10, 4, 1.0), (10, 10, 2.0), (16, 5, 0.3)] {
            for norm in [Norm::Frobenius, Norm::Spectral] {
                reports.push(check_flat_eigenvalues(f, k, alpha, 20, seed, norm));
            }
        }
    }
    if wants(Suite::Optimality) {
        reports.push(check_svd_optimality(8, 3, 20, 500, seed));
    }
    if wants(Suite::Interlacing) {
        reports.push(check_interlacing(8, 3, 200, seed));
        let diag = SpdMatrix::symmetrize(Matrix::diag(&(1..=8).map(f64::from).collect::<Vec<_>>()));
        for strategy in [Strategy::SemiOrthogonal, Strategy::RandomSelection, Strategy::EigenHigher] {
            reports.push(check_interlacing_on(&diag, 3, strategy, 200, seed));
        }
    }
    if wants(Suite::Rank) {
        let params = SpectraParams {
            f: 32,
            l: 16,
            k: 12,
            n: 200,
            seeds: 100,
            seed,
        };
        match spectra_experiment(params, None) {
            Ok(summary) => reports.push(rank_collapse_report(&summary)),
            Err(e) => reports.push(VerifyReport::from_outcomes(
                "rank-collapse",
                "f=32 l=16 k=12 n=200".into(),
                0.0,
                0.0,
                vec![Err(e)],
            )),
        }
    }
    reports
}
