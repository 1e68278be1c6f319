//! Wall-clock timing of the fit, score and batched Cholesky stages.

use std::hint::black_box;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::Strategy;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, gaussian_matrix, stream_seed, SpdMatrix};
use crate::model::{FeatureTensor, GaussianModel, RunConfig};

/// Distinct SPD matrices cycled through by [`batched_cholesky`].
pub const CHOLESKY_POOL: usize = 4;

/// `k × k` SPD matrices of the form `GGᵀ/k + I`.
pub fn spd_pool(k: usize, count: usize, seed: u64) -> Vec<SpdMatrix> {
    (0..count)
        .map(|i| {
            let g = gaussian_matrix(k, k, stream_seed(seed, i as u64));
            let mut m = g.matmul(&g.transpose()).scale(1.0 / k as f64);
            m.add_diagonal(1.0);
            SpdMatrix::symmetrize(m)
        })
        .collect()
}

/// Factors one `k × k` matrix per location, as the fit does, and returns
/// the elapsed time. Inputs are drawn from a small pool so memory stays at
/// `O(k²)` regardless of the grid size.
pub fn batched_cholesky(pool: &[SpdMatrix], locations: usize) -> Result<Duration> {
    let start = Instant::now();
    (0..locations).into_par_iter().try_for_each(|loc| {
        let l = cholesky(&pool[loc % pool.len()])?;
        black_box(l);
        Ok::<_, Error>(())
    })?;
    Ok(start.elapsed())
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => values[n / 2],
        _ => 0.5 * (values[n / 2 - 1] + values[n / 2]),
    }
}

fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchParams {
    pub f_list: Vec<usize>,
    pub k_list: Vec<usize>,
    pub height: usize,
    pub width: usize,
    /// Training samples used for the fit timing.
    pub samples: usize,
    pub reps: usize,
    pub seed: u64,
    /// Fit/score are skipped (reported as NaN) when the fitted model would
    /// exceed this many bytes. The Cholesky stage always runs.
    pub memory_budget: usize,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self {
            f_list: vec![448],
            k_list: vec![1, 25, 50, 100],
            height: 16,
            width: 16,
            samples: 16,
            reps: 3,
            seed: 0,
            memory_budget: 2 << 30,
        }
    }
}

impl BenchParams {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::InvalidConfig("reps and grid must be positive".into()));
        }
        if self.samples < 2 {
            return Err(Error::InvalidConfig("bench needs at least 2 samples".into()));
        }
        for &f in &self.f_list {
            for &k in &self.k_list {
                if k == 0 || k > f {
                    return Err(Error::InvalidConfig(format!("need 1 <= k <= F, got k={k}, F={f}")));
                }
            }
        }
        Ok(())
    }

    /// Approximate bytes held by the training tensor plus the fitted model.
    pub fn footprint(&self, f: usize, k: usize) -> usize {
        let locs = self.height * self.width;
        let tensor = self.samples * f * locs * 4;
        let model = locs * (f + k * (k + 1) / 2) * 8 + f * k * 8;
        tensor + model
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub f: usize,
    pub k: usize,
    pub h: usize,
    pub w: usize,
    pub fit_ms: f64,
    pub score_ms: f64,
    pub chol_ms: f64,
}

pub const BENCH_CSV_HEADER: &str = "f,k,h,w,fit_ms,score_ms,chol_ms";

fn timed_median(reps: usize, label: &str, mut run: impl FnMut() -> Result<Duration>) -> Result<f64> {
    let mut samples = (0..reps)
        .map(|_| run().map(|d| d.as_secs_f64() * 1e3))
        .collect::<Result<Vec<_>>>()?;
    log::info!("{label}: variance {:.3e} ms^2 over {reps} reps", variance(&samples));
    Ok(median(&mut samples))
}

/// Median timings for every `(F, k)` pair of the sweep.
pub fn run_bench(params: &BenchParams) -> Result<Vec<BenchRow>> {
    params.validate()?;
    let (h, w) = (params.height, params.width);
    let mut rows = Vec::new();
    for &f in &params.f_list {
        let fits = params.k_list.iter().any(|&k| params.footprint(f, k) <= params.memory_budget);
        let data = fits.then(|| {
            let n = params.samples;
            let g = gaussian_matrix(n + 1, f * h * w, stream_seed(params.seed, f as u64));
            let train = FeatureTensor::new(n, f, h, w, g.as_slice()[..n * f * h * w].iter().map(|&v| v as f32).collect())
                .expect("finite Gaussian samples");
            let test = FeatureTensor::new(1, f, h, w, g.row(n).iter().map(|&v| v as f32).collect())
                .expect("finite Gaussian samples");
            (train, test)
        });
        for &k in &params.k_list {
            let label = format!("f={f} k={k} {h}x{w}");
            let pool = spd_pool(k, CHOLESKY_POOL, stream_seed(params.seed, k as u64));
            let chol_ms = timed_median(params.reps, &format!("{label} cholesky"), || batched_cholesky(&pool, h * w))?;
            let (fit_ms, score_ms) = match &data {
                Some((train, test)) if params.footprint(f, k) <= params.memory_budget => {
                    let cfg = RunConfig::new(Strategy::SemiOrthogonal, k).with_seed(params.seed);
                    let mut model = None;
                    let fit_ms = timed_median(params.reps, &format!("{label} fit"), || {
                        let start = Instant::now();
                        model = Some(GaussianModel::fit(train, &cfg)?);
                        Ok(start.elapsed())
                    })?;
                    let model = model.expect("at least one rep");
                    let score_ms = timed_median(params.reps, &format!("{label} score"), || {
                        let start = Instant::now();
                        black_box(model.score_image(test, 0)?);
                        Ok(start.elapsed())
                    })?;
                    (fit_ms, score_ms)
                }
                _ => {
                    log::warn!("{label}: fit/score skipped, footprint above memory budget");
                    (f64::NAN, f64::NAN)
                }
            };
            rows.push(BenchRow {
                f,
                k,
                h,
                w,
                fit_ms,
                score_ms,
                chol_ms,
            });
        }
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = format!("{BENCH_CSV_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.3},{:.3},{:.3}\n",
            r.f, r.k, r.h, r.w, r.fit_ms, r.score_ms, r.chol_ms
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
        assert!(median(&mut []).is_nan());
    }

    #[test]
    fn pool_is_factorizable() {
        let pool = spd_pool(6, 3, 1);
        assert!(batched_cholesky(&pool, 10).is_ok());
    }

    #[test]
    fn small_sweep() {
        let params = BenchParams {
            f_list: vec![12],
            k_list: vec![1, 4, 12],
            height: 3,
            width: 3,
            samples: 5,
            reps: 2,
            seed: 7,
            memory_budget: 1 << 30,
        };
        let rows = run_bench(&params).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.fit_ms.is_finite() && r.chol_ms >= 0.0));
        let csv = bench_csv(&rows);
        assert!(csv.starts_with("f,k,h,w,fit_ms,score_ms,chol_ms\n12,1,3,3,"));
    }

    #[test]
    fn over_budget_skips_fit() {
        let params = BenchParams {
            f_list: vec![8],
            k_list: vec![2],
            height: 2,
            width: 2,
            samples: 3,
            reps: 1,
            seed: 0,
            memory_budget: 10,
        };
        let rows = run_bench(&params).unwrap();
        assert!(rows[0].fit_ms.is_nan());
        assert!(rows[0].chol_ms.is_finite());
    }

    #[test]
    fn rejects_bad_sweeps() {
        let p = BenchParams {
            k_list: vec![500],
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
