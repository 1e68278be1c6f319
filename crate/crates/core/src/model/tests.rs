use super::*;
use crate::embedding::{full_embedding, semi_orthogonal};
use crate::linalg::gaussian_matrix;

/// Random tensor with correlated channels so covariances are not diagonal.
fn random_tensor(n: usize, f: usize, h: usize, w: usize, seed: u64) -> FeatureTensor {
    let g = gaussian_matrix(n * h * w, f, seed);
    let mix = gaussian_matrix(f, f, seed ^ 0xABCD);
    let mixed = g.matmul(&mix);
    FeatureTensor::from_fn(n, f, h, w, |s, c, i, j| {
        let row = (s * h + i) * w + j;
        (mixed[(row, c)] + 0.5 * c as f64) as f32
    })
}

/// Unbatched `(1/N) Σ (x − μ)(x − μ)ᵀ` for one location.
fn brute_force_covariance(t: &FeatureTensor, loc: usize) -> (Vec<f64>, Matrix) {
    let (n, f) = (t.samples(), t.features());
    let xs: Vec<Vec<f64>> = (0..n).map(|s| t.feature_vector(s, loc)).collect();
    let mean: Vec<f64> = (0..f).map(|c| xs.iter().map(|x| x[c]).sum::<f64>() / n as f64).collect();
    let mut c = Matrix::zeros(f, f);
    for x in &xs {
        for a in 0..f {
            for b in 0..f {
                c[(a, b)] += (x[a] - mean[a]) * (x[b] - mean[b]) / n as f64;
            }
        }
    }
    (mean, c)
}

fn full_cfg(f: usize, epsilon: f64) -> RunConfig {
    RunConfig::new(Strategy::Full, f).with_epsilon(epsilon)
}

#[test]
fn two_point_location() {
    let t = FeatureTensor::new(2, 2, 1, 1, vec![1.0, 0.0, -1.0, 0.0]).unwrap();
    let model = GaussianModel::fit(&t, &full_cfg(2, 0.01)).unwrap();
    let g = model.location(0, 0);
    assert_eq!(g.mean, vec![0.0, 0.0]);
    let s = g.embedded_cov();
    let expected = Matrix::from_rows(&[[1.01, 0.0], [0.0, 0.01]]);
    assert!(s.matrix().max_abs_diff(&expected) < 1e-15);
}

#[test]
fn full_embedding_matches_brute_force_covariance() {
    for seed in 0..5 {
        let f = 3 + seed as usize;
        let t = random_tensor(20 + 6 * seed as usize, f, 2, 3, seed);
        let eps = 0.01;
        let model = GaussianModel::fit(&t, &full_cfg(f, eps)).unwrap();
        for loc in 0..6 {
            let (mean, c) = brute_force_covariance(&t, loc);
            let g = &model.grid()[loc];
            let mut s = g.embedded_cov().into_matrix();
            s.add_diagonal(-eps);
            assert!(s.max_abs_diff(&c) < 1e-10, "seed {seed} loc {loc}");
            let mean_err = g.mean.iter().zip(&mean).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(mean_err < 1e-12);
        }
    }
}

#[test]
fn projected_fit_matches_materialized_covariance() {
    let (f, k) = (12, 5);
    let t = random_tensor(40, f, 2, 2, 3);
    let cfg = RunConfig::new(Strategy::SemiOrthogonal, k).with_epsilon(0.0).with_seed(21);
    let model = GaussianModel::fit(&t, &cfg).unwrap();
    let w = semi_orthogonal(f, k, 21).unwrap();
    for loc in 0..4 {
        let (_, c) = brute_force_covariance(&t, loc);
        let expected = w.matrix().t_matmul(&c.matmul(w.matrix()));
        let s = model.grid()[loc].embedded_cov();
        let rel = s.matrix().sub(&expected).frobenius() / expected.frobenius();
        assert!(rel < 1e-9, "loc {loc}: {rel}");
    }
}

#[test]
fn mahalanobis_euclidean_case() {
    let g = LocationGaussian {
        mean: vec![0.0, 0.0],
        chol: CholeskyFactor::identity(2),
    };
    let d2 = mahalanobis_sq(&[3.0, 4.0], &g, &full_embedding(2)).unwrap();
    assert_eq!(d2, 25.0);
}

#[test]
fn mahalanobis_diagonal_case() {
    let s = SpdMatrix::new(Matrix::diag(&[4.0, 1.0])).unwrap();
    let g = LocationGaussian {
        mean: vec![0.0, 0.0],
        chol: cholesky(&s).unwrap(),
    };
    let d2 = mahalanobis_sq(&[2.0, 0.0], &g, &full_embedding(2)).unwrap();
    assert!((d2 - 1.0).abs() < 1e-15);
}

/// Gauss–Jordan inverse, independent of the Cholesky path.
fn explicit_inverse(a: &Matrix) -> Matrix {
    let n = a.rows();
    let mut aug = Matrix::from_fn(n, 2 * n, |i, j| if j < n { a[(i, j)] } else if j - n == i { 1.0 } else { 0.0 });
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| aug[(x, col)].abs().total_cmp(&aug[(y, col)].abs())).unwrap();
        for j in 0..2 * n {
            let tmp = aug[(col, j)];
            aug[(col, j)] = aug[(pivot, j)];
            aug[(pivot, j)] = tmp;
        }
        let p = aug[(col, col)];
        for j in 0..2 * n {
            aug[(col, j)] /= p;
        }
        for i in 0..n {
            if i != col {
                let factor = aug[(i, col)];
                for j in 0..2 * n {
                    aug[(i, j)] -= factor * aug[(col, j)];
                }
            }
        }
    }
    Matrix::from_fn(n, n, |i, j| aug[(i, j + n)])
}

#[test]
fn mahalanobis_matches_explicit_inverse() {
    let (f, k) = (6, 3);
    let t = random_tensor(30, f, 1, 1, 8);
    let cfg = RunConfig::new(Strategy::SemiOrthogonal, k).with_epsilon(0.0).with_seed(2);
    let model = GaussianModel::fit(&t, &cfg).unwrap();
    let g = &model.grid()[0];
    let w = model.embedding().at(0);
    let (_, c) = brute_force_covariance(&t, 0);
    let s_inv = explicit_inverse(&w.matrix().t_matmul(&c.matmul(w.matrix())));
    let x: Vec<f64> = (0..f).map(|i| (i as f64 * 0.7).sin() * 3.0).collect();
    let r: Vec<f64> = x.iter().zip(&g.mean).map(|(a, b)| a - b).collect();
    let z = w.project(&r);
    let oracle: f64 = (0..k).map(|a| (0..k).map(|b| z[a] * s_inv[(a, b)] * z[b]).sum::<f64>()).sum();
    let d2 = mahalanobis_sq(&x, g, w).unwrap();
    assert!((d2 - oracle).abs() < 1e-9 * oracle, "{d2} vs {oracle}");
}

#[test]
fn mahalanobis_dimension_errors() {
    let g = LocationGaussian {
        mean: vec![0.0; 3],
        chol: CholeskyFactor::identity(3),
    };
    assert!(matches!(
        mahalanobis_sq(&[1.0, 2.0], &g, &full_embedding(3)),
        Err(Error::DimensionMismatch { .. })
    ));
    assert!(mahalanobis_sq(&[1.0, 2.0, 3.0], &g, &semi_orthogonal(3, 2, 0).unwrap()).is_err());
}

#[test]
fn training_samples_average_to_k() {
    let (f, n, k) = (10, 60, 4);
    let t = random_tensor(n, f, 2, 2, 4);
    for strategy in [Strategy::SemiOrthogonal, Strategy::RandomSelection, Strategy::EigenLower] {
        let cfg = RunConfig::new(strategy, k).with_epsilon(0.0).with_seed(13);
        let model = GaussianModel::fit(&t, &cfg).unwrap();
        let maps = model.score_all(&t).unwrap();
        for loc in 0..4 {
            let mean_sq = maps.iter().map(|m| m.values()[loc].powi(2)).sum::<f64>() / n as f64;
            assert!((mean_sq - k as f64).abs() < 1e-6 * k as f64, "{strategy} loc {loc}: {mean_sq}");
        }
    }
}

#[test]
fn training_mean_scores_zero() {
    let t = random_tensor(15, 5, 3, 3, 6);
    let model = GaussianModel::fit(&t, &RunConfig::new(Strategy::SemiOrthogonal, 3)).unwrap();
    let mean_tensor = FeatureTensor::from_fn(1, 5, 3, 3, |_, c, i, j| model.location(i, j).mean[c] as f32);
    let map = model.score_image(&mean_tensor, 0).unwrap();
    // Means are rounded to f32 on the way in.
    assert!(map.values().iter().all(|&v| v < 1e-5), "{:?}", map.values());
}

#[test]
fn score_map_matches_location_oracle() {
    let (f, k) = (6, 2);
    let train = random_tensor(25, f, 4, 4, 10);
    let test = random_tensor(2, f, 4, 4, 11);
    let model = GaussianModel::fit(&train, &RunConfig::new(Strategy::SemiOrthogonal, k).with_seed(3)).unwrap();
    let map = model.score_image(&test, 1).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let loc = i * 4 + j;
            let d2 = mahalanobis_sq(&test.feature_vector(1, loc), &model.grid()[loc], model.embedding().at(loc)).unwrap();
            assert_eq!(map.get(i, j), d2.sqrt());
        }
    }
}

#[test]
fn square_semi_orthogonal_equals_full() {
    let f = 7;
    let train = random_tensor(30, f, 2, 2, 12);
    let test = random_tensor(3, f, 2, 2, 13);
    let full = GaussianModel::fit(&train, &full_cfg(f, 0.0)).unwrap();
    let ortho = GaussianModel::fit(&train, &RunConfig::new(Strategy::SemiOrthogonal, f).with_epsilon(0.0)).unwrap();
    for s in 0..3 {
        let a = full.score_image(&test, s).unwrap();
        let b = ortho.score_image(&test, s).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-8 * x.abs().max(1e-12));
        }
    }
}

#[test]
fn epsilon_shift_is_exact_for_orthonormal_w() {
    let t = random_tensor(20, 8, 2, 2, 14);
    let base = RunConfig::new(Strategy::SemiOrthogonal, 3).with_seed(5);
    let zero = GaussianModel::fit(&t, &base.clone().with_epsilon(0.0)).unwrap();
    let ridge = GaussianModel::fit(&t, &base.with_epsilon(0.25)).unwrap();
    for loc in 0..4 {
        let mut shifted = zero.grid()[loc].embedded_cov().into_matrix();
        shifted.add_diagonal(0.25);
        let s = ridge.grid()[loc].embedded_cov().into_matrix();
        assert!(s.max_abs_diff(&shifted) < 1e-12);
    }
}

#[test]
fn per_location_strategies_build_a_grid() {
    let t = random_tensor(20, 6, 2, 3, 15);
    for strategy in [Strategy::EigenLower, Strategy::EigenHigher] {
        let model = GaussianModel::fit(&t, &RunConfig::new(strategy, 2)).unwrap();
        match model.embedding() {
            Embedding::PerLocation(grid) => {
                assert_eq!((grid.height(), grid.width()), (2, 3));
                assert!(grid.matrices().iter().all(|w| w.orthonormality_error() < 1e-10));
            }
            Embedding::Shared(_) => panic!("{strategy} should be per location"),
        }
    }
}

#[test]
fn eigen_lower_keeps_smallest_variance_directions() {
    let t = random_tensor(50, 5, 1, 1, 16);
    let lower = GaussianModel::fit(&t, &RunConfig::new(Strategy::EigenLower, 2).with_epsilon(0.0)).unwrap();
    let higher = GaussianModel::fit(&t, &RunConfig::new(Strategy::EigenHigher, 2).with_epsilon(0.0)).unwrap();
    let (_, c) = brute_force_covariance(&t, 0);
    let eig = crate::linalg::sym_eig(&SpdMatrix::symmetrize(c));
    let lo = lower.grid()[0].embedded_cov();
    let hi = higher.grid()[0].embedded_cov();
    assert!((lo[(0, 0)] + lo[(1, 1)] - eig.eigenvalues[0] - eig.eigenvalues[1]).abs() < 1e-9);
    assert!((hi[(0, 0)] + hi[(1, 1)] - eig.eigenvalues[3] - eig.eigenvalues[4]).abs() < 1e-9);
}

#[test]
fn fit_errors() {
    let one = random_tensor(1, 4, 1, 1, 0);
    assert!(matches!(
        GaussianModel::fit(&one, &RunConfig::new(Strategy::SemiOrthogonal, 2)),
        Err(Error::InsufficientSamples(1))
    ));
    let t = random_tensor(5, 4, 1, 1, 0);
    assert!(matches!(
        GaussianModel::fit(&t, &RunConfig::new(Strategy::SemiOrthogonal, 5)),
        Err(Error::InvalidConfig(_))
    ));
    assert!(GaussianModel::fit(&t, &full_cfg(4, 0.0).with_epsilon(-1.0)).is_err());
    // Three samples span a rank-2 residual space; k = 4 with no ridge is singular.
    let few = random_tensor(3, 4, 1, 1, 1);
    assert!(matches!(
        GaussianModel::fit(&few, &full_cfg(4, 0.0)),
        Err(Error::NotPositiveDefinite { .. })
    ));
    assert!(GaussianModel::fit(&few, &full_cfg(4, 0.01)).is_ok());
}

#[test]
fn scoring_rejects_mismatched_features() {
    let t = random_tensor(5, 4, 2, 2, 0);
    let model = GaussianModel::fit(&t, &RunConfig::new(Strategy::SemiOrthogonal, 2)).unwrap();
    let wrong = random_tensor(1, 5, 2, 2, 0);
    assert!(matches!(model.score_image(&wrong, 0), Err(Error::ModelMismatch(_))));
    assert!(matches!(model.score_image(&t, 9), Err(Error::ModelMismatch(_))));
}

#[test]
fn save_load_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let train = random_tensor(12, 6, 3, 2, 20);
    let test = random_tensor(2, 6, 3, 2, 21);
    for strategy in [Strategy::SemiOrthogonal, Strategy::RandomSelection, Strategy::GaussianRandom, Strategy::EigenLower] {
        let model = GaussianModel::fit_with_digest(&train, &RunConfig::new(strategy, 3).with_seed(4), Some("abc".into())).unwrap();
        let path = dir.path().join(format!("{strategy}.somd"));
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, model);
        for s in 0..2 {
            assert_eq!(loaded.score_image(&test, s).unwrap(), model.score_image(&test, s).unwrap());
        }
    }
}

#[test]
fn corrupt_model_files() {
    let train = random_tensor(6, 4, 2, 2, 22);
    let model = GaussianModel::fit(&train, &RunConfig::new(Strategy::SemiOrthogonal, 2)).unwrap();
    let bytes = io::model_to_bytes(&model).unwrap();

    let truncated = &bytes[..bytes.len() - 5];
    assert!(matches!(io::model_from_bytes(truncated), Err(Error::CorruptModel(_))));

    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(matches!(io::model_from_bytes(&bad_magic), Err(Error::CorruptModel(_))));

    let mut bad_version = bytes.clone();
    bad_version[4] = 99;
    assert!(matches!(io::model_from_bytes(&bad_version), Err(Error::CorruptModel(_))));

    let mut flipped = bytes.clone();
    let last = flipped.len() - 1;
    flipped[last] ^= 0x01;
    assert!(matches!(io::model_from_bytes(&flipped), Err(Error::CorruptModel(_))));

    assert!(matches!(io::model_from_bytes(&bytes[..7]), Err(Error::CorruptModel(_))));
    assert!(matches!(load_model("/nonexistent/model.somd"), Err(Error::Io { .. })));
}

#[test]
fn refit_is_byte_identical() {
    let train = random_tensor(8, 5, 2, 2, 23);
    let cfg = RunConfig::new(Strategy::SemiOrthogonal, 3).with_seed(99);
    let a = io::model_to_bytes(&GaussianModel::fit(&train, &cfg).unwrap()).unwrap();
    let b = io::model_to_bytes(&GaussianModel::fit(&train, &cfg).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_eq!(&a[..4], MODEL_MAGIC);
}
