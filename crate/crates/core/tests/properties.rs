mod common;

use proptest::prelude::*;
use somd::embedding::{semi_orthogonal, shared_embedding, Strategy};
use somd::features::{npy_bytes, parse_npy};
use somd::linalg::{chol_solve, cholesky, gaussian_matrix, reduced_qr, sym_eig, Matrix, SpdMatrix};
use somd::metrics::connected_components;
use somd::verify::{interlacing_excess, TestSpd};

fn random_spd(dim: usize, seed: u64) -> SpdMatrix {
    let g = gaussian_matrix(dim, dim, seed);
    let mut m = g.t_matmul(&g).scale(1.0 / dim as f64);
    m.add_diagonal(1e-3);
    SpdMatrix::symmetrize(m)
}

#[test]
fn chol_solve_inverts_multiplication_on_1000_systems() {
    let mut worst = 0.0f64;
    for seed in 0..1000u64 {
        let dim = 1 + (seed as usize * 7) % 32;
        let s = random_spd(dim, seed);
        let v = gaussian_matrix(1, dim, seed + 50_000).into_vec();
        let y = chol_solve(&cholesky(&s).unwrap(), &v).unwrap();
        let back = s.matrix().matvec(&y);
        let err = back.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = v.iter().map(|b| b * b).sum::<f64>().sqrt();
        worst = worst.max(err / norm);
    }
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn haar_first_component_is_symmetric() {
    // Two-sided binomial test at significance 0.001: |count − n/2| must stay
    // below 3.29 standard deviations.
    let n = 5000u64;
    let positive = (0..n)
        .filter(|&seed| semi_orthogonal(2, 1, seed).unwrap().matrix()[(0, 0)] > 0.0)
        .count() as f64;
    let sigma = (n as f64 * 0.25).sqrt();
    assert!((positive - n as f64 / 2.0).abs() < 3.29 * sigma, "{positive} positive of {n}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qr_columns_are_orthonormal(rows in 1usize..24, extra in 0usize..8, seed in any::<u64>()) {
        let cols = rows.saturating_sub(extra).max(1);
        let a = gaussian_matrix(rows, cols, seed);
        let qr = reduced_qr(&a).unwrap();
        let gram = qr.q.t_matmul(&qr.q);
        prop_assert!(gram.max_abs_diff(&Matrix::identity(cols)) < 1e-10);
        prop_assert!(qr.q.matmul(&qr.r).sub(&a).frobenius() <= 1e-10 * a.frobenius());
    }

    #[test]
    fn eigenvalues_of_spd_are_positive(dim in 1usize..20, seed in any::<u64>()) {
        let eig = sym_eig(&random_spd(dim, seed)).eigenvalues;
        prop_assert!(eig.iter().all(|&l| l > 0.0));
        prop_assert!(eig.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn psd_eigenvalues_are_not_meaningfully_negative(dim in 2usize..16, rank in 1usize..8, seed in any::<u64>()) {
        let g = gaussian_matrix(rank.min(dim - 1), dim, seed);
        let c = SpdMatrix::symmetrize(g.t_matmul(&g));
        prop_assert!(sym_eig(&c).eigenvalues.iter().all(|&l| l >= -1e-10));
    }

    #[test]
    fn embedded_eigenvalues_interlace(f in 2usize..=16, k_frac in 0.0f64..1.0, seed in any::<u64>(), which in 0usize..3) {
        let k = 1 + ((f - 1) as f64 * k_frac) as usize;
        let strategy = [Strategy::SemiOrthogonal, Strategy::RandomSelection, Strategy::Full][which];
        let k = if strategy == Strategy::Full { f } else { k };
        let spd = TestSpd::random(f, seed);
        let w = shared_embedding(strategy, f, k, seed ^ 1).unwrap();
        let s = spd.c.congruence(w.matrix());
        prop_assert!(interlacing_excess(&spd.eigenvalues, &s) <= 1e-9);
        // Every embedded eigenvalue sits inside the full spectrum.
        let lo = spd.eigenvalues[0];
        let hi = spd.eigenvalues[f - 1];
        for l in sym_eig(&s).eigenvalues {
            prop_assert!(l >= lo * (1.0 - 1e-9) && l <= hi * (1.0 + 1e-9));
        }
    }

    #[test]
    fn orthonormal_strategies_stay_orthonormal(f in 1usize..64, k_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let k = 1 + ((f - 1) as f64 * k_frac) as usize;
        for strategy in [Strategy::SemiOrthogonal, Strategy::RandomSelection] {
            prop_assert!(shared_embedding(strategy, f, k, seed).unwrap().orthonormality_error() < 1e-10);
        }
    }

    #[test]
    fn components_partition_the_foreground(h in 1usize..20, w in 1usize..20, density in 0.0f64..1.0, seed in any::<u64>()) {
        let mask = common::random_mask(h, w, density, seed);
        let ours = connected_components(&mask);
        let (labels, count) = common::flood_fill_labels(&mask);
        prop_assert_eq!(ours.region_count, count);
        prop_assert_eq!(ours.labels, labels);
        let covered: usize = ours.regions.iter().map(Vec::len).sum();
        prop_assert_eq!(covered, mask.anomalous_pixels());
    }

    #[test]
    fn npy_round_trip(shape in prop::collection::vec(1usize..6, 1..5), seed in any::<u64>()) {
        let len: usize = shape.iter().product();
        let data: Vec<f32> = gaussian_matrix(1, len, seed).as_slice().iter().map(|&v| v as f32).collect();
        let bytes = npy_bytes(&shape, &data);
        prop_assert_eq!(bytes.len() % 64, (len * 4) % 64);
        let arr = parse_npy(&bytes).unwrap();
        prop_assert_eq!(arr.shape, shape);
        prop_assert_eq!(arr.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), data.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}
