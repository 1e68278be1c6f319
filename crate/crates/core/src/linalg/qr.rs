use super::{axpy, Matrix};
use crate::error::{Error, Result};

/// Diagonal entries of R below this fraction of the largest input column
/// norm are treated as exact zeros.
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct QrFactors {
    /// `rows × cols`, orthonormal columns.
    pub q: Matrix,
    /// `cols × cols`, upper triangular.
    pub r: Matrix,
}

/// Reduced (thin) QR decomposition by Householder reflections.
///
/// Each reflector maps its column onto the *positive* first axis, so the
/// returned `r` has a non-negative diagonal and the factorization of a
/// full-rank input is the unique one with that property.
pub fn reduced_qr(a: &Matrix) -> Result<QrFactors> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: m,
        });
    }
    let max_col_norm = (0..n)
        .map(|j| (0..m).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let tolerance = RANK_TOLERANCE * max_col_norm;

    let mut work = a.clone();
    // Householder vectors, each of length m - j, and their 2 / vᵀv scales.
    let mut reflectors: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n);
    let mut scratch = vec![0.0; n];

    for j in 0..n {
        let alpha = work[(j, j)];
        let tail_sq: f64 = (j + 1..m).map(|i| work[(i, j)] * work[(i, j)]).sum();
        let norm = (alpha * alpha + tail_sq).sqrt();

        let mut v: Vec<f64> = (j..m).map(|i| work[(i, j)]).collect();
        // v = x - |x| e1, with the cancellation-free form when alpha > 0.
        v[0] = if alpha > 0.0 {
            -tail_sq / (alpha + norm)
        } else {
            alpha - norm
        };
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        let tau = if vtv > 0.0 { 2.0 / vtv } else { 0.0 };

        if tau != 0.0 {
            let w = &mut scratch[j..n];
            w.fill(0.0);
            for (i, &vi) in v.iter().enumerate() {
                let row = &work.as_slice()[(j + i) * n + j..(j + i) * n + n];
                axpy(vi, row, w);
            }
            for (i, &vi) in v.iter().enumerate() {
                let row = &mut work.as_mut_slice()[(j + i) * n + j..(j + i) * n + n];
                axpy(-tau * vi, w, row);
            }
        }
        // Exact values for the eliminated column.
        work[(j, j)] = norm;
        for i in j + 1..m {
            work[(i, j)] = 0.0;
        }
        reflectors.push((v, tau));
    }

    for j in 0..n {
        let d = work[(j, j)];
        if d < tolerance || !d.is_finite() {
            return Err(Error::RankDeficient {
                index: j,
                value: d,
                tolerance,
            });
        }
    }

    let r = Matrix::from_fn(n, n, |i, j| if j >= i { work[(i, j)] } else { 0.0 });

    // Q = H_0 H_1 ... H_{n-1} applied to the first n columns of I_m.
    let mut q = Matrix::from_fn(m, n, |i, j| if i == j { 1.0 } else { 0.0 });
    for (j, (v, tau)) in reflectors.iter().enumerate().rev() {
        if *tau == 0.0 {
            continue;
        }
        let w = &mut scratch[..];
        w.fill(0.0);
        for (i, &vi) in v.iter().enumerate() {
            axpy(vi, q.row(j + i), w);
        }
        for (i, &vi) in v.iter().enumerate() {
            let row = &mut q.as_mut_slice()[(j + i) * n..(j + i + 1) * n];
            axpy(-tau * vi, w, row);
        }
    }

    Ok(QrFactors { q, r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_matrix;

    #[test]
    fn identity_factors_to_itself() {
        let qr = reduced_qr(&Matrix::identity(3)).unwrap();
        assert_eq!(qr.q, Matrix::identity(3));
        assert_eq!(qr.r, Matrix::identity(3));
    }

    #[test]
    fn single_column_matches_gram_schmidt() {
        let a = Matrix::from_rows(&[[3.0], [4.0]]);
        let qr = reduced_qr(&a).unwrap();
        assert!((qr.q[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((qr.q[(1, 0)] - 0.8).abs() < 1e-15);
        assert!((qr.r[(0, 0)] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn duplicated_columns_are_rank_deficient() {
        let a = Matrix::from_rows(&[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]);
        assert!(matches!(reduced_qr(&a), Err(Error::RankDeficient { index: 1, .. })));
    }

    #[test]
    fn wide_input_is_rejected() {
        assert!(reduced_qr(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn random_tall_matrix_contract() {
        let a = gaussian_matrix(9, 4, 42);
        let QrFactors { q, r } = reduced_qr(&a).unwrap();
        let qtq = q.t_matmul(&q);
        assert!(qtq.max_abs_diff(&Matrix::identity(4)) < 1e-10);
        let rel = q.matmul(&r).sub(&a).frobenius() / a.frobenius();
        assert!(rel < 1e-10, "reconstruction {rel}");
        for i in 0..4 {
            assert!(r[(i, i)] > 0.0);
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }
}
