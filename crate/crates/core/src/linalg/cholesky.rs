use super::{dot, Matrix, SpdMatrix};
use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor, stored packed by rows: row `i` holds
/// `L[i][0..=i]` and starts at offset `i·(i+1)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    dim: usize,
    packed: Vec<f64>,
}

#[inline]
fn row_offset(i: usize) -> usize {
    i * (i + 1) / 2
}

impl CholeskyFactor {
    pub fn from_packed(dim: usize, packed: Vec<f64>) -> Result<Self> {
        if packed.len() != row_offset(dim) {
            return Err(Error::DimensionMismatch {
                expected: row_offset(dim),
                actual: packed.len(),
            });
        }
        Ok(Self { dim, packed })
    }

    pub fn identity(dim: usize) -> Self {
        let mut packed = vec![0.0; row_offset(dim)];
        for i in 0..dim {
            packed[row_offset(i) + i] = 1.0;
        }
        Self { dim, packed }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn packed(&self) -> &[f64] {
        &self.packed
    }

    /// `L[i][0..=i]`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.packed[row_offset(i)..row_offset(i + 1)]
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.dim, self.dim, |i, j| if j <= i { self.row(i)[j] } else { 0.0 })
    }

    /// `L · Lᵀ`.
    pub fn reconstruct(&self) -> SpdMatrix {
        let n = self.dim;
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = dot(&self.row(i)[..=j], &self.row(j)[..=j]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SpdMatrix::symmetrize(m)
    }

    /// Solves `L · y = v` in place.
    pub fn forward_solve_in_place(&self, v: &mut [f64]) {
        for i in 0..self.dim {
            let row = self.row(i);
            v[i] = (v[i] - dot(&row[..i], &v[..i])) / row[i];
        }
    }

    /// Solves `Lᵀ · x = v` in place.
    pub fn backward_solve_in_place(&self, v: &mut [f64]) {
        for i in (0..self.dim).rev() {
            let row = self.row(i);
            v[i] /= row[i];
            let xi = v[i];
            for (vk, lik) in v[..i].iter_mut().zip(&row[..i]) {
                *vk -= lik * xi;
            }
        }
    }

    /// `vᵀ (L Lᵀ)⁻¹ v = ‖L⁻¹ v‖²`, non-negative by construction.
    pub fn inverse_quadratic_form(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: v.len(),
            });
        }
        let mut y = v.to_vec();
        self.forward_solve_in_place(&mut y);
        Ok(dot(&y, &y))
    }

    /// Explicit `(L Lᵀ)⁻¹`, column by column. For verification only.
    pub fn inverse(&self) -> Matrix {
        let n = self.dim;
        let mut inv = Matrix::zeros(n, n);
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.fill(0.0);
            col[j] = 1.0;
            self.forward_solve_in_place(&mut col);
            self.backward_solve_in_place(&mut col);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        SpdMatrix::symmetrize(inv).into_matrix()
    }
}

/// Cholesky–Crout factorization, row by row over the packed layout.
///
/// A pivot that is not above `n · ε_mach · a_ii` (roundoff level of an
/// exactly singular matrix) is reported as [`Error::NotPositiveDefinite`].
pub fn cholesky(s: &SpdMatrix) -> Result<CholeskyFactor> {
    let n = s.dim();
    let a = s.matrix();
    let mut packed = vec![0.0; row_offset(n)];
    for i in 0..n {
        let (done, rest) = packed.split_at_mut(row_offset(i));
        let row_i = &mut rest[..=i];
        for j in 0..=i {
            let partial = if j < i {
                dot(&row_i[..j], &done[row_offset(j)..row_offset(j) + j])
            } else {
                dot(&row_i[..j], &row_i[..j])
            };
            let value = a[(i, j)] - partial;
            if j == i {
                let floor = n as f64 * f64::EPSILON * a[(i, i)].abs();
                if !(value > floor) || !value.is_finite() {
                    return Err(Error::NotPositiveDefinite { pivot: i, value });
                }
                row_i[i] = value.sqrt();
            } else {
                row_i[j] = value / done[row_offset(j) + j];
            }
        }
    }
    Ok(CholeskyFactor { dim: n, packed })
}

/// Solves `(L Lᵀ) · y = v`.
pub fn chol_solve(l: &CholeskyFactor, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != l.dim {
        return Err(Error::DimensionMismatch {
            expected: l.dim,
            actual: v.len(),
        });
    }
    let mut y = v.to_vec();
    l.forward_solve_in_place(&mut y);
    l.backward_solve_in_place(&mut y);
    Ok(y)
}
