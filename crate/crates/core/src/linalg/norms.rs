use super::{sym_eig, Matrix, SpdMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixNorms {
    pub frobenius: f64,
    /// Largest singular value.
    pub spectral: f64,
}

/// Frobenius and spectral norms. Symmetric input takes the `max |λ|` route;
/// anything else goes through the eigenvalues of `mᵀm`.
pub fn matrix_norms(m: &Matrix) -> MatrixNorms {
    let frobenius = m.frobenius();
    if m.rows() == 0 || m.cols() == 0 {
        return MatrixNorms {
            frobenius,
            spectral: 0.0,
        };
    }
    let spectral = match SpdMatrix::new(m.clone()) {
        Ok(sym) => sym_eig(&sym)
            .eigenvalues
            .iter()
            .fold(0.0f64, |acc, l| acc.max(l.abs())),
        Err(_) => {
            let gram = SpdMatrix::symmetrize(m.t_matmul(m));
            sym_eig(&gram)
                .eigenvalues
                .last()
                .copied()
                .unwrap_or(0.0)
                .max(0.0)
                .sqrt()
        }
    };
    MatrixNorms {
        frobenius,
        spectral,
    }
}
