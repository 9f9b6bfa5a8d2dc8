use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Inverse of a symmetric positive semi-definite matrix, obtained by solving
/// `A X = I`.
///
/// Cholesky first. When the factorization fails or its pivots span more than
/// `1 / (n ε)` the matrix is inspected with an SVD: a numerically rank-deficient
/// matrix is an error unless `allow_pseudo`, in which case the pseudo-inverse is
/// returned.
pub(crate) fn spd_inverse(a: &DMatrix<f64>, allow_pseudo: bool) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let identity = DMatrix::<f64>::identity(n, n);
    if let Some(ch) = a.clone().cholesky() {
        let pivots = ch.l_dirty().diagonal().map(|d| d * d);
        if pivots.min() > n as f64 * f64::EPSILON * pivots.max() {
            let x = ch.solve(&identity);
            if x.iter().all(|v| v.is_finite()) {
                return Ok(x);
            }
        }
    }
    let svd = a.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let tol = n as f64 * f64::EPSILON * s_max;
    if (s_min <= tol || s_max == 0.0) && !allow_pseudo {
        return Err(Error::Singular(format!(
            "{n}x{n} system is rank-deficient (singular values in [{s_min:e}, {s_max:e}])"
        )));
    }
    svd.pseudo_inverse(tol)
        .map_err(|e| Error::Singular(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverts_spd() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let inv = spd_inverse(&a, false).unwrap();
        let prod = &a * &inv;
        assert!((prod - DMatrix::identity(2, 2)).abs().max() < 1e-14);
    }

    #[test]
    fn singular_without_fallback_errors() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(spd_inverse(&a, false), Err(Error::Singular(_))));
        let pinv = spd_inverse(&a, true).unwrap();
        assert!((pinv[(0, 0)] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn tiny_pivot_counts_as_singular() {
        let v = 0.1 + 0.2;
        let a = DMatrix::from_row_slice(2, 2, &[v, 0.3, 0.3, v]);
        assert!(matches!(spd_inverse(&a, false), Err(Error::Singular(_))));
    }
}
