//! Finite-dimensional reference computations for the dynamics regression.
//!
//! With an explicit feature map `φ: Z → R^d` the regression can be solved
//! directly in feature space, which gives an independent check on the
//! kernel-only route in [`super::fit`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves `min_A Σ_t γ_t ‖n_t - A m_t‖² + λ‖A‖²_F` in `R^d`:
/// `Ã = N Γ Mᵀ (M Γ Mᵀ + λI)⁻¹`.
///
/// With `lambda = 0` the minimum-norm least-squares solution is returned (the
/// `λ → 0` limit); it is an error only when every input vector is zero.
pub fn explicit_oracle_fit(
    pairs: &[(DVector<f64>, DVector<f64>)],
    lambda: f64,
    gamma: Option<&[f64]>,
) -> Result<DMatrix<f64>> {
    let first = pairs.first().ok_or(Error::Empty("oracle pairs"))?;
    let d = first.0.len();
    for (m, n) in pairs {
        if m.len() != d {
            return Err(Error::DimensionMismatch(d, m.len()));
        }
        if n.len() != d {
            return Err(Error::DimensionMismatch(d, n.len()));
        }
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    if let Some(g) = gamma {
        if g.len() != pairs.len() || g.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidArgument(
                "gamma must be positive, one per pair".into(),
            ));
        }
    }
    let mut mgm = DMatrix::<f64>::zeros(d, d);
    let mut ngm = DMatrix::<f64>::zeros(d, d);
    for (t, (m, n)) in pairs.iter().enumerate() {
        let g = gamma.map_or(1.0, |g| g[t]);
        mgm += g * m * m.transpose();
        ngm += g * n * m.transpose();
    }
    let system = &mgm + DMatrix::<f64>::identity(d, d) * lambda;
    // Ã = NΓMᵀ S⁻¹ with S symmetric, so Ãᵀ = S⁻¹ (NΓMᵀ)ᵀ.
    let rhs = ngm.transpose();
    let solved = if lambda > 0.0 {
        system
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&rhs))
            .or_else(|| system.clone().lu().solve(&rhs))
            .ok_or_else(|| Error::Singular("oracle normal equations".into()))?
    } else {
        if mgm.iter().all(|v| *v == 0.0) {
            return Err(Error::Singular("all oracle inputs are zero".into()));
        }
        let svd = system.svd(true, true);
        let tol = d as f64 * f64::EPSILON * svd.singular_values.max();
        svd.solve(&rhs, tol)
            .map_err(|e| Error::Singular(e.to_string()))?
    };
    Ok(solved.transpose())
}

/// Finite-dimensional instance of the one-step error bound.
#[derive(Clone, Debug)]
pub struct BoundSetup {
    /// True operator `A`.
    pub a_true: DMatrix<f64>,
    /// Estimated operator `Ã`.
    pub a_fit: DMatrix<f64>,
    /// True embedding `μ_T`.
    pub mu_true: DVector<f64>,
    /// Empirical embedding `μ̂_T`; must satisfy `‖μ̂_T‖ ≤ 1`.
    pub mu_hat: DVector<f64>,
    /// Residual `ε_T`.
    pub eps: DVector<f64>,
    /// Test function with `‖f‖ ≤ 1`.
    pub f: DVector<f64>,
}

/// Returns `(lhs, rhs)` of
/// `|⟨Aμ_T + ε_T, f⟩ - ⟨Ãμ̂_T, f⟩| ≤ ‖A‖_F ‖μ_T - μ̂_T‖ + ‖A - Ã‖_F + ‖ε_T‖`.
///
/// The `‖A - Ã‖_F` term bounds `⟨(A - Ã)μ̂_T, f⟩` only when `‖μ̂_T‖ ≤ 1`, which holds
/// for embeddings of kernels with `‖φ(z)‖ ≤ 1`; larger `μ̂_T` is rejected.
pub fn lemma1_gap(setup: &BoundSetup) -> Result<(f64, f64)> {
    let d = setup.mu_true.len();
    for len in [
        setup.mu_hat.len(),
        setup.eps.len(),
        setup.f.len(),
        setup.a_true.nrows(),
        setup.a_true.ncols(),
        setup.a_fit.nrows(),
        setup.a_fit.ncols(),
    ] {
        if len != d {
            return Err(Error::DimensionMismatch(d, len));
        }
    }
    let f_norm = setup.f.norm();
    if f_norm > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "test function norm {f_norm} exceeds 1"
        )));
    }
    let mu_hat_norm = setup.mu_hat.norm();
    if mu_hat_norm > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "empirical embedding norm {mu_hat_norm} exceeds 1"
        )));
    }
    let truth = &setup.a_true * &setup.mu_true + &setup.eps;
    let predicted = &setup.a_fit * &setup.mu_hat;
    let lhs = (truth.dot(&setup.f) - predicted.dot(&setup.f)).abs();
    let rhs = setup.a_true.norm() * (&setup.mu_true - &setup.mu_hat).norm()
        + (&setup.a_true - &setup.a_fit).norm()
        + setup.eps.norm();
    Ok((lhs, rhs))
}
