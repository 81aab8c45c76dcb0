use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

const MAX_CONDITION: f64 = 1e12;

/// Factorized inverse of a symmetric positive-definite matrix, for repeated
/// evaluation of quadratic forms `vᵀ Σ⁻¹ v`.
#[derive(Debug, Clone)]
pub struct Precision {
    chol: Cholesky<f64, Dyn>,
    dim: usize,
}

impl Precision {
    /// Fails when `sigma` is not symmetric positive definite or its
    /// condition number exceeds `1e12`.
    pub fn new(sigma: &DMatrix<f64>) -> Result<Self> {
        let p = sigma.nrows();
        if p == 0 || sigma.ncols() != p {
            return Err(Error::invalid("covariance must be a nonempty square matrix"));
        }
        let scale = sigma.amax();
        if scale.is_nan() || scale <= 0.0 || sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("covariance matrix is zero or not finite".into()));
        }
        let asym = (sigma - sigma.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(Error::invalid("covariance matrix is not symmetric"));
        }
        let eig = sigma.clone().symmetric_eigen().eigenvalues;
        let (lo, hi) = (eig.min(), eig.max());
        if lo.is_nan() || lo <= 0.0 || hi / lo > MAX_CONDITION {
            return Err(Error::Singular(format!(
                "covariance matrix is singular or ill-conditioned (eigenvalues in [{lo:.3e}, {hi:.3e}])"
            )));
        }
        let chol = Cholesky::new(sigma.clone())
            .ok_or_else(|| Error::Singular("Cholesky factorization failed".into()))?;
        Ok(Self { chol, dim: p })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `vᵀ Σ⁻¹ v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.dim);
        let b = DVector::from_column_slice(v);
        // Σ = LLᵀ, so vᵀΣ⁻¹v = ‖L⁻¹v‖².
        let y = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&b)
            .expect("Cholesky factor has a positive diagonal");
        y.norm_squared()
    }
}
