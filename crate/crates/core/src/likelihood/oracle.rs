//! Reference evaluation that forms `Sigma = Phi P Phi' + sigma2 I` explicitly.
//!
//! Costs `O((N-n)^3)` and is only meant for cross-checking the factored
//! pipeline on small instances. It shares nothing with that pipeline beyond
//! kernel evaluation.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::HyperPoint;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

/// A problem that keeps the full regressor and output vector.
#[derive(Debug, Clone)]
pub struct DenseProblem {
    pub phi: DMatrix<f64>,
    pub y: DVector<f64>,
    pub spec: KernelSpec,
}

#[derive(Debug, Clone)]
pub struct DenseEvaluation {
    pub f: f64,
    pub grad: DVector<f64>,
}

impl DenseProblem {
    pub fn new(u: &[f64], y: &[f64], spec: KernelSpec) -> Result<Self> {
        let n = spec.order();
        let len = u.len();
        if len <= n || y.len() != len {
            return Err(Error::InsufficientData { len, order: n });
        }
        let mut phi = DMatrix::zeros(len - n, n);
        for t in n..len {
            for lag in 1..=n {
                phi[(t - n, lag - 1)] = u[t - lag];
            }
        }
        let y = DVector::from_iterator(len - n, y[n..].iter().copied());
        Ok(Self { phi, y, spec })
    }

    pub fn sigma(&self, x: &HyperPoint) -> Result<DMatrix<f64>> {
        let p = self.spec.eval(&x.nu)?;
        let mut sigma = &self.phi * p * self.phi.transpose();
        sigma = (&sigma + sigma.transpose()) * 0.5;
        for i in 0..sigma.nrows() {
            sigma[(i, i)] += x.sigma2;
        }
        Ok(sigma)
    }

    fn factor(&self, x: &HyperPoint) -> Result<Cholesky<f64, Dyn>> {
        Cholesky::new(self.sigma(x)?).ok_or(Error::FactorizationFailure("Sigma"))
    }

    /// `f = Y' Sigma^-1 Y + log det Sigma` and its gradient.
    pub fn evaluate(&self, x: &HyperPoint) -> Result<DenseEvaluation> {
        let chol = self.factor(x)?;
        let alpha = chol.solve(&self.y);
        let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let f = self.y.dot(&alpha) + log_det;
        let sigma_inv = chol.inverse();
        let m = self.spec.num_params();
        let mut grad = DVector::zeros(m + 1);
        for (i, dp) in self.spec.gradient(&x.nu)?.iter().enumerate() {
            let d_sigma = &self.phi * dp * self.phi.transpose();
            grad[i] = -alpha.dot(&(&d_sigma * &alpha)) + sigma_inv.dot(&d_sigma);
        }
        grad[m] = -alpha.norm_squared() + sigma_inv.trace();
        Ok(DenseEvaluation { f, grad })
    }

    /// `P Phi' Sigma^-1 Y`
    pub fn map_estimate(&self, x: &HyperPoint) -> Result<DVector<f64>> {
        let chol = self.factor(x)?;
        let p = self.spec.eval(&x.nu)?;
        Ok(p * self.phi.transpose() * chol.solve(&self.y))
    }
}
