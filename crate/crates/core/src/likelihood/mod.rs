//! Negative log marginal likelihood of the impulse-response model
//! `Y = Phi theta + E`, `theta ~ N(0, P(nu))`, `E ~ N(0, sigma2 I)`:
//!
//! ```text
//! f(x) = Y' Sigma^-1 Y + log det Sigma,   Sigma = Phi P(nu) Phi' + sigma2 I
//!      =        f0      +      f1
//! ```
//!
//! Everything is evaluated in the `n`-dimensional coefficient space from the
//! precomputed `Phi'Phi`, `Phi'Y` and `|Y|^2`, using a Cholesky factor `L` of
//! `P` and a Cholesky factor `S` of `Q = sigma2 I + L' Phi'Phi L`. The
//! inverse of `P` is never formed: `P` is routinely numerically singular for
//! the stable-spline style kernels.

pub mod oracle;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::optimizer::{Objective, SplitEval};

/// Relative diagonal shifts tried, in order, when `P(nu)` fails to factor.
pub const JITTER_LADDER: [f64; 3] = [1e-12, 1e-10, 1e-8];

/// Optimization variable `x = (nu, sigma2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperPoint {
    pub nu: Vec<f64>,
    pub sigma2: f64,
}

impl HyperPoint {
    pub fn new(nu: Vec<f64>, sigma2: f64) -> Self {
        Self { nu, sigma2 }
    }

    /// Splits a stacked `(nu, sigma2)` slice; the last entry is `sigma2`.
    pub fn from_slice(x: &[f64]) -> Self {
        let (sigma2, nu) = x.split_last().expect("hyperparameter vector is empty");
        Self::new(nu.to_vec(), *sigma2)
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.nu.len() + 1,
            self.nu.iter().copied().chain(std::iter::once(self.sigma2)),
        )
    }

    pub fn dim(&self) -> usize {
        self.nu.len() + 1
    }
}

/// Regression quantities that fully determine the likelihood.
#[derive(Debug, Clone)]
pub struct ProblemData {
    gram: DMatrix<f64>,
    cross: DVector<f64>,
    y_norm2: f64,
    n_data: usize,
    spec: KernelSpec,
}

/// Regressor matrix with row `t - n` equal to `(u(t-1), ..., u(t-n))` for
/// `t = n+1..=N` (1-based), and the matching output vector `(y(n+1)..y(N))`.
pub fn regression(u: &[f64], y: &[f64], order: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if u.len() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "output length",
            expected: u.len(),
            got: y.len(),
        });
    }
    let len = u.len();
    if order == 0 || len <= order {
        return Err(Error::InsufficientData { len, order });
    }
    let rows = len - order;
    let phi = DMatrix::from_fn(rows, order, |r, c| u[order + r - 1 - c]);
    let target = DVector::from_column_slice(&y[order..]);
    Ok((phi, target))
}

impl ProblemData {
    /// Precomputes `Phi'Phi`, `Phi'Y` and `|Y|^2`; `Phi` itself is dropped.
    pub fn new(u: &[f64], y: &[f64], spec: KernelSpec) -> Result<Self> {
        let (phi, target) = regression(u, y, spec.order())?;
        let gram = phi.tr_mul(&phi);
        let cross = phi.tr_mul(&target);
        Ok(Self {
            gram,
            cross,
            y_norm2: target.norm_squared(),
            n_data: u.len(),
            spec,
        })
    }

    /// `Phi'Phi`
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `Phi'Y`
    pub fn cross(&self) -> &DVector<f64> {
        &self.cross
    }

    pub fn y_norm2(&self) -> f64 {
        self.y_norm2
    }

    /// Record length `N`.
    pub fn n_data(&self) -> usize {
        self.n_data
    }

    pub fn order(&self) -> usize {
        self.spec.order()
    }

    /// Number of regression rows, `N - n`.
    pub fn rows(&self) -> usize {
        self.n_data - self.order()
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    /// Dimension of `x`, i.e. `m + 1`.
    pub fn dim(&self) -> usize {
        self.spec.num_params() + 1
    }
}

/// Factors reused by the gradient, Hessian and MAP estimate.
#[derive(Debug, Clone)]
pub struct Factors {
    /// Lower Cholesky factor of `P(nu)` (of `P + shift I` when jitter was used).
    pub prior_factor: DMatrix<f64>,
    /// Lower Cholesky factor of `Q = sigma2 I + L' Phi'Phi L`.
    pub inner_factor: DMatrix<f64>,
    /// `Z = L S^-T S^-1 L' = (sigma2 P^-1 + Phi'Phi)^-1`.
    pub woodbury: DMatrix<f64>,
    /// `M = Phi'Phi - Phi'Phi Z Phi'Phi`, so that `Phi' Sigma^-1 Phi = M / sigma2`.
    pub m_matrix: DMatrix<f64>,
    /// `q = Phi' Sigma^-1 Y = (I - Phi'Phi Z) Phi'Y / sigma2`.
    pub q: DVector<f64>,
    /// MAP estimate `Z Phi'Y`.
    pub theta: DVector<f64>,
    /// `|Sigma^-1 Y|^2`
    pub resid_norm2: f64,
    /// Diagonal shift added to `P` before factoring (0 when none was needed).
    pub jitter: f64,
    pub sigma2: f64,
}

/// Objective value with its split gradient.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub f: f64,
    /// Gradient of `f0 = Y' Sigma^-1 Y`.
    pub grad_f0: DVector<f64>,
    /// Gradient of `f1 = log det Sigma`.
    pub grad_f1: DVector<f64>,
    /// Absent when `P(nu) = 0`.
    pub factors: Option<Factors>,
    pub p_is_zero: bool,
}

impl Evaluation {
    pub fn grad(&self) -> DVector<f64> {
        &self.grad_f0 + &self.grad_f1
    }
}

/// Objective value plus the factorizations it was computed from.
#[derive(Debug, Clone)]
pub enum Factorization {
    ZeroPrior { f: f64 },
    Full(Box<FullFactorization>),
}

#[derive(Debug, Clone)]
pub struct FullFactorization {
    f: f64,
    prior_factor: DMatrix<f64>,
    inner_factor: DMatrix<f64>,
    /// `S^-1 L' Phi'Y`
    w: DVector<f64>,
    jitter: f64,
}

impl Factorization {
    pub fn f(&self) -> f64 {
        match self {
            Factorization::ZeroPrior { f } => *f,
            Factorization::Full(full) => full.f,
        }
    }
}

fn check_point(problem: &ProblemData, x: &HyperPoint) -> Result<()> {
    problem.spec.validate(&x.nu)?;
    if !(x.sigma2 > 0.0 && x.sigma2.is_finite()) {
        return Err(Error::ParamOutOfDomain {
            name: "sigma2",
            value: x.sigma2,
            domain: "sigma2 > 0",
        });
    }
    Ok(())
}

fn cholesky_lower(a: DMatrix<f64>) -> Option<DMatrix<f64>> {
    Cholesky::<f64, Dyn>::new(a).map(|c| c.unpack())
}

/// Cholesky of `P`, retrying with `P + delta * mean(diag P) * I` along
/// [`JITTER_LADDER`].
fn factor_prior(p: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if let Some(l) = cholesky_lower(p.clone()) {
        return Ok((l, 0.0));
    }
    let n = p.nrows();
    let scale = p.trace() / n as f64;
    for delta in JITTER_LADDER {
        let shift = delta * scale;
        let mut shifted = p.clone();
        for i in 0..n {
            shifted[(i, i)] += shift;
        }
        if let Some(l) = cholesky_lower(shifted) {
            return Ok((l, shift));
        }
    }
    Err(Error::FactorizationFailure("prior covariance P"))
}

/// Factors `P` and `Q` at `x` and evaluates `f`. Cost `O(n^3)`.
pub fn factorize(problem: &ProblemData, x: &HyperPoint) -> Result<Factorization> {
    check_point(problem, x)?;
    let s2 = x.sigma2;
    let n = problem.order();
    let rows = problem.rows() as f64;
    // P can also vanish away from c = 0, e.g. DC at mu = 0.
    let p = if problem.spec.is_zero(&x.nu) {
        None
    } else {
        Some(problem.spec.eval(&x.nu)?).filter(|p| p.iter().any(|&v| v != 0.0))
    };
    let Some(p) = p else {
        let f = problem.y_norm2 / s2 + rows * s2.ln();
        return finite(f, "objective").map(|f| Factorization::ZeroPrior { f });
    };
    let (l, jitter) = factor_prior(&p)?;
    let mut q = l.tr_mul(&(&problem.gram * &l));
    q = (&q + q.transpose()) * 0.5;
    for i in 0..n {
        q[(i, i)] += s2;
    }
    let s = cholesky_lower(q).ok_or(Error::FactorizationFailure("Q = sigma2 I + L' Phi'Phi L"))?;
    let lt_cross = l.tr_mul(&problem.cross);
    let w = s
        .solve_lower_triangular(&lt_cross)
        .ok_or(Error::FactorizationFailure("Q = sigma2 I + L' Phi'Phi L"))?;
    let log_det_s: f64 = s.diagonal().iter().map(|d| d.ln()).sum();
    // log det Sigma = (N - 2n) log sigma2 + 2 log det S
    let f = (problem.y_norm2 - w.norm_squared()) / s2 + (rows - n as f64) * s2.ln() + 2.0 * log_det_s;
    let f = finite(f, "objective")?;
    Ok(Factorization::Full(Box::new(FullFactorization {
        f,
        prior_factor: l,
        inner_factor: s,
        w,
        jitter,
    })))
}

fn finite(v: f64, what: &'static str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteValue(what))
    }
}

fn finite_vec(v: DVector<f64>, what: &'static str) -> Result<DVector<f64>> {
    if v.iter().all(|e| e.is_finite()) {
        Ok(v)
    } else {
        Err(Error::NonFiniteValue(what))
    }
}

/// Objective value only.
pub fn value(problem: &ProblemData, x: &HyperPoint) -> Result<f64> {
    factorize(problem, x).map(|fac| fac.f())
}

/// Objective, split gradient and reusable factors at `x`.
pub fn evaluate(problem: &ProblemData, x: &HyperPoint) -> Result<Evaluation> {
    let fac = factorize(problem, x)?;
    finish(problem, x, &fac)
}

/// Completes a factorization into a full [`Evaluation`]. `fac` must come from
/// [`factorize`] at the same `x`.
pub fn finish(problem: &ProblemData, x: &HyperPoint, fac: &Factorization) -> Result<Evaluation> {
    let m = problem.spec.num_params();
    let s2 = x.sigma2;
    let rows = problem.rows() as f64;
    let partials = problem.spec.gradient(&x.nu)?;
    let mut grad_f0 = DVector::zeros(m + 1);
    let mut grad_f1 = DVector::zeros(m + 1);

    let full = match fac {
        Factorization::ZeroPrior { f } => {
            for (i, dp) in partials.iter().enumerate() {
                grad_f1[i] = problem.gram.dot(dp) / s2;
                grad_f0[i] = -(dp * &problem.cross).dot(&problem.cross) / (s2 * s2);
            }
            grad_f1[m] = rows / s2;
            grad_f0[m] = -problem.y_norm2 / (s2 * s2);
            return Ok(Evaluation {
                f: *f,
                grad_f0: finite_vec(grad_f0, "gradient of f0")?,
                grad_f1: finite_vec(grad_f1, "gradient of f1")?,
                factors: None,
                p_is_zero: true,
            });
        }
        Factorization::Full(full) => full,
    };

    let n = problem.order();
    let l = &full.prior_factor;
    let s = &full.inner_factor;
    let fail = || Error::FactorizationFailure("Q = sigma2 I + L' Phi'Phi L");

    // v = S^-T w, theta = Z Phi'Y = L v
    let v = s.tr_solve_lower_triangular(&full.w).ok_or_else(fail)?;
    let theta = l * &v;
    // T = S^-1 L', Z = T'T
    let t = s.solve_lower_triangular(&l.transpose()).ok_or_else(fail)?;
    let woodbury = t.tr_mul(&t);
    // Phi'Phi Z Phi'Phi = G'G with G = T Phi'Phi
    let g = &t * &problem.gram;
    let mut m_matrix = &problem.gram - g.tr_mul(&g);
    m_matrix = (&m_matrix + m_matrix.transpose()) * 0.5;
    let q = (&problem.cross - &problem.gram * &theta) / s2;

    for (i, dp) in partials.iter().enumerate() {
        grad_f0[i] = -(dp * &q).dot(&q);
        // Tr(M dP) as an elementwise sum; no matrix product.
        grad_f1[i] = m_matrix.dot(dp) / s2;
    }
    let resid_norm2 = (problem.y_norm2 - full.w.norm_squared()) / (s2 * s2) - v.norm_squared() / s2;
    grad_f0[m] = -resid_norm2;
    let s_inv = s.solve_lower_triangular(&DMatrix::identity(n, n)).ok_or_else(fail)?;
    grad_f1[m] = (rows - n as f64) / s2 + s_inv.norm_squared();

    Ok(Evaluation {
        f: full.f,
        grad_f0: finite_vec(grad_f0, "gradient of f0")?,
        grad_f1: finite_vec(grad_f1, "gradient of f1")?,
        factors: Some(Factors {
            prior_factor: l.clone(),
            inner_factor: s.clone(),
            woodbury,
            m_matrix,
            q,
            theta,
            resid_norm2,
            jitter: full.jitter,
            sigma2: s2,
        }),
        p_is_zero: false,
    })
}

/// Full `(m+1) x (m+1)` Hessian of `f` from the factors of a prior
/// [`evaluate`] call at the same `x`. Needs `m` extra `n x n` products.
pub fn hessian(problem: &ProblemData, x: &HyperPoint, eval: &Evaluation) -> Result<DMatrix<f64>> {
    let second = problem.spec.hessian(&x.nu)?;
    let fac = eval.factors.as_ref().ok_or(Error::CacheMissing)?;
    let m = problem.spec.num_params();
    let n = problem.order();
    let s2 = x.sigma2;
    let rows = problem.rows() as f64;
    let gram = &problem.gram;
    let q = &fac.q;

    let partials = problem.spec.gradient(&x.nu)?;
    // A = Phi' Sigma^-1 Phi
    let a = &fac.m_matrix / s2;
    let pq: Vec<DVector<f64>> = partials.iter().map(|dp| dp * q).collect();
    let a_pq: Vec<DVector<f64>> = pq.iter().map(|p| &a * p).collect();
    let a_dp: Vec<DMatrix<f64>> = partials.iter().map(|dp| &a * dp).collect();
    let a_dp_t: Vec<DMatrix<f64>> = a_dp.iter().map(|c| c.transpose()).collect();

    // Sigma^-1 Phi = Phi B with B = (I - Z Phi'Phi) / sigma2
    let k = &fac.woodbury * gram;
    let b = (DMatrix::identity(n, n) - &k) / s2;
    let q_tilde = b.tr_mul(q);
    let a_tilde = b.tr_mul(&(gram * &b));

    let mut h = DMatrix::zeros(m + 1, m + 1);
    for i in 0..m {
        for j in i..m {
            let d2 = &second[i][j];
            let h0 = 2.0 * pq[j].dot(&a_pq[i]) - (d2 * q).dot(q);
            let h1 = a.dot(d2) - a_dp[j].dot(&a_dp_t[i]);
            h[(i, j)] = h0 + h1;
            h[(j, i)] = h0 + h1;
        }
        let mixed = 2.0 * q_tilde.dot(&pq[i]) - a_tilde.dot(&partials[i]);
        h[(i, m)] = mixed;
        h[(m, i)] = mixed;
    }
    // 2 Y' Sigma^-3 Y - Tr(Sigma^-2)
    let y_sigma3_y = (fac.resid_norm2 - q.dot(&(&fac.woodbury * q))) / s2;
    let tr_sigma2 = (rows - 2.0 * k.trace() + k.dot(&k.transpose())) / (s2 * s2);
    h[(m, m)] = 2.0 * y_sigma3_y - tr_sigma2;
    if h.iter().all(|v| v.is_finite()) {
        Ok(h)
    } else {
        Err(Error::NonFiniteValue("Hessian"))
    }
}

/// MAP (posterior mean) impulse response at `x`,
/// `theta = (sigma2 P^-1 + Phi'Phi)^-1 Phi'Y = L S^-T S^-1 L' Phi'Y`.
pub fn map_estimate(problem: &ProblemData, x: &HyperPoint) -> Result<DVector<f64>> {
    match factorize(problem, x)? {
        Factorization::ZeroPrior { .. } => Ok(DVector::zeros(problem.order())),
        Factorization::Full(full) => {
            let v = full
                .inner_factor
                .tr_solve_lower_triangular(&full.w)
                .ok_or(Error::FactorizationFailure("Q = sigma2 I + L' Phi'Phi L"))?;
            finite_vec(&full.prior_factor * v, "MAP estimate")
        }
    }
}

/// Adapts a [`ProblemData`] to the solvers' [`Objective`] interface. The last
/// factorization is cached so that a gradient request at an already
/// line-searched point does not refactor.
#[derive(Debug)]
pub struct LikelihoodObjective<'a> {
    problem: &'a ProblemData,
    cache: Option<(DVector<f64>, Factorization)>,
}

impl<'a> LikelihoodObjective<'a> {
    pub fn new(problem: &'a ProblemData) -> Self {
        Self { problem, cache: None }
    }

    pub fn problem(&self) -> &ProblemData {
        self.problem
    }

    fn factorization(&mut self, x: &DVector<f64>) -> Result<&Factorization> {
        let hit = matches!(&self.cache, Some((cx, _)) if cx == x);
        if !hit {
            let fac = factorize(self.problem, &HyperPoint::from_slice(x.as_slice()))?;
            self.cache = Some((x.clone(), fac));
        }
        Ok(&self.cache.as_ref().expect("cache filled above").1)
    }
}

impl Objective for LikelihoodObjective<'_> {
    fn value(&mut self, x: &DVector<f64>) -> Result<f64> {
        self.factorization(x).map(|f| f.f())
    }

    fn split_eval(&mut self, x: &DVector<f64>) -> Result<SplitEval> {
        let problem = self.problem;
        let fac = self.factorization(x)?;
        let e = finish(problem, &HyperPoint::from_slice(x.as_slice()), fac)?;
        Ok(SplitEval {
            f: e.f,
            grad_f0: e.grad_f0,
            grad_f1: e.grad_f1,
        })
    }
}
