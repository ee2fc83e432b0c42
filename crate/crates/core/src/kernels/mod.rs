//! Prior covariance (kernel) matrices for impulse-response coefficients.
//!
//! Three parametric families encode exponentially decaying responses:
//!
//! * TC, `P[k][j] = c * min(mu^k, mu^j)` with `nu = (c, mu)`;
//! * SS (second-order stable spline), with `nu = (c, mu)`;
//! * DC, `P[k][j] = c * mu^((k+j)/2) * rho^|k-j|` with `nu = (c, mu, rho)`;
//!
//! and the multiple kernel `P(nu) = sum_i nu_i * P_i` combines fixed basis
//! matrices with nonnegative weights. Indices `k, j` run over `1..=n`.
//!
//! Every matrix returned here is exactly symmetric: the upper triangle is
//! computed and mirrored.

pub mod presets;

use std::borrow::Cow;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use presets::{make_preset, Preset, PresetProblem, SIGMA2_LOWER};

/// Kernel family together with any fixed structural data.
#[derive(Debug, Clone)]
pub enum KernelFamily {
    Tc,
    Ss,
    Dc,
    /// Nonnegative combination of fixed symmetric PSD basis matrices.
    Multiple(Arc<[DMatrix<f64>]>),
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Tc => "TC",
            KernelFamily::Ss => "SS",
            KernelFamily::Dc => "DC",
            KernelFamily::Multiple(_) => "Multiple",
        }
    }
}

/// A kernel family bound to a model order `n`. Immutable once built and cheap
/// to clone (basis matrices are shared).
#[derive(Debug, Clone)]
pub struct KernelSpec {
    family: KernelFamily,
    order: usize,
}

impl KernelSpec {
    pub fn tc(order: usize) -> Result<Self> {
        Self::parametric(KernelFamily::Tc, order)
    }

    pub fn ss(order: usize) -> Result<Self> {
        Self::parametric(KernelFamily::Ss, order)
    }

    pub fn dc(order: usize) -> Result<Self> {
        Self::parametric(KernelFamily::Dc, order)
    }

    fn parametric(family: KernelFamily, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidConfig("model order must be at least 1".into()));
        }
        Ok(Self { family, order })
    }

    /// Multiple kernel over the given basis. Every basis matrix must be square,
    /// of a common order, and exactly symmetric.
    pub fn multiple(basis: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = basis
            .first()
            .ok_or_else(|| Error::InvalidConfig("multiple kernel needs a non-empty basis".into()))?;
        let order = first.nrows();
        if order == 0 {
            return Err(Error::InvalidConfig("model order must be at least 1".into()));
        }
        for p in &basis {
            if p.nrows() != order || p.ncols() != order {
                return Err(Error::DimensionMismatch {
                    what: "basis matrix order",
                    expected: order,
                    got: if p.nrows() != order { p.nrows() } else { p.ncols() },
                });
            }
            if p != &p.transpose() {
                return Err(Error::InvalidConfig("basis matrix is not symmetric".into()));
            }
        }
        Ok(Self {
            family: KernelFamily::Multiple(basis.into()),
            order,
        })
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    /// Model order `n` (number of impulse-response coefficients).
    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of kernel hyperparameters `m`.
    pub fn num_params(&self) -> usize {
        match &self.family {
            KernelFamily::Tc | KernelFamily::Ss => 2,
            KernelFamily::Dc => 3,
            KernelFamily::Multiple(basis) => basis.len(),
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        match &self.family {
            KernelFamily::Tc | KernelFamily::Ss => vec!["c".into(), "mu".into()],
            KernelFamily::Dc => vec!["c".into(), "mu".into(), "rho".into()],
            KernelFamily::Multiple(basis) => (1..=basis.len()).map(|i| format!("nu{i}")).collect(),
        }
    }

    /// Checks length and domain of `nu` for this family.
    pub fn validate(&self, nu: &[f64]) -> Result<()> {
        let m = self.num_params();
        if nu.len() != m {
            return Err(Error::DimensionMismatch {
                what: "kernel hyperparameters",
                expected: m,
                got: nu.len(),
            });
        }
        match &self.family {
            KernelFamily::Tc | KernelFamily::Ss | KernelFamily::Dc => {
                check(nu[0] >= 0.0 && nu[0].is_finite(), "c", nu[0], "c >= 0")?;
                check((0.0..1.0).contains(&nu[1]), "mu", nu[1], "0 <= mu < 1")?;
                if let KernelFamily::Dc = self.family {
                    check(nu[2] > -1.0 && nu[2] < 1.0, "rho", nu[2], "-1 < rho < 1")?;
                }
            }
            KernelFamily::Multiple(_) => {
                for &v in nu {
                    check(v >= 0.0 && v.is_finite(), "nu", v, "nu_i >= 0")?;
                }
            }
        }
        Ok(())
    }

    /// True when `P(nu)` is the zero matrix by structure: every weight zero for
    /// the multiple kernel, `c = 0` otherwise. Assumes `nu` is valid.
    pub fn is_zero(&self, nu: &[f64]) -> bool {
        match &self.family {
            KernelFamily::Multiple(_) => nu.iter().all(|&v| v == 0.0),
            _ => nu[0] == 0.0,
        }
    }

    /// Prior covariance `P(nu)`.
    pub fn eval(&self, nu: &[f64]) -> Result<DMatrix<f64>> {
        self.validate(nu)?;
        match &self.family {
            KernelFamily::Multiple(basis) => {
                let mut p = DMatrix::zeros(self.order, self.order);
                for (w, b) in nu.iter().zip(basis.iter()) {
                    if *w != 0.0 {
                        p.zip_apply(b, |acc, v| *acc += w * v);
                    }
                }
                Ok(p)
            }
            family => symmetric_from(self.order, |k, j| entry(family, nu, k, j, Deriv::Value)),
        }
    }

    /// Partial derivatives `dP/dnu_i`, one matrix per hyperparameter. For the
    /// multiple kernel these are the basis matrices themselves (borrowed).
    pub fn gradient(&self, nu: &[f64]) -> Result<Cow<'_, [DMatrix<f64>]>> {
        self.validate(nu)?;
        match &self.family {
            KernelFamily::Multiple(basis) => Ok(Cow::Borrowed(&basis[..])),
            family => {
                let out = (0..self.num_params())
                    .map(|i| symmetric_from(self.order, |k, j| entry(family, nu, k, j, Deriv::First(i))))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Cow::Owned(out))
            }
        }
    }

    /// Second partials `d2P/dnu_i dnu_j` as an `m x m` table of matrices.
    pub fn hessian(&self, nu: &[f64]) -> Result<Vec<Vec<DMatrix<f64>>>> {
        self.validate(nu)?;
        let m = self.num_params();
        let n = self.order;
        match &self.family {
            KernelFamily::Multiple(_) => Ok(vec![vec![DMatrix::zeros(n, n); m]; m]),
            family => {
                let mut out = vec![vec![DMatrix::zeros(n, n); m]; m];
                for (a, b) in (0..m).flat_map(|a| (a..m).map(move |b| (a, b))) {
                    let d = symmetric_from(n, |k, j| entry(family, nu, k, j, Deriv::Second(a, b)))?;
                    out[b][a] = d.clone();
                    out[a][b] = d;
                }
                Ok(out)
            }
        }
    }
}

fn check(ok: bool, name: &'static str, value: f64, domain: &'static str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::ParamOutOfDomain { name, value, domain })
    }
}

#[derive(Debug, Clone, Copy)]
enum Deriv {
    Value,
    First(usize),
    Second(usize, usize),
}

fn symmetric_from<F>(n: usize, mut f: F) -> Result<DMatrix<f64>>
where
    F: FnMut(usize, usize) -> Result<f64>,
{
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..=j {
            let v = f(k + 1, j + 1)?;
            out[(k, j)] = v;
            out[(j, k)] = v;
        }
    }
    Ok(out)
}

/// `d^order/dt^order (t^(twice_exp / 2))`. Exponents are integers or
/// half-integers; at `t = 0` the right limit is used, and a negative residual
/// exponent with a nonzero coefficient is reported as undefined.
fn pow_deriv(t: f64, twice_exp: i32, order: u32, name: &'static str) -> Result<f64> {
    let p = twice_exp as f64 / 2.0;
    let coef: f64 = (0..order).map(|i| p - i as f64).product();
    if coef == 0.0 {
        return Ok(0.0);
    }
    let rest = twice_exp - 2 * order as i32;
    if t == 0.0 {
        return match rest.cmp(&0) {
            std::cmp::Ordering::Equal => Ok(coef),
            std::cmp::Ordering::Greater => Ok(0.0),
            std::cmp::Ordering::Less => Err(Error::DerivativeUndefined { name }),
        };
    }
    let power = if rest % 2 == 0 {
        t.powi(rest / 2)
    } else {
        t.sqrt().powi(rest)
    };
    Ok(coef * power)
}

/// One entry (1-based `k <= j`) of `P`, or of one of its partials.
fn entry(family: &KernelFamily, nu: &[f64], k: usize, j: usize, which: Deriv) -> Result<f64> {
    let c = nu[0];
    let mu = nu[1];
    // Orders of differentiation w.r.t. c, mu, rho.
    let (dc, dmu, drho) = match which {
        Deriv::Value => (0, 0, 0),
        Deriv::First(i) => unit(i),
        Deriv::Second(a, b) => {
            let (x, y, z) = unit(a);
            let (u, v, w) = unit(b);
            (x + u, y + v, z + w)
        }
    };
    // P is linear in c.
    let c_factor = match dc {
        0 => c,
        1 => 1.0,
        _ => return Ok(0.0),
    };
    let (k, j) = (k as i32, j as i32);
    let shape = match family {
        KernelFamily::Tc => {
            if drho > 0 {
                return Ok(0.0);
            }
            // min(mu^k, mu^j) = mu^max(k, j) on [0, 1)
            pow_deriv(mu, 2 * k.max(j), dmu, "mu")?
        }
        KernelFamily::Ss => {
            if drho > 0 {
                return Ok(0.0);
            }
            let (hi, lo) = (k.max(j), k.min(j));
            // mu^(2 hi) / 2 * (mu^lo - mu^hi / 3)
            pow_deriv(mu, 2 * (2 * hi + lo), dmu, "mu")? / 2.0
                - pow_deriv(mu, 2 * (3 * hi), dmu, "mu")? / 6.0
        }
        KernelFamily::Dc => {
            let rho = nu[2];
            let lag = (k - j).abs();
            pow_deriv(mu, k + j, dmu, "mu")? * int_pow_deriv(rho, lag, drho, "rho")?
        }
        KernelFamily::Multiple(_) => unreachable!("multiple kernel entries are not formula-based"),
    };
    Ok(c_factor * shape)
}

fn unit(i: usize) -> (u32, u32, u32) {
    match i {
        0 => (1, 0, 0),
        1 => (0, 1, 0),
        _ => (0, 0, 1),
    }
}

/// `d^order/dt^order (t^exp)` for integer `exp >= 0` and any sign of `t`.
fn int_pow_deriv(t: f64, exp: i32, order: u32, name: &'static str) -> Result<f64> {
    let coef: f64 = (0..order as i32).map(|i| (exp - i) as f64).product();
    if coef == 0.0 {
        return Ok(0.0);
    }
    let rest = exp - order as i32;
    if rest < 0 {
        return Err(Error::DerivativeUndefined { name });
    }
    Ok(coef * t.powi(rest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn tc_two_by_two() {
        let p = KernelSpec::tc(2).unwrap().eval(&[1.0, 0.5]).unwrap();
        assert_eq!(p, mat(&[&[0.5, 0.25], &[0.25, 0.25]]));
    }

    #[test]
    fn dc_zero_correlation_is_diagonal() {
        let p = KernelSpec::dc(2).unwrap().eval(&[1.0, 0.25, 0.0]).unwrap();
        assert_eq!(p, mat(&[&[0.25, 0.0], &[0.0, 0.0625]]));
    }

    #[test]
    fn ss_scalar() {
        let p = KernelSpec::ss(1).unwrap().eval(&[1.0, 0.9]).unwrap();
        assert_relative_eq!(p[(0, 0)], 0.243, max_relative = 1e-14);
    }

    #[test]
    fn multiple_is_linear_combination() {
        let p1 = KernelSpec::tc(3).unwrap().eval(&[1.0, 0.6]).unwrap();
        let p2 = KernelSpec::ss(3).unwrap().eval(&[1.0, 0.8]).unwrap();
        let spec = KernelSpec::multiple(vec![p1.clone(), p2.clone()]).unwrap();
        assert_eq!(spec.eval(&[2.0, 0.0]).unwrap(), &p1 * 2.0);
        let grads = spec.gradient(&[0.3, 0.7]).unwrap();
        assert_eq!(grads[0], p1);
        assert_eq!(grads[1], p2);
        assert!(spec.hessian(&[0.3, 0.7]).unwrap().iter().flatten().all(|h| h.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn tc_scalar_partials() {
        let spec = KernelSpec::tc(1).unwrap();
        let g = spec.gradient(&[2.0, 0.5]).unwrap();
        assert_eq!(g[0][(0, 0)], 0.5);
        assert_eq!(g[1][(0, 0)], 2.0);
        let h = spec.hessian(&[2.0, 0.5]).unwrap();
        assert_eq!(h[0][1][(0, 0)], 1.0);
        assert_eq!(h[1][0][(0, 0)], 1.0);
        assert_eq!(h[0][0][(0, 0)], 0.0);
    }

    #[test]
    fn dc_partial_in_c_is_p_over_c() {
        let spec = KernelSpec::dc(6).unwrap();
        let nu = [1.7, 0.8, -0.4];
        let p = spec.eval(&nu).unwrap();
        let g = spec.gradient(&nu).unwrap();
        assert_relative_eq!(g[0], p / 1.7, max_relative = 1e-14);
    }

    #[test]
    fn out_of_domain_is_rejected() {
        let tc = KernelSpec::tc(3).unwrap();
        assert!(matches!(tc.eval(&[1.0, 1.0]), Err(Error::ParamOutOfDomain { name: "mu", .. })));
        assert!(matches!(tc.eval(&[-1.0, 0.5]), Err(Error::ParamOutOfDomain { name: "c", .. })));
        assert!(matches!(tc.eval(&[1.0, 0.5, 0.1]), Err(Error::DimensionMismatch { .. })));
        let dc = KernelSpec::dc(3).unwrap();
        assert!(matches!(dc.eval(&[1.0, 0.5, 1.0]), Err(Error::ParamOutOfDomain { name: "rho", .. })));
    }

    #[test]
    fn mu_zero_uses_right_limit() {
        let tc = KernelSpec::tc(3).unwrap();
        let g = tc.gradient(&[1.0, 0.0]).unwrap();
        assert_eq!(g[1][(0, 0)], 1.0);
        assert_eq!(g[1][(1, 1)], 0.0);
        assert_eq!(g[1][(0, 2)], 0.0);
        // DC second derivative in mu at mu = 0 hits mu^(-1/2) for k + j = 3.
        let dc = KernelSpec::dc(2).unwrap();
        assert!(dc.gradient(&[1.0, 0.0, 0.5]).is_ok());
        assert!(matches!(
            dc.hessian(&[1.0, 0.0, 0.5]),
            Err(Error::DerivativeUndefined { name: "mu" })
        ));
    }

    #[test]
    fn multiple_rejects_bad_basis() {
        assert!(KernelSpec::multiple(vec![]).is_err());
        let asym = mat(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(KernelSpec::multiple(vec![asym]).is_err());
        let a = DMatrix::<f64>::identity(2, 2);
        let b = DMatrix::<f64>::identity(3, 3);
        assert!(matches!(KernelSpec::multiple(vec![a, b]), Err(Error::DimensionMismatch { .. })));
    }
}
