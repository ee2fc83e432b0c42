//! Diagonal scaling from a split of the gradient, `grad f = V - U` with
//! `V, U > 0`.
//!
//! The scaled step `x - d * grad f` stays inside the box whenever `d` is the
//! unclipped entry returned by [`raw_scaling`]: moving up is limited by
//! `(u - x) / U` since `|grad f| <= U` there, and moving down by `(x - l) / V`
//! since `grad f <= V`.

use nalgebra::DVector;

use super::bounds::{Bounds, IndexClass};

/// Splits `g = g0 + g1` into `(V, U)` with `V > 0`, `U > 0` and `V - U = g`.
///
/// Positivity by case, with `g > 0`:
/// * `g1 < 0`: `V = g0 = g - g1 > 0`, `U = -g1 > 0`;
/// * `g1 >= 0`, `g0 < 0`: `V = g1 = g - g0 > 0`, `U = -g0 > 0`;
/// * otherwise `V = g + zeta`, `U = zeta`.
///
/// and with `g <= 0`:
/// * `g0 > 0`: `U = -g1 >= g0 > 0`, `V = g0`;
/// * `g0 < 0`, `g1 > 0`: `U = -g0`, `V = g1`;
/// * otherwise `U = zeta - g`, `V = zeta`.
///
/// The first two cases of each branch reproduce `g` exactly in floating point;
/// the `zeta` cases carry the rounding of one addition.
pub fn split_gradient(grad_f0: &DVector<f64>, grad_f1: &DVector<f64>, zeta: f64) -> (DVector<f64>, DVector<f64>) {
    assert_eq!(grad_f0.len(), grad_f1.len(), "split gradient length mismatch");
    assert!(zeta > 0.0, "zeta must be positive");
    let n = grad_f0.len();
    let mut v = DVector::zeros(n);
    let mut u = DVector::zeros(n);
    for i in 0..n {
        let (g0, g1) = (grad_f0[i], grad_f1[i]);
        let g = g0 + g1;
        let (vi, ui) = if g > 0.0 {
            if g1 < 0.0 {
                (g0, -g1)
            } else if g0 < 0.0 {
                (g1, -g0)
            } else {
                (g + zeta, zeta)
            }
        } else if g0 > 0.0 {
            (g0, -g1)
        } else if g0 < 0.0 && g1 > 0.0 {
            (g1, -g0)
        } else {
            (zeta, zeta - g)
        };
        debug_assert!(vi > 0.0 && ui > 0.0, "split gradient lost positivity at {i}");
        v[i] = vi;
        u[i] = ui;
    }
    (v, u)
}

/// Unclipped scaling entries `d~`.
pub fn raw_scaling(
    x: &DVector<f64>,
    bounds: &Bounds,
    v: &DVector<f64>,
    u: &DVector<f64>,
    grad: &DVector<f64>,
) -> DVector<f64> {
    let (lo, hi) = (bounds.lower(), bounds.upper());
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|i| match bounds.class(i) {
            IndexClass::Both if grad[i] <= 0.0 => (hi[i] - x[i]) / u[i],
            IndexClass::UpperOnly => (hi[i] - x[i]) / u[i],
            IndexClass::Both | IndexClass::LowerOnly => (x[i] - lo[i]) / v[i],
            IndexClass::Free => 1.0,
        }),
    )
}

/// Diagonal of the scaling matrix: [`raw_scaling`] clipped to `[l_min, l_max]`.
pub fn scaling_matrix(
    x: &DVector<f64>,
    bounds: &Bounds,
    v: &DVector<f64>,
    u: &DVector<f64>,
    grad: &DVector<f64>,
    l_min: f64,
    l_max: f64,
) -> DVector<f64> {
    raw_scaling(x, bounds, v, u, grad).map(|d| d.max(l_min).min(l_max))
}

/// Scaling for pure lower bounds, `clip((x - l) / V)`.
pub fn lower_bound_scaling(x: &DVector<f64>, lower: &DVector<f64>, v: &DVector<f64>, l_min: f64, l_max: f64) -> DVector<f64> {
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|i| ((x[i] - lower[i]) / v[i]).max(l_min).min(l_max)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v1(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn split_cases() {
        let (v, u) = split_gradient(&v1(-3.0), &v1(5.0), 1e-5);
        assert_eq!((v[0], u[0]), (5.0, 3.0));
        let (v, u) = split_gradient(&v1(2.0), &v1(-5.0), 1e-5);
        assert_eq!((v[0], u[0]), (2.0, 5.0));
        let (v, u) = split_gradient(&v1(0.0), &v1(0.0), 1e-5);
        assert_eq!((v[0], u[0]), (1e-5, 1e-5));
    }

    #[test]
    fn lower_bound_entry() {
        let b = Bounds::new(vec![0.0], vec![f64::INFINITY]).unwrap();
        let d = raw_scaling(&v1(2.0), &b, &v1(4.0), &v1(1.0), &v1(3.0));
        assert_eq!(d[0], 0.5);
    }

    #[test]
    fn box_entry_keeps_step_feasible() {
        let b = Bounds::new(vec![0.0], vec![3.0]).unwrap();
        // grad = V - U = 2 - 4 = -2
        let d = raw_scaling(&v1(1.0), &b, &v1(2.0), &v1(4.0), &v1(-2.0));
        assert_eq!(d[0], 0.5);
        assert_eq!(1.0 - d[0] * -2.0, 2.0);
    }

    #[test]
    fn free_entry_is_one_and_clipping_applies() {
        let b = Bounds::unbounded(1);
        assert_eq!(raw_scaling(&v1(7.0), &b, &v1(1.0), &v1(1.0), &v1(0.0))[0], 1.0);
        let lb = Bounds::new(vec![0.0], vec![f64::INFINITY]).unwrap();
        let d = scaling_matrix(&v1(0.0), &lb, &v1(1.0), &v1(1.0), &v1(0.0), 1e-5, 1e10);
        assert_eq!(d[0], 1e-5);
    }
}
