use nalgebra::DVector;

use crate::error::{Error, Result};

/// Which sides of a coordinate's interval are finite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexClass {
    /// `l > -inf` and `u < +inf`
    Both,
    /// `l = -inf`, `u < +inf`
    UpperOnly,
    /// `l > -inf`, `u = +inf`
    LowerOnly,
    Free,
}

/// Feasible box `l <= x <= u`; entries may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                what: "upper bounds",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (index, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() || l >= u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::InvalidBounds { index, lower: l, upper: u });
            }
        }
        Ok(Self {
            lower: DVector::from_vec(lower),
            upper: DVector::from_vec(upper),
        })
    }

    pub fn unbounded(dim: usize) -> Self {
        Self {
            lower: DVector::from_element(dim, f64::NEG_INFINITY),
            upper: DVector::from_element(dim, f64::INFINITY),
        }
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn class(&self, i: usize) -> IndexClass {
        match (self.lower[i].is_finite(), self.upper[i].is_finite()) {
            (true, true) => IndexClass::Both,
            (false, true) => IndexClass::UpperOnly,
            (true, false) => IndexClass::LowerOnly,
            (false, false) => IndexClass::Free,
        }
    }

    /// True when only lower bounds are finite (and every lower bound is).
    pub fn is_lower_only(&self) -> bool {
        (0..self.dim()).all(|i| self.class(i) == IndexClass::LowerOnly)
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim() && x.iter().enumerate().all(|(i, &v)| self.lower[i] <= v && v <= self.upper[i])
    }

    /// Componentwise `median(l, z, u)`.
    ///
    /// For a box this is also the projection in the norm `(x-z)' D^-1 (x-z)`
    /// for every positive diagonal `D`: the problem separates by coordinate and
    /// each one-dimensional piece is minimized by clamping.
    pub fn project(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            z.len(),
            z.iter()
                .enumerate()
                .map(|(i, &v)| v.max(self.lower[i]).min(self.upper[i])),
        )
    }
}

/// Free-function form of [`Bounds::project`].
pub fn project_box(z: &DVector<f64>, bounds: &Bounds) -> DVector<f64> {
    bounds.project(z)
}
