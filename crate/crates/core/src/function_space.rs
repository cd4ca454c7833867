//! Locally constant functions on `B_r` with constancy exponent `l`.
//!
//! A [`GridFunction`] stores one value per coset of `B_l` in `B_r`, in the
//! canonical order of [`CosetGrid`]. Each coset carries Haar measure `p^l`
//! (with `Z_p` of measure one), so integrals are finite sums. All sums run
//! in ascending index order.

use std::sync::Arc;

use num::complex::Complex64;
use num::rational::BigRational;

use crate::error::{Error, Result};
use crate::padic::{ball_indicator, CosetGrid, PAdicRational};
use crate::scalars::{QuadScalar, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<S> {
    grid: Arc<CosetGrid>,
    values: Vec<S>,
}

pub(crate) fn ensure_same_grid(a: &CosetGrid, b: &CosetGrid) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch(format!(
            "(p={}, r={}, l={}) vs (p={}, r={}, l={})",
            a.prime(),
            a.r(),
            a.l(),
            b.prime(),
            b.r(),
            b.l()
        )));
    }
    Ok(())
}

impl<S: Scalar> GridFunction<S> {
    pub fn new(grid: Arc<CosetGrid>, values: Vec<S>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), actual: values.len() });
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: Arc<CosetGrid>) -> Self {
        let values = vec![S::zero(); grid.len()];
        GridFunction { grid, values }
    }

    pub fn constant(grid: Arc<CosetGrid>, c: S) -> Self {
        let values = vec![c; grid.len()];
        GridFunction { grid, values }
    }

    /// Builds values from `(index, representative)`.
    pub fn from_fn(grid: Arc<CosetGrid>, mut f: impl FnMut(usize, &BigRational) -> S) -> Self {
        let values = grid.representatives().iter().enumerate().map(|(m, x)| f(m, x)).collect();
        GridFunction { grid, values }
    }

    /// Indicator of the ball `B_gamma(center)`; needs `gamma >= l`.
    pub fn ball_indicator(grid: Arc<CosetGrid>, center: &BigRational, gamma: i32) -> Result<Self> {
        if gamma < grid.l() {
            return Err(Error::ScaleOutOfWindow { gamma, min: grid.l(), max: i32::MAX });
        }
        let p = grid.prime();
        Ok(Self::from_fn(grid, |_, x| {
            if ball_indicator(x, center, gamma, p) { S::one() } else { S::zero() }
        }))
    }

    /// `Omega(|x|_p)`, the indicator of `Z_p`.
    pub fn omega(grid: Arc<CosetGrid>) -> Result<Self> {
        Self::ball_indicator(grid, &BigRational::from_integer(0.into()), 0)
    }

    /// Indicator of a single coset.
    pub fn coset_indicator(grid: Arc<CosetGrid>, m: usize) -> Self {
        Self::from_fn(grid, |i, _| if i == m { S::one() } else { S::zero() })
    }

    pub fn grid(&self) -> &Arc<CosetGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at an arbitrary point of `B_r`.
    pub fn evaluate(&self, x: &BigRational) -> Result<&S> {
        let idx = self.grid.coset_index(&PAdicRational::new(x.clone(), self.grid.prime()))?;
        Ok(&self.values[idx])
    }

    /// `int_{B_r} f d_p x = p^l sum_m f[m]`.
    pub fn integrate(&self) -> S {
        let sum = self.values.iter().cloned().fold(S::zero(), |acc, v| acc + v);
        sum.scale_rational(&self.grid.cell_measure())
    }

    /// `int conj(f) g d_p x`.
    pub fn inner_product(&self, other: &Self) -> Result<S> {
        ensure_same_grid(&self.grid, &other.grid)?;
        let mut sum = S::zero();
        for (f, g) in self.values.iter().zip(&other.values) {
            if f.is_zero() || g.is_zero() {
                continue;
            }
            sum = sum + f.conj() * g.clone();
        }
        Ok(sum.scale_rational(&self.grid.cell_measure()))
    }

    pub fn norm_squared(&self) -> S {
        self.inner_product(self).expect("same grid")
    }

    pub fn pointwise_product(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |f, g| f.clone() * g.clone())
    }

    /// `h(x) = int_{B_r} f(y) g(x - y) d_p y`, evaluated as
    /// `p^l sum_{m'} f[m'] g[index(x_m - x_{m'})]`.
    pub fn convolve_direct(&self, other: &Self) -> Result<Self> {
        ensure_same_grid(&self.grid, &other.grid)?;
        let n = self.grid.len();
        let measure = self.grid.cell_measure();
        let values = (0..n)
            .map(|m| {
                let mut sum = S::zero();
                for (mp, f) in self.values.iter().enumerate() {
                    let g = &other.values[self.grid.difference_index(m, mp)];
                    if f.is_zero() || g.is_zero() {
                        continue;
                    }
                    sum = sum + f.clone() * g.clone();
                }
                sum.scale_rational(&measure)
            })
            .collect();
        Ok(GridFunction { grid: self.grid.clone(), values })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |f, g| f.clone() + g.clone())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |f, g| f.clone() - g.clone())
    }

    pub fn scale(&self, c: &S) -> Self {
        self.map(|v| c.clone() * v.clone())
    }

    pub fn scale_rational(&self, q: &BigRational) -> Self {
        self.map(|v| v.scale_rational(q))
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: &S, other: &Self) -> Result<()> {
        ensure_same_grid(&self.grid, &other.grid)?;
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            if o.is_zero() {
                continue;
            }
            *v = v.clone() + c.clone() * o.clone();
        }
        Ok(())
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> GridFunction<T> {
        GridFunction { grid: self.grid.clone(), values: self.values.iter().map(f).collect() }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&S, &S) -> S) -> Result<Self> {
        ensure_same_grid(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(a, b)).collect();
        Ok(GridFunction { grid: self.grid.clone(), values })
    }

    pub fn to_complex(&self) -> GridFunction<Complex64> {
        self.map(|v| v.to_complex())
    }

    /// Embeds into a grid with a larger ball and finer cells.
    ///
    /// Values are replicated across sub-cosets; points outside the original
    /// ball get zero.
    pub fn embed(&self, target: Arc<CosetGrid>) -> Result<Self> {
        if !target.refines(&self.grid) {
            return Err(Error::GridMismatch(format!(
                "(r={}, l={}) does not refine (r={}, l={})",
                target.r(),
                target.l(),
                self.grid.r(),
                self.grid.l()
            )));
        }
        let p = self.grid.prime();
        let values = target
            .representatives()
            .iter()
            .map(|x| {
                let x = PAdicRational::new(x.clone(), p);
                if x.in_ball(self.grid.r()) {
                    let idx = self.grid.coset_index(&x).expect("inside the ball");
                    self.values[idx].clone()
                } else {
                    S::zero()
                }
            })
            .collect();
        Ok(GridFunction { grid: target, values })
    }

    /// `max_m |f[m] - g[m]|` in the complex embedding.
    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        ensure_same_grid(&self.grid, &other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a.to_complex() - b.to_complex()).norm())
            .fold(0.0, f64::max))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.to_complex().norm()).fold(0.0, f64::max)
    }
}

impl GridFunction<QuadScalar> {
    /// Exact equality of value vectors on the same grid.
    pub fn exactly_equals(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}
