//! Vladimirov and hierarchical kernel operators on a coset grid.
//!
//! Functions on the grid are constant on balls of radius `p^l`, so the
//! singular part of `integral (f(y) - f(x)) K(x, y) dy` over the coset of `x`
//! vanishes. The remaining integral is a finite sum with weight `p^l` per
//! coset and the matrices below are exact, with the diagonal fixed by the
//! zero row-sum condition.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num::bigint::BigInt;
use num::complex::Complex64;
use num::integer::Integer;
use num::rational::BigRational;
use num::traits::{One, Signed, ToPrimitive, Zero};

use crate::bases::{BasisKind, BasisSet};
use crate::error::{Error, Result};
use crate::function_space::GridFunction;
use crate::padic::{frac_part, padic_norm, parse_rational, CosetGrid, Prime};
use crate::scalars::{join_prime, Backend, QuadScalar, Scalar};

/// The order `alpha > 0` of the Vladimirov operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Alpha {
    Int(u32),
    Real(f64),
}

impl Alpha {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::NonPositiveAlpha(alpha));
        }
        if alpha.fract() == 0.0 && alpha <= u32::MAX as f64 {
            Ok(Alpha::Int(alpha as u32))
        } else {
            Ok(Alpha::Real(alpha))
        }
    }

    /// Accepts integers, decimals and `a/b` fractions.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let value = if s.contains('/') {
            parse_rational(s)?.to_f64().unwrap_or(f64::NAN)
        } else {
            s.parse::<f64>().map_err(|_| Error::Format(format!("invalid alpha '{s}'")))?
        };
        Self::new(value)
    }

    pub fn value(&self) -> f64 {
        match *self {
            Alpha::Int(a) => a as f64,
            Alpha::Real(a) => a,
        }
    }

    pub fn as_int(&self) -> Option<u32> {
        match *self {
            Alpha::Int(a) => Some(a),
            Alpha::Real(_) => None,
        }
    }

    pub fn require_int(&self) -> Result<u32> {
        self.as_int().ok_or(Error::NonIntegerAlpha(self.value()))
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Int(a) => write!(f, "{a}"),
            Alpha::Real(a) => write!(f, "{a}"),
        }
    }
}

/// A real number held exactly when possible.
#[derive(Clone, Debug, PartialEq)]
pub enum RealValue {
    Exact(BigRational),
    Float(f64),
}

pub type Eigenvalue = RealValue;
pub type GammaValue = RealValue;

impl RealValue {
    pub fn zero() -> Self {
        RealValue::Exact(BigRational::zero())
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            RealValue::Exact(q) => q.to_f64().unwrap_or(f64::NAN),
            RealValue::Float(x) => *x,
        }
    }

    pub fn exact(&self) -> Option<&BigRational> {
        match self {
            RealValue::Exact(q) => Some(q),
            RealValue::Float(_) => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, RealValue::Exact(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            RealValue::Exact(q) => q.is_zero(),
            RealValue::Float(x) => *x == 0.0,
        }
    }

    pub fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(match self {
            RealValue::Exact(q) => RealValue::Exact(q.recip()),
            RealValue::Float(x) => RealValue::Float(1.0 / x),
        })
    }

    /// Parses `a/b` or an integer as exact, anything else as a float.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(q) = parse_rational(s) {
            return Ok(RealValue::Exact(q));
        }
        s.parse::<f64>()
            .map(RealValue::Float)
            .map_err(|_| Error::Format(format!("invalid real value '{s}'")))
    }

    fn combine(self, rhs: Self, exact: impl Fn(BigRational, BigRational) -> BigRational, float: impl Fn(f64, f64) -> f64) -> Self {
        match (self, rhs) {
            (RealValue::Exact(a), RealValue::Exact(b)) => RealValue::Exact(exact(a, b)),
            (a, b) => RealValue::Float(float(a.to_f64(), b.to_f64())),
        }
    }
}

impl fmt::Display for RealValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RealValue::Exact(q) => write!(f, "{q}"),
            RealValue::Float(x) => write!(f, "{x:.16e}"),
        }
    }
}

impl Add for RealValue {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.combine(rhs, |a, b| a + b, |a, b| a + b)
    }
}

impl Sub for RealValue {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.combine(rhs, |a, b| a - b, |a, b| a - b)
    }
}

impl Mul for RealValue {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.combine(rhs, |a, b| a * b, |a, b| a * b)
    }
}

impl Neg for RealValue {
    type Output = Self;
    fn neg(self) -> Self {
        match self {
            RealValue::Exact(q) => RealValue::Exact(-q),
            RealValue::Float(x) => RealValue::Float(-x),
        }
    }
}

/// `p^(alpha e)`.
fn p_pow_alpha(p: Prime, alpha: Alpha, e: i64) -> RealValue {
    match alpha {
        Alpha::Int(a) => RealValue::Exact(p.pow(a as i64 * e)),
        Alpha::Real(a) => RealValue::Float(p.powf(a * e as f64)),
    }
}

fn rat(q: BigRational) -> RealValue {
    RealValue::Exact(q)
}

/// `Gamma_p(-alpha) = (1 - p^(-alpha-1)) / (1 - p^alpha)`.
pub fn gamma_p(p: Prime, alpha: Alpha) -> GammaValue {
    let one = rat(BigRational::one());
    let num = one.clone() - p_pow_alpha(p, alpha, -1) * rat(p.pow(-1));
    let den = one - p_pow_alpha(p, alpha, 1);
    num * den.inv().expect("p^alpha > 1")
}

/// `(1 - 1/p) p^(-alpha r) / (1 - p^(-alpha-1))`: the boundary term of the
/// ball eigenvalues.
pub fn boundary_term(p: Prime, r: i32, alpha: Alpha) -> RealValue {
    let one = rat(BigRational::one());
    let den = one.clone() - p_pow_alpha(p, alpha, -1) * rat(p.pow(-1));
    rat(BigRational::one() - p.pow(-1)) * p_pow_alpha(p, alpha, -(r as i64)) * den.inv().expect("nonzero")
}

/// `-p^(-alpha (gamma-1))`: eigenvalue at scale `gamma` on all of `Q_p`.
pub fn vladimirov_eigenvalue_qp(p: Prime, gamma: i32, alpha: Alpha) -> Eigenvalue {
    -p_pow_alpha(p, alpha, -(gamma as i64 - 1))
}

/// Eigenvalue of `D^alpha(B_r)` on the scale-`gamma` eigenfunctions.
pub fn vladimirov_eigenvalue_br(p: Prime, r: i32, gamma: i32, alpha: Alpha) -> Result<Eigenvalue> {
    if gamma > r {
        return Err(Error::ScaleOutOfWindow { gamma, min: i32::MIN, max: r });
    }
    Ok(vladimirov_eigenvalue_qp(p, gamma, alpha) + boundary_term(p, r, alpha))
}

/// Eigenvalue of `D^alpha(B_r)` on `chi(k x)`; zero for `k = 0`.
pub fn character_eigenvalue(p: Prime, r: i32, k: &BigRational, alpha: Alpha) -> Eigenvalue {
    if k.is_zero() {
        return RealValue::zero();
    }
    let norm = padic_norm(k, p);
    let norm_alpha = match alpha {
        Alpha::Int(a) => rat(num::pow::pow(norm, a as usize)),
        Alpha::Real(a) => RealValue::Float(norm.to_f64().unwrap_or(f64::NAN).powf(a)),
    };
    -norm_alpha + boundary_term(p, r, alpha)
}

/// Fills in the Vladimirov eigenvalue of each phi or wavelet element.
pub fn annotate_eigenvalues<S: Scalar>(basis: &mut BasisSet<S>, alpha: Alpha) -> Result<()> {
    let grid = basis.grid().clone();
    for e in basis.elements_mut() {
        e.eigenvalue = Some(match e.kind {
            BasisKind::Constant => RealValue::zero(),
            BasisKind::Phi | BasisKind::Psi => vladimirov_eigenvalue_br(grid.prime(), grid.r(), e.gamma, alpha)?,
            BasisKind::Character => character_eigenvalue(grid.prime(), grid.r(), &e.offset, alpha),
            BasisKind::F => return Err(Error::Unsupported("eigenvalues of the overcomplete f family".into())),
        });
    }
    Ok(())
}

/// Closed-form spectrum on the grid: `(eigenvalue, multiplicity)`, the zero
/// eigenvalue first, then `gamma` descending.
pub fn closed_form_spectrum(grid: &CosetGrid, alpha: Alpha) -> Vec<(i32, Eigenvalue, u64)> {
    let p = grid.prime();
    let mut out = vec![(grid.r() + 1, RealValue::zero(), 1)];
    for gamma in (grid.l() + 1..=grid.r()).rev() {
        let lambda = vladimirov_eigenvalue_br(p, grid.r(), gamma, alpha).expect("gamma <= r");
        out.push((gamma, lambda, p.get().pow((grid.r() - gamma) as u32) * (p.get() - 1)));
    }
    out
}

/// The closed-form spectrum expanded by multiplicity and sorted ascending.
pub fn closed_form_eigenvalues(grid: &CosetGrid, alpha: Alpha) -> Vec<f64> {
    let mut out: Vec<f64> = closed_form_spectrum(grid, alpha)
        .into_iter()
        .flat_map(|(_, v, m)| std::iter::repeat(v.to_f64()).take(m as usize))
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub enum MatrixEntries {
    Exact(Vec<BigRational>),
    Float(Vec<f64>),
}

/// Dense square operator on a grid, row-major.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    grid: Arc<CosetGrid>,
    entries: MatrixEntries,
    /// Exact entries over a common denominator, for fast exact products.
    scaled: Option<Scaled>,
    /// Rows sum to zero by construction; float products then use the
    /// difference form, so constants map to exactly zero.
    zero_rows: bool,
}

impl PartialEq for OperatorMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.entries == other.entries
    }
}

#[derive(Clone, Debug)]
struct Scaled {
    denominator: BigInt,
    numerators: Vec<BigInt>,
}

impl Scaled {
    fn new(entries: &[BigRational]) -> Self {
        let denominator = entries.iter().fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
        let numerators = entries.iter().map(|q| q.numer() * (&denominator / q.denom())).collect();
        Scaled { denominator, numerators }
    }

    /// `A f` for exact `f`: integer products over common denominators,
    /// normalized once per output entry.
    fn apply(&self, values: &[&QuadScalar]) -> Vec<QuadScalar> {
        let n = values.len();
        let field = values.iter().fold(0, |acc, v| join_prime(acc, v.field_tag()));
        let common = values
            .iter()
            .filter(|v| !v.is_zero())
            .fold(BigInt::one(), |acc, v| acc.lcm(v.a().denom()).lcm(v.b().denom()));
        let lift = |q: &BigRational| q.numer() * (&common / q.denom());
        let support: Vec<(usize, BigInt, BigInt)> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(j, v)| (j, lift(v.a()), lift(v.b())))
            .collect();
        let denom = &self.denominator * &common;
        (0..n)
            .map(|i| {
                let row = &self.numerators[i * n..(i + 1) * n];
                let (mut sa, mut sb) = (BigInt::zero(), BigInt::zero());
                for (j, a, b) in &support {
                    let m = &row[*j];
                    if m.is_zero() {
                        continue;
                    }
                    if !a.is_zero() {
                        sa += m * a;
                    }
                    if !b.is_zero() {
                        sb += m * b;
                    }
                }
                QuadScalar::from_parts(BigRational::new(sa, denom.clone()), BigRational::new(sb, denom.clone()), field)
            })
            .collect()
    }
}

fn scaled_of(entries: &MatrixEntries) -> Option<Scaled> {
    match entries {
        MatrixEntries::Exact(v) => Some(Scaled::new(v)),
        MatrixEntries::Float(_) => None,
    }
}

impl OperatorMatrix {
    pub fn new(grid: Arc<CosetGrid>, entries: MatrixEntries) -> Result<Self> {
        let n = grid.len();
        let len = match &entries {
            MatrixEntries::Exact(v) => v.len(),
            MatrixEntries::Float(v) => v.len(),
        };
        if len != n * n {
            return Err(Error::LengthMismatch { expected: n * n, actual: len });
        }
        let scaled = scaled_of(&entries);
        Ok(OperatorMatrix { grid, entries, scaled, zero_rows: false })
    }

    /// Assembles from off-diagonal values, filling the diagonal so that
    /// every row sums to zero.
    fn compensated(grid: Arc<CosetGrid>, off: impl Fn(usize, usize) -> RealValue, exact: bool) -> Result<Self> {
        let n = grid.len();
        let entries = if exact {
            let mut v = vec![BigRational::zero(); n * n];
            for i in 0..n {
                let mut diag = BigRational::zero();
                for j in (0..n).filter(|&j| j != i) {
                    let e = match off(i, j) {
                        RealValue::Exact(q) => q,
                        RealValue::Float(_) => return Err(Error::Unsupported("float coefficient in the exact backend".into())),
                    };
                    diag -= &e;
                    v[i * n + j] = e;
                }
                v[i * n + i] = diag;
            }
            MatrixEntries::Exact(v)
        } else {
            let mut v = vec![0.0; n * n];
            for i in 0..n {
                let mut diag = 0.0;
                for j in (0..n).filter(|&j| j != i) {
                    let e = off(i, j).to_f64();
                    diag -= e;
                    v[i * n + j] = e;
                }
                v[i * n + i] = diag;
            }
            MatrixEntries::Float(v)
        };
        let scaled = scaled_of(&entries);
        Ok(OperatorMatrix { grid, entries, scaled, zero_rows: true })
    }

    pub fn grid(&self) -> &Arc<CosetGrid> {
        &self.grid
    }

    pub fn entries(&self) -> &MatrixEntries {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.entries, MatrixEntries::Exact(_))
    }

    pub fn backend(&self) -> Backend {
        if self.is_exact() {
            Backend::ExactQuad
        } else {
            Backend::float()
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> RealValue {
        let k = i * self.dim() + j;
        match &self.entries {
            MatrixEntries::Exact(v) => RealValue::Exact(v[k].clone()),
            MatrixEntries::Float(v) => RealValue::Float(v[k]),
        }
    }

    pub fn entry_f64(&self, i: usize, j: usize) -> f64 {
        let k = i * self.dim() + j;
        match &self.entries {
            MatrixEntries::Exact(v) => v[k].to_f64().unwrap_or(f64::NAN),
            MatrixEntries::Float(v) => v[k],
        }
    }

    pub fn to_float(&self) -> OperatorMatrix {
        let n = self.dim();
        let v = (0..n * n).map(|k| self.entry_f64(k / n, k % n)).collect();
        OperatorMatrix { grid: self.grid.clone(), entries: MatrixEntries::Float(v), scaled: None, zero_rows: self.zero_rows }
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.entry_f64(i, j))
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..i).all(|j| self.entry(i, j) == self.entry(j, i)))
    }

    /// Largest `|sum_j A[i][j]|` over rows.
    pub fn max_row_sum(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| match &self.entries {
                MatrixEntries::Exact(v) => v[i * n..(i + 1) * n].iter().sum::<BigRational>().abs().to_f64().unwrap_or(f64::NAN),
                MatrixEntries::Float(v) => v[i * n..(i + 1) * n].iter().sum::<f64>().abs(),
            })
            .fold(0.0, f64::max)
    }

    /// `A f`, skipping zero entries of `f`. Exact matrices act on any
    /// scalar type; float matrices need a backend that accepts floats.
    pub fn apply<S: Scalar>(&self, f: &GridFunction<S>) -> Result<GridFunction<S>> {
        if **f.grid() != *self.grid {
            return Err(Error::GridMismatch("operator and function live on different grids".into()));
        }
        if let Some(scaled) = &self.scaled {
            if let Some(values) = f.values().iter().map(Scalar::as_quad).collect::<Option<Vec<_>>>() {
                let out = scaled.apply(&values).into_iter().map(|v| S::from_quad(&v)).collect();
                return GridFunction::new(self.grid.clone(), out);
            }
        }
        let n = self.dim();
        let support: Vec<usize> = (0..n).filter(|&j| !f.values()[j].is_zero()).collect();
        let values = f.values();
        let out = match &self.entries {
            MatrixEntries::Exact(a) => (0..n)
                .map(|i| {
                    support.iter().fold(S::zero(), |acc, &j| {
                        let e = &a[i * n + j];
                        if e.is_zero() {
                            acc
                        } else {
                            acc + values[j].scale_rational(e)
                        }
                    })
                })
                .collect(),
            MatrixEntries::Float(a) => {
                if S::from_f64(0.0).is_none() {
                    return Err(Error::Unsupported("float operator applied to an exact function".into()));
                }
                let w = |i: usize, j: usize| S::from_f64(a[i * n + j]).expect("checked");
                if self.zero_rows {
                    // (A f)_i = sum over j != i of a_ij (f_j - f_i): no cancellation
                    // against the large compensating diagonal.
                    (0..n)
                        .map(|i| {
                            (0..n).filter(|&j| j != i).fold(S::zero(), |acc, j| {
                                acc + w(i, j) * (values[j].clone() - values[i].clone())
                            })
                        })
                        .collect()
                } else {
                    (0..n).map(|i| support.iter().fold(S::zero(), |acc, &j| acc + w(i, j) * values[j].clone())).collect()
                }
            }
        };
        GridFunction::new(self.grid.clone(), out)
    }
}

fn check_backend(alpha: Alpha, backend: Backend) -> Result<bool> {
    if backend.is_exact() {
        alpha.require_int()?;
        Ok(true)
    } else {
        Ok(false)
    }
}

/// `D^alpha(B_r)` on the grid.
pub fn vladimirov_matrix(grid: &Arc<CosetGrid>, alpha: Alpha, backend: Backend) -> Result<OperatorMatrix> {
    let exact = check_backend(alpha, backend)?;
    let p = grid.prime();
    let pre = -(gamma_p(p, alpha).inv()?) * rat(grid.cell_measure());
    // Weight per distance exponent g in [l+1, r].
    let weights: Vec<RealValue> = (grid.l() + 1..=grid.r())
        .map(|g| pre.clone() * rat(p.pow(-(g as i64))) * p_pow_alpha(p, alpha, -(g as i64)))
        .collect();
    let l = grid.l();
    OperatorMatrix::compensated(
        grid.clone(),
        |i, j| weights[(grid.distance_exponent(i, j).expect("off-diagonal") - l - 1) as usize].clone(),
        exact,
    )
}

/// Coefficients `T^(gamma, n)` for scales in `[gamma_min, gamma_max]`,
/// with a default per scale and overrides keyed by `n in Q_p / Z_p`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    p: Prime,
    gamma_min: i32,
    gamma_max: i32,
    scales: BTreeMap<i32, KernelScale>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelScale {
    pub default: RealValue,
    pub overrides: BTreeMap<BigRational, RealValue>,
}

impl KernelSpec {
    pub fn new(p: Prime, gamma_min: i32, gamma_max: i32) -> Result<Self> {
        if gamma_min > gamma_max {
            return Err(Error::InvalidWindow { r: gamma_max, l: gamma_min });
        }
        Ok(KernelSpec { p, gamma_min, gamma_max, scales: BTreeMap::new() })
    }

    /// `T^(gamma, n) = -(1/Gamma_p(-alpha)) p^(-gamma (alpha+1))` on every scale.
    pub fn vladimirov(p: Prime, alpha: Alpha, gamma_min: i32, gamma_max: i32) -> Result<Self> {
        let mut spec = Self::new(p, gamma_min, gamma_max)?;
        let pre = -(gamma_p(p, alpha).inv()?);
        for g in gamma_min..=gamma_max {
            let v = pre.clone() * rat(p.pow(-(g as i64))) * p_pow_alpha(p, alpha, -(g as i64));
            spec.set_default(g, v)?;
        }
        Ok(spec)
    }

    pub fn prime(&self) -> Prime {
        self.p
    }

    pub fn gamma_min(&self) -> i32 {
        self.gamma_min
    }

    pub fn gamma_max(&self) -> i32 {
        self.gamma_max
    }

    pub fn scales(&self) -> &BTreeMap<i32, KernelScale> {
        &self.scales
    }

    fn check_gamma(&self, gamma: i32) -> Result<()> {
        if gamma < self.gamma_min || gamma > self.gamma_max {
            return Err(Error::ScaleOutOfWindow { gamma, min: self.gamma_min, max: self.gamma_max });
        }
        Ok(())
    }

    pub fn set_default(&mut self, gamma: i32, value: RealValue) -> Result<()> {
        self.check_gamma(gamma)?;
        self.scales
            .entry(gamma)
            .and_modify(|s| s.default = value.clone())
            .or_insert(KernelScale { default: value, overrides: BTreeMap::new() });
        Ok(())
    }

    pub fn set_override(&mut self, gamma: i32, n: BigRational, value: RealValue) -> Result<()> {
        self.check_gamma(gamma)?;
        if frac_part(&n, self.p)? != n {
            return Err(Error::InvalidOffset(format!("{n} is not a canonical element of Q_p/Z_p")));
        }
        self.scales
            .entry(gamma)
            .or_insert(KernelScale { default: RealValue::zero(), overrides: BTreeMap::new() })
            .overrides
            .insert(n, value);
        Ok(())
    }

    /// `T^(gamma, n)`; zero outside the scale window.
    pub fn coefficient(&self, gamma: i32, n: &BigRational) -> RealValue {
        match self.scales.get(&gamma) {
            None => RealValue::zero(),
            Some(s) => s.overrides.get(n).unwrap_or(&s.default).clone(),
        }
    }

    pub fn is_exact(&self) -> bool {
        self.scales
            .values()
            .all(|s| s.default.is_exact() && s.overrides.values().all(RealValue::is_exact))
    }
}

/// Dense matrix of the kernel operator `T` on the grid.
pub fn kernel_matrix(grid: &Arc<CosetGrid>, spec: &KernelSpec, backend: Backend) -> Result<OperatorMatrix> {
    if spec.prime() != grid.prime() {
        return Err(Error::GridMismatch(format!("kernel for p={} on a grid with p={}", spec.prime().get(), grid.prime().get())));
    }
    if spec.gamma_max() > grid.r() {
        return Err(Error::CutoffViolation { gamma_max: spec.gamma_max(), r: grid.r() });
    }
    let exact = backend.is_exact();
    if exact && !spec.is_exact() {
        return Err(Error::Unsupported("float kernel coefficients in the exact backend".into()));
    }
    let (l, r) = (grid.l(), grid.r());
    let cell = rat(grid.cell_measure());
    // coeff[i][g - l - 1] = p^l T^(g, label of x_i at scale g)
    let coeff: Vec<Vec<RealValue>> = (0..grid.len())
        .map(|i| {
            (l + 1..=r)
                .map(|g| cell.clone() * spec.coefficient(g, &grid.ball_label(i, g)))
                .collect()
        })
        .collect();
    OperatorMatrix::compensated(
        grid.clone(),
        |i, j| coeff[i][(grid.distance_exponent(i, j).expect("off-diagonal") - l - 1) as usize].clone(),
        exact,
    )
}

/// `lambda_{gamma,n} = -p^gamma T^(gamma,n) - (1 - 1/p) sum_{g > gamma} p^g T^(g, p^(g-gamma) n)`.
pub fn kernel_eigenvalue(gamma: i32, n: &BigRational, spec: &KernelSpec) -> Result<Eigenvalue> {
    let p = spec.prime();
    let n = frac_part(n, p)?;
    let mut lambda = -(rat(p.pow(gamma as i64)) * spec.coefficient(gamma, &n));
    let tail_weight = rat(BigRational::one() - p.pow(-1));
    for g in gamma + 1..=spec.gamma_max() {
        let label = frac_part(&(&n * p.pow((g - gamma) as i64)), p)?;
        lambda = lambda - tail_weight.clone() * rat(p.pow(g as i64)) * spec.coefficient(g, &label);
    }
    Ok(lambda)
}

/// `exp(t A)` by scaling and squaring with a Taylor polynomial.
pub fn matrix_exponential(a: &OperatorMatrix, t: f64) -> Result<DMatrix<f64>> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let n = a.dim();
    let m = a.to_dmatrix() * t;
    let norm = (0..n).map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let b = m / 2f64.powi(squarings);
    let mut result = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=40 {
        term = &term * &b / k as f64;
        result += &term;
        if term.amax() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}

/// `exp(t A) f`.
pub fn matrix_exponential_apply(a: &OperatorMatrix, t: f64, f: &GridFunction<Complex64>) -> Result<GridFunction<Complex64>> {
    if **f.grid() != **a.grid() {
        return Err(Error::GridMismatch("operator and function live on different grids".into()));
    }
    let e = matrix_exponential(a, t)?;
    apply_dense(&e, f)
}

pub(crate) fn apply_dense(e: &DMatrix<f64>, f: &GridFunction<Complex64>) -> Result<GridFunction<Complex64>> {
    let re = DVector::from_iterator(f.len(), f.values().iter().map(|z| z.re));
    let im = DVector::from_iterator(f.len(), f.values().iter().map(|z| z.im));
    let (re, im) = (e * re, e * im);
    GridFunction::new(f.grid().clone(), re.iter().zip(im.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect())
}

/// Eigenvalues of the (symmetric) matrix, sorted ascending.
pub fn dense_spectrum(a: &OperatorMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(a.to_dmatrix()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::{build_phi, build_wavelet, build_f, enumerate_phi_basis, enumerate_wavelet_basis};
    use crate::fourier::{character_function, FrequencyGrid};
    use crate::scalars::{KSign, QuadScalar};
    use proptest::prelude::*;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    fn pr(p: u64) -> Prime {
        Prime::new(p).unwrap()
    }

    fn grid(p: u64, r: i32, l: i32) -> Arc<CosetGrid> {
        CosetGrid::shared(pr(p), r, l).unwrap()
    }

    fn exact(v: RealValue) -> BigRational {
        v.exact().expect("exact").clone()
    }

    #[test]
    fn alpha_parsing() {
        assert_eq!(Alpha::parse("2").unwrap(), Alpha::Int(2));
        assert_eq!(Alpha::parse("1/2").unwrap(), Alpha::Real(0.5));
        assert_eq!(Alpha::parse("1.5").unwrap(), Alpha::Real(1.5));
        assert!(matches!(Alpha::parse("0"), Err(Error::NonPositiveAlpha(_))));
        assert!(matches!(Alpha::new(-1.0), Err(Error::NonPositiveAlpha(_))));
        assert!(Alpha::parse("x").is_err());
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(exact(gamma_p(pr(2), Alpha::Int(1))), q(-3, 4));
        assert_eq!(exact(gamma_p(pr(3), Alpha::Int(1))), q(-4, 9));
        let g = gamma_p(pr(2), Alpha::Real(0.5)).to_f64();
        let expect = (1.0 - 2f64.powf(-1.5)) / (1.0 - 2f64.sqrt());
        assert!((g - expect).abs() < 1e-14 && (g + 1.56066).abs() < 1e-5);
        for p in [2, 3, 5, 7] {
            for a in 1..4 {
                assert!(gamma_p(pr(p), Alpha::Int(a)).to_f64() < 0.0);
            }
        }
    }

    #[test]
    fn vladimirov_matrix_examples() {
        let g = grid(2, 1, 0);
        let a = vladimirov_matrix(&g, Alpha::Int(1), Backend::ExactQuad).unwrap();
        assert_eq!(a.entries(), &MatrixEntries::Exact(vec![q(-1, 3), q(1, 3), q(1, 3), q(-1, 3)]));
        let one = GridFunction::constant(g.clone(), QuadScalar::one());
        assert!(a.apply(&one).unwrap().values().iter().all(QuadScalar::is_zero));
        let phi = build_phi(1, &q(0, 1), 1, &g, KSign::Plus).unwrap();
        assert_eq!(a.apply(&phi).unwrap(), phi.scale_rational(&q(-2, 3)));
        assert!(matches!(vladimirov_matrix(&g, Alpha::Real(0.5), Backend::ExactQuad), Err(Error::NonIntegerAlpha(_))));
        let f = vladimirov_matrix(&g, Alpha::Real(0.5), Backend::float()).unwrap();
        assert!(f.is_symmetric() && f.max_row_sum() < 1e-15);
        assert!(matches!(f.apply(&phi), Err(Error::Unsupported(_))));
    }

    #[test]
    fn matrix_structure() {
        for (p, r, l) in [(2, 2, -1), (3, 1, -1), (5, 0, -1)] {
            let g = grid(p, r, l);
            let a = vladimirov_matrix(&g, Alpha::Int(2), Backend::ExactQuad).unwrap();
            assert!(a.is_symmetric());
            assert_eq!(a.max_row_sum(), 0.0);
            for i in 0..g.len() {
                for j in 0..g.len() {
                    for k in 0..g.len() {
                        if i != j && g.distance_exponent(i, j) == g.distance_exponent(i, k) {
                            assert_eq!(a.entry(i, j), a.entry(i, k));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn ball_eigenvalue_examples() {
        let l = |r, g| exact(vladimirov_eigenvalue_br(pr(2), r, g, Alpha::Int(1)).unwrap());
        assert_eq!(l(1, 1), q(-2, 3));
        assert_eq!(l(2, 1), q(-5, 6));
        let g = grid(2, 2, 0);
        let a = vladimirov_matrix(&g, Alpha::Int(1), Backend::ExactQuad).unwrap();
        let f = build_f(1, &q(0, 1), 0, &g).unwrap();
        assert_eq!(a.apply(&f).unwrap(), f.scale_rational(&q(-5, 6)));
        assert!(vladimirov_eigenvalue_br(pr(2), 1, 2, Alpha::Int(1)).is_err());
        assert_eq!(exact(vladimirov_eigenvalue_qp(pr(2), 1, Alpha::Int(1))), q(-1, 1));
        // Approach to the Q_p value as r grows.
        let gap = |r| (l(r, 1) - q(-1, 1)).to_f64().unwrap();
        assert!(gap(12) > 0.0 && gap(12) < 1e-3);
    }

    #[test]
    fn phi_basis_is_an_exact_eigenbasis() {
        for (p, r, l) in [(2, 2, -1), (3, 1, -1), (5, 1, 0)] {
            let g = grid(p, r, l);
            for alpha in [1, 2] {
                let a = vladimirov_matrix(&g, Alpha::Int(alpha), Backend::ExactQuad).unwrap();
                let mut basis = enumerate_phi_basis(&g, KSign::Minus);
                annotate_eigenvalues(&mut basis, Alpha::Int(alpha)).unwrap();
                for (e, phi) in basis.iter() {
                    let lambda = exact(e.eigenvalue.clone().unwrap());
                    assert_eq!(a.apply(phi).unwrap(), phi.scale_rational(&lambda), "{e}");
                }
            }
        }
    }

    #[test]
    fn characters_are_eigenfunctions() {
        for (p, r, l) in [(2, 1, -2), (3, 0, -2), (5, 1, -1)] {
            let g = grid(p, r, l);
            for alpha in [Alpha::Int(1), Alpha::Real(0.7)] {
                let a = vladimirov_matrix(&g, alpha, Backend::float()).unwrap();
                let freq = FrequencyGrid::dual_to(&g);
                for k in 0..freq.len() {
                    let chi = character_function(g.clone(), k);
                    let lambda = character_eigenvalue(pr(p), r, freq.frequency(k), alpha).to_f64();
                    let gap = a.apply(&chi).unwrap().sup_distance(&chi.scale(&Complex64::new(lambda, 0.0))).unwrap();
                    assert!(gap < 1e-10, "p={p} k={}", freq.frequency(k));
                }
            }
        }
    }

    #[test]
    fn closed_form_matches_dense_spectrum() {
        for (p, r, l) in [(2, 2, -2), (3, 1, -1), (7, 0, -1)] {
            let g = grid(p, r, l);
            for alpha in [Alpha::Int(1), Alpha::Real(1.5)] {
                let a = vladimirov_matrix(&g, alpha, Backend::float()).unwrap();
                let dense = dense_spectrum(&a);
                let closed = closed_form_eigenvalues(&g, alpha);
                assert_eq!(dense.len(), closed.len());
                for (x, y) in dense.iter().zip(&closed) {
                    assert!((x - y).abs() < 1e-8);
                }
                assert!(closed.iter().filter(|v| **v != 0.0).all(|v| *v < 0.0));
            }
        }
    }

    #[test]
    fn kernel_examples() {
        // Vladimirov-equivalent spec reproduces the Vladimirov matrix.
        let g = grid(2, 2, 0);
        let spec = KernelSpec::vladimirov(pr(2), Alpha::Int(1), 1, 2).unwrap();
        let k = kernel_matrix(&g, &spec, Backend::ExactQuad).unwrap();
        assert_eq!(k, vladimirov_matrix(&g, Alpha::Int(1), Backend::ExactQuad).unwrap());
        // Zero spec.
        let zero = KernelSpec::new(pr(2), 1, 2).unwrap();
        let z = kernel_matrix(&g, &zero, Backend::ExactQuad).unwrap();
        assert_eq!(z.entries(), &MatrixEntries::Exact(vec![q(0, 1); 16]));
        assert!(kernel_eigenvalue(1, &q(0, 1), &zero).unwrap().is_zero());
        // Single scale at gamma = r: constant coupling between distinct children.
        let g = grid(2, 1, -1);
        let mut single = KernelSpec::new(pr(2), 1, 1).unwrap();
        single.set_default(1, RealValue::Exact(q(3, 1))).unwrap();
        let s = kernel_matrix(&g, &single, Backend::ExactQuad).unwrap();
        // Children of B_1 at depth one: {0, 2} and {1, 3} (coset indices).
        let c = |i: usize, j: usize| exact(s.entry(i, j));
        assert_eq!(c(0, 1), q(3, 2));
        assert_eq!(c(0, 3), q(3, 2));
        assert_eq!(c(0, 2), q(0, 1));
        assert_eq!(c(0, 0), q(-3, 1));
        // Eigenvalue of a single-scale spec at gamma=1, n=0: -2c.
        let g = grid(2, 1, 0);
        let psi = build_wavelet(1, &q(0, 1), 1, &g).unwrap();
        let lambda = kernel_eigenvalue(1, &q(0, 1), &single).unwrap();
        assert_eq!(exact(lambda.clone()), q(-6, 1));
        let ks = kernel_matrix(&g, &single, Backend::float()).unwrap();
        let gap = ks.apply(&psi).unwrap().sup_distance(&psi.scale(&Complex64::new(lambda.to_f64(), 0.0))).unwrap();
        assert!(gap < 1e-12);
        // Cutoff violation and prime mismatch.
        let far = KernelSpec::new(pr(2), 1, 3).unwrap();
        assert!(matches!(kernel_matrix(&g, &far, Backend::ExactQuad), Err(Error::CutoffViolation { .. })));
        let other = KernelSpec::new(pr(3), 0, 1).unwrap();
        assert!(matches!(kernel_matrix(&g, &other, Backend::ExactQuad), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn vladimirov_spec_eigenvalue_tends_to_the_qp_value() {
        let p = pr(2);
        for cutoff in 1..12 {
            let spec = KernelSpec::vladimirov(p, Alpha::Int(1), -3, cutoff).unwrap();
            let lambda = exact(kernel_eigenvalue(1, &q(0, 1), &spec).unwrap());
            let expect = exact(vladimirov_eigenvalue_br(p, cutoff, 1, Alpha::Int(1)).unwrap());
            assert_eq!(lambda, expect);
        }
    }

    #[test]
    fn kernel_wavelet_eigen_identity_with_overrides() {
        let g = grid(3, 1, -1);
        let mut spec = KernelSpec::new(pr(3), 0, 1).unwrap();
        spec.set_default(0, RealValue::Exact(q(1, 2))).unwrap();
        spec.set_override(0, q(1, 3), RealValue::Exact(q(5, 1))).unwrap();
        spec.set_override(0, q(2, 3), RealValue::Float(-0.25)).unwrap();
        spec.set_default(1, RealValue::Exact(q(1, 7))).unwrap();
        assert!(spec.set_override(0, q(4, 3), RealValue::zero()).is_err());
        assert!(spec.set_default(2, RealValue::zero()).is_err());
        assert!(matches!(kernel_matrix(&g, &spec, Backend::ExactQuad), Err(Error::Unsupported(_))));
        let k = kernel_matrix(&g, &spec, Backend::float()).unwrap();
        assert!(k.is_symmetric() && k.max_row_sum() < 1e-14);
        let basis = enumerate_wavelet_basis(&g);
        for (e, psi) in basis.iter() {
            let lambda = if e.kind == BasisKind::Constant { 0.0 } else { kernel_eigenvalue(e.gamma, &e.offset, &spec).unwrap().to_f64() };
            let gap = k.apply(psi).unwrap().sup_distance(&psi.scale(&Complex64::new(lambda, 0.0))).unwrap();
            assert!(gap < 1e-10, "{e}");
        }
    }

    #[test]
    fn exponential_examples() {
        let g = grid(2, 1, 0);
        let a = vladimirov_matrix(&g, Alpha::Int(1), Backend::float()).unwrap();
        let f = GridFunction::new(g.clone(), vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]).unwrap();
        assert_eq!(matrix_exponential_apply(&a, 0.0, &f).unwrap(), f);
        let e = (-2.0f64 / 3.0).exp();
        let out = matrix_exponential_apply(&a, 1.0, &f).unwrap();
        assert!((out.values()[0].re - (0.5 + 0.5 * e)).abs() < 1e-14);
        assert!((out.values()[1].re - (0.5 - 0.5 * e)).abs() < 1e-14);
        let c = GridFunction::constant(g.clone(), Complex64::new(2.0, 0.0));
        for t in [0.5, 10.0, 1000.0] {
            assert!(matrix_exponential_apply(&a, t, &c).unwrap().sup_distance(&c).unwrap() < 1e-12);
        }
        assert!(matches!(matrix_exponential_apply(&a, -1.0, &f), Err(Error::NegativeTime(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn exponential_matches_the_spectral_formula(
            (p, r, l) in prop_oneof![Just((2u64, 1i32, -2i32)), Just((3, 0, -2)), Just((5, 1, 0))],
            t in 0.0f64..20.0, seed in any::<u64>(), alpha in 1u32..3,
        ) {
            let g = grid(p, r, l);
            let a = vladimirov_matrix(&g, Alpha::Int(alpha), Backend::float()).unwrap();
            let mut basis = enumerate_phi_basis(&g, KSign::Plus);
            annotate_eigenvalues(&mut basis, Alpha::Int(alpha)).unwrap();
            let i = (seed % basis.len() as u64) as usize;
            let phi = basis.functions()[i].to_complex();
            let lambda = basis.elements()[i].eigenvalue.clone().unwrap().to_f64();
            let out = matrix_exponential_apply(&a, t, &phi).unwrap();
            let expect = phi.scale(&Complex64::new((lambda * t).exp(), 0.0));
            prop_assert!(out.sup_distance(&expect).unwrap() < 1e-12 * phi.sup_norm().max(1.0));
        }
    }
}
