//! Scalar backends.
//!
//! [`QuadScalar`] is exact arithmetic in `Q(sqrt p)`, enough for the real
//! eigenbasis whose amplitudes involve `k = -1 +- sqrt p` and half-integer
//! powers of `p`. Characters and wavelets need roots of unity and live in
//! [`Complex64`]. Both implement [`Scalar`].

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num::complex::Complex64;
use num::rational::BigRational;
use num::traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::padic::Prime;

/// Default comparison tolerance of the complex-float backend.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Backend {
    ExactQuad,
    ComplexFloat { tolerance: f64 },
}

impl Backend {
    pub fn float() -> Self {
        Backend::ComplexFloat { tolerance: DEFAULT_TOLERANCE }
    }

    pub fn tolerance(&self) -> f64 {
        match self {
            Backend::ExactQuad => 0.0,
            Backend::ComplexFloat { tolerance } => *tolerance,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Backend::ExactQuad)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Backend::ExactQuad => "exact",
            Backend::ComplexFloat { .. } => "float",
        }
    }

    /// `|a - b| <= tol * max(1, |a|)`.
    pub fn close(&self, a: Complex64, b: Complex64) -> bool {
        (a - b).norm() <= self.tolerance() * a.norm().max(1.0)
    }
}

/// Sign of the square root in `k = -1 +- sqrt p`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum KSign {
    #[default]
    Plus,
    Minus,
}

impl KSign {
    pub fn both() -> [KSign; 2] {
        [KSign::Plus, KSign::Minus]
    }
}

impl fmt::Display for KSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KSign::Plus => "+",
            KSign::Minus => "-",
        })
    }
}

/// `a + b sqrt(p)` with rational `a`, `b`.
///
/// `p == 0` marks a plain rational (`b == 0`) that combines with any prime.
#[derive(Clone, Debug)]
pub struct QuadScalar {
    a: BigRational,
    b: BigRational,
    p: u64,
}

impl PartialEq for QuadScalar {
    fn eq(&self, other: &Self) -> bool {
        // sqrt p is irrational, so equality is componentwise.
        self.a == other.a && self.b == other.b
    }
}

impl Eq for QuadScalar {}

pub(crate) fn join_prime(x: u64, y: u64) -> u64 {
    match (x, y) {
        (0, q) | (q, 0) => q,
        (q, s) => {
            assert_eq!(q, s, "QuadScalar operands from different fields Q(sqrt {q}) and Q(sqrt {s})");
            q
        }
    }
}

impl QuadScalar {
    pub fn new(a: BigRational, b: BigRational, p: Prime) -> Self {
        QuadScalar { a, b, p: p.get() }
    }

    /// Components with a raw field tag (`0` for a plain rational).
    pub(crate) fn from_parts(a: BigRational, b: BigRational, p: u64) -> Self {
        QuadScalar { a, b, p }
    }

    pub(crate) fn field_tag(&self) -> u64 {
        self.p
    }

    pub fn rational(a: BigRational) -> Self {
        QuadScalar { a, b: BigRational::zero(), p: 0 }
    }

    pub fn from_integer(n: i64) -> Self {
        Self::rational(BigRational::from_integer(n.into()))
    }

    /// `sqrt(p)`.
    pub fn sqrt_p(p: Prime) -> Self {
        QuadScalar { a: BigRational::zero(), b: BigRational::one(), p: p.get() }
    }

    /// `p^(e/2)` for any integer `e`.
    pub fn sqrt_p_power(p: Prime, e: i64) -> Self {
        if e.rem_euclid(2) == 0 {
            Self::rational(p.pow(e / 2))
        } else {
            QuadScalar { a: BigRational::zero(), b: p.pow((e - 1).div_euclid(2)), p: p.get() }
        }
    }

    pub fn a(&self) -> &BigRational {
        &self.a
    }

    pub fn b(&self) -> &BigRational {
        &self.b
    }

    /// The ambient prime, or `None` for a plain rational.
    pub fn prime(&self) -> Option<u64> {
        if self.p == 0 { None } else { Some(self.p) }
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    /// `a - b sqrt p`.
    pub fn galois_conjugate(&self) -> Self {
        QuadScalar { a: self.a.clone(), b: -&self.b, p: self.p }
    }

    /// `a^2 - p b^2`, the field norm.
    pub fn field_norm(&self) -> BigRational {
        let p = BigRational::from_integer(self.p.into());
        &self.a * &self.a - p * &self.b * &self.b
    }

    pub fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let n = self.field_norm();
        Ok(QuadScalar { a: &self.a / &n, b: -&self.b / &n, p: self.p })
    }

    pub fn checked_div(&self, rhs: &Self) -> Result<Self> {
        Ok(self * &rhs.inv()?)
    }

    pub fn scale(&self, q: &BigRational) -> Self {
        if q.is_zero() {
            return Self::rational(BigRational::zero());
        }
        QuadScalar { a: &self.a * q, b: &self.b * q, p: self.p }
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    /// Embedding into the reals with the positive square root.
    pub fn to_f64(&self) -> f64 {
        let a = self.a.to_f64().unwrap_or(f64::NAN);
        if self.b.is_zero() {
            return a;
        }
        a + self.b.to_f64().unwrap_or(f64::NAN) * (self.p as f64).sqrt()
    }
}

impl fmt::Display for QuadScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            return write!(f, "{}", self.a);
        }
        let sign = if self.b.is_negative() { '-' } else { '+' };
        write!(f, "{} {} {}*sqrt({})", self.a, sign, self.b.abs(), self.p)
    }
}

impl<'a> Add<&'a QuadScalar> for &'a QuadScalar {
    type Output = QuadScalar;
    fn add(self, rhs: &QuadScalar) -> QuadScalar {
        QuadScalar { a: &self.a + &rhs.a, b: &self.b + &rhs.b, p: join_prime(self.p, rhs.p) }
    }
}

impl<'a> Sub<&'a QuadScalar> for &'a QuadScalar {
    type Output = QuadScalar;
    fn sub(self, rhs: &QuadScalar) -> QuadScalar {
        QuadScalar { a: &self.a - &rhs.a, b: &self.b - &rhs.b, p: join_prime(self.p, rhs.p) }
    }
}

impl<'a> Mul<&'a QuadScalar> for &'a QuadScalar {
    type Output = QuadScalar;
    fn mul(self, rhs: &QuadScalar) -> QuadScalar {
        let p = join_prime(self.p, rhs.p);
        if self.b.is_zero() {
            return rhs.scale(&self.a);
        }
        if rhs.b.is_zero() {
            return self.scale(&rhs.a);
        }
        let pq = BigRational::from_integer(p.into());
        QuadScalar {
            a: &self.a * &rhs.a + pq * &self.b * &rhs.b,
            b: &self.a * &rhs.b + &self.b * &rhs.a,
            p,
        }
    }
}

impl Neg for &QuadScalar {
    type Output = QuadScalar;
    fn neg(self) -> QuadScalar {
        QuadScalar { a: -&self.a, b: -&self.b, p: self.p }
    }
}

macro_rules! forward_owned {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr for QuadScalar {
            type Output = QuadScalar;
            fn $m(self, rhs: QuadScalar) -> QuadScalar {
                (&self).$m(&rhs)
            }
        }
    )*};
}

forward_owned!(Add add, Sub sub, Mul mul);

impl Neg for QuadScalar {
    type Output = QuadScalar;
    fn neg(self) -> QuadScalar {
        -&self
    }
}

/// The four field operations, for callers that pick one at runtime.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadOp {
    Add,
    Sub,
    Mul,
    Div,
}

pub fn quad_arith(lhs: &QuadScalar, rhs: &QuadScalar, op: QuadOp) -> Result<QuadScalar> {
    Ok(match op {
        QuadOp::Add => lhs + rhs,
        QuadOp::Sub => lhs - rhs,
        QuadOp::Mul => lhs * rhs,
        QuadOp::Div => lhs.checked_div(rhs)?,
    })
}

/// `k = -1 +- sqrt p`, a root of `p - 1 - 2k - k^2 = 0`.
pub fn root_of_orthogonality(p: Prime, sign: KSign) -> QuadScalar {
    let s = match sign {
        KSign::Plus => BigRational::one(),
        KSign::Minus => -BigRational::one(),
    };
    let k = QuadScalar::new(-BigRational::one(), s, p);
    debug_assert!(orthogonality_residual(p, &k).is_zero());
    k
}

/// `p - 1 - 2k - k^2`.
pub fn orthogonality_residual(p: Prime, k: &QuadScalar) -> QuadScalar {
    let pm1 = QuadScalar::from_integer(p.get() as i64 - 1);
    let two_k = k.scale(&BigRational::from_integer(2.into()));
    &(&pm1 - &two_k) - &(k * k)
}

/// Arithmetic shared by the exact and floating backends.
pub trait Scalar:
    Clone
    + PartialEq
    + fmt::Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_rational(q: &BigRational) -> Self;
    fn from_quad(q: &QuadScalar) -> Self;
    /// `None` when the backend cannot represent arbitrary reals.
    fn from_f64(x: f64) -> Option<Self>;
    fn scale_rational(&self, q: &BigRational) -> Self;
    fn conj(&self) -> Self;
    fn is_zero(&self) -> bool;
    fn to_complex(&self) -> Complex64;
    fn backend() -> Backend;
    /// The exact value, when this backend stores one.
    fn as_quad(&self) -> Option<&QuadScalar> {
        None
    }
}

impl Scalar for QuadScalar {
    fn zero() -> Self {
        QuadScalar::from_integer(0)
    }
    fn one() -> Self {
        QuadScalar::from_integer(1)
    }
    fn from_rational(q: &BigRational) -> Self {
        QuadScalar::rational(q.clone())
    }
    fn from_quad(q: &QuadScalar) -> Self {
        q.clone()
    }
    fn from_f64(_: f64) -> Option<Self> {
        None
    }
    fn scale_rational(&self, q: &BigRational) -> Self {
        self.scale(q)
    }
    fn conj(&self) -> Self {
        // Real field: complex conjugation is the identity.
        self.clone()
    }
    fn is_zero(&self) -> bool {
        QuadScalar::is_zero(self)
    }
    fn to_complex(&self) -> Complex64 {
        Complex64::new(self.to_f64(), 0.0)
    }
    fn backend() -> Backend {
        Backend::ExactQuad
    }
    fn as_quad(&self) -> Option<&QuadScalar> {
        Some(self)
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_rational(q: &BigRational) -> Self {
        Complex64::new(q.to_f64().unwrap_or(f64::NAN), 0.0)
    }
    fn from_quad(q: &QuadScalar) -> Self {
        q.to_complex()
    }
    fn from_f64(x: f64) -> Option<Self> {
        Some(Complex64::new(x, 0.0))
    }
    fn scale_rational(&self, q: &BigRational) -> Self {
        self * q.to_f64().unwrap_or(f64::NAN)
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn to_complex(&self) -> Complex64 {
        *self
    }
    fn backend() -> Backend {
        Backend::float()
    }
}
