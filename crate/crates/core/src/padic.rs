//! Exact p-adic arithmetic on rationals.
//!
//! Every rational `x != 0` factors uniquely as `p^v * a/b` with `a`, `b`
//! coprime to `p`; the norm is `|x|_p = p^(-v)`. Balls `B_r = {|x|_p <= p^r}`
//! and their quotients `B_r / B_l` are finite groups with `p^(r-l)` cosets,
//! which is the only part of `Q_p` this crate ever needs to enumerate.

use std::fmt;
use std::sync::Arc;

use num::bigint::BigInt;
use num::complex::Complex64;
use num::rational::BigRational;
use num::traits::{One, Pow, Signed, ToPrimitive, Zero};
use num::Integer;

use crate::error::{Error, Result};

/// Largest grid the crate will enumerate (`p^(r-l)` cells).
pub const MAX_GRID_LEN: u64 = 1 << 20;

/// A validated prime.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Prime(u64);

impl Prime {
    pub fn new(p: u64) -> Result<Self> {
        if p < 2 {
            return Err(Error::NotPrime(p));
        }
        let mut d = 2u64;
        while d * d <= p {
            if p % d == 0 {
                return Err(Error::NotPrime(p));
            }
            d += 1;
        }
        Ok(Prime(p))
    }

    #[inline]
    pub fn get(self) -> u64 {
        self.0
    }

    pub fn to_bigint(self) -> BigInt {
        BigInt::from(self.0)
    }

    /// `p^e` as an exact rational, for any integer `e`.
    pub fn pow(self, e: i64) -> BigRational {
        let base = BigInt::from(self.0).pow(e.unsigned_abs());
        if e >= 0 {
            BigRational::from_integer(base)
        } else {
            BigRational::new(BigInt::one(), base)
        }
    }

    /// `p^e` as a float.
    pub fn powf(self, e: f64) -> f64 {
        (self.0 as f64).powf(e)
    }

    /// `p^e` for `e >= 0` as a machine integer, if it fits.
    pub fn checked_pow_u64(self, e: u32) -> Option<u64> {
        self.0.checked_pow(e)
    }
}

impl fmt::Display for Prime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Multiplicity of `p` in a nonzero integer.
pub fn int_valuation(n: &BigInt, p: Prime) -> u64 {
    debug_assert!(!n.is_zero());
    let pb = p.to_bigint();
    let mut n = n.abs();
    let mut v = 0;
    loop {
        let (q, r) = n.div_rem(&pb);
        if !r.is_zero() {
            return v;
        }
        n = q;
        v += 1;
    }
}

/// Multiplicity of `p` in a nonzero machine integer.
pub fn u64_valuation(mut n: u64, p: Prime) -> u32 {
    debug_assert!(n != 0);
    let mut v = 0;
    while n % p.0 == 0 {
        n /= p.0;
        v += 1;
    }
    v
}

/// The p-adic valuation of `x`, or `None` for zero (valuation `+inf`).
pub fn valuation(x: &BigRational, p: Prime) -> Option<i64> {
    if x.is_zero() {
        return None;
    }
    let vn = int_valuation(x.numer(), p) as i64;
    let vd = int_valuation(x.denom(), p) as i64;
    Some(vn - vd)
}

/// `|x|_p`, exactly. Zero maps to zero.
pub fn padic_norm(x: &BigRational, p: Prime) -> BigRational {
    match valuation(x, p) {
        None => BigRational::zero(),
        Some(v) => p.pow(-v),
    }
}

/// A rational together with its cached valuation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PAdicRational {
    value: BigRational,
    valuation: Option<i64>,
    p: Prime,
}

impl PAdicRational {
    pub fn new(value: BigRational, p: Prime) -> Self {
        let valuation = valuation(&value, p);
        PAdicRational { value, valuation, p }
    }

    pub fn from_integer(n: i64, p: Prime) -> Self {
        Self::new(BigRational::from_integer(n.into()), p)
    }

    pub fn value(&self) -> &BigRational {
        &self.value
    }

    pub fn prime(&self) -> Prime {
        self.p
    }

    /// `None` for zero.
    pub fn valuation(&self) -> Option<i64> {
        self.valuation
    }

    pub fn norm(&self) -> BigRational {
        match self.valuation {
            None => BigRational::zero(),
            Some(v) => self.p.pow(-v),
        }
    }

    /// Whether `|x|_p <= p^r`.
    pub fn in_ball(&self, r: i32) -> bool {
        match self.valuation {
            None => true,
            Some(v) => v >= -(r as i64),
        }
    }
}

/// The `s` in `x = m / p^s * u` when the denominator of `x` is a pure power of `p`.
fn pure_power_exponent(x: &BigRational, p: Prime) -> Result<u64> {
    let d = x.denom();
    let s = int_valuation(d, p);
    let rest = d / p.to_bigint().pow(s);
    if !rest.is_one() {
        return Err(Error::NonPrimePowerDenominator(x.to_string()));
    }
    Ok(s)
}

/// The p-adic fractional part `{x}_p`, a rational `m / p^s` in `[0, 1)` with
/// `|x - {x}_p|_p <= 1`.
///
/// Only rationals whose denominator is a power of `p` are accepted.
pub fn frac_part(x: &BigRational, p: Prime) -> Result<BigRational> {
    pure_power_exponent(x, p)?;
    let d = x.denom();
    let m = x.numer().mod_floor(d);
    Ok(BigRational::new(m, d.clone()))
}

/// `exp(2 pi i t)` for a fraction of a full turn, exact at quarter turns.
pub fn turn(t: f64) -> Complex64 {
    let t = t - t.floor();
    if t == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    if t == 0.25 {
        return Complex64::new(0.0, 1.0);
    }
    if t == 0.5 {
        return Complex64::new(-1.0, 0.0);
    }
    if t == 0.75 {
        return Complex64::new(0.0, -1.0);
    }
    // Rotate into (-1/2, 1/2] to keep the angle small.
    let t = if t > 0.5 { t - 1.0 } else { t };
    let (s, c) = (2.0 * std::f64::consts::PI * t).sin_cos();
    Complex64::new(c, s)
}

/// `exp(2 pi i num / den)` evaluated from the reduced integer fraction.
pub fn root_of_unity(num: u64, den: u64) -> Complex64 {
    let num = num % den;
    let g = num.gcd(&den);
    let (num, den) = (num / g, den / g);
    turn(num as f64 / den as f64)
}

/// The normalized additive character `chi(x) = exp(2 pi i {x}_p)`.
pub fn character(x: &BigRational, p: Prime) -> Result<Complex64> {
    let fr = frac_part(x, p)?;
    if fr.is_zero() {
        return Ok(Complex64::new(1.0, 0.0));
    }
    match (fr.numer().to_u64(), fr.denom().to_u64()) {
        (Some(n), Some(d)) => Ok(root_of_unity(n, d)),
        _ => Ok(turn(fr.to_f64().unwrap_or(0.0))),
    }
}

/// `Omega(|x - center|_p p^(-gamma))`: 1 iff `|x - center|_p <= p^gamma`.
pub fn ball_indicator(x: &BigRational, center: &BigRational, gamma: i32, p: Prime) -> bool {
    match valuation(&(x - center), p) {
        None => true,
        Some(v) => v >= -(gamma as i64),
    }
}

/// `delta(|x - center|_p - p^gamma)`: 1 iff `|x - center|_p = p^gamma`.
pub fn sphere_indicator(x: &BigRational, center: &BigRational, gamma: i32, p: Prime) -> bool {
    valuation(&(x - center), p) == Some(-(gamma as i64))
}

/// The cosets of `B_l` in `B_r` in canonical order.
///
/// Representative `m` is `sum_i a_i p^(-r+i)` where `a_i` are the base-p
/// digits of `m`, least significant first; equivalently `m * p^(-r)`. The
/// map `m -> m p^(-r)` identifies `B_r / B_l` with `Z / p^(r-l) Z`, so
/// coset arithmetic reduces to integer arithmetic modulo `len()`.
#[derive(Clone, Debug)]
pub struct CosetGrid {
    p: Prime,
    r: i32,
    l: i32,
    len: u64,
    representatives: Vec<BigRational>,
}

impl PartialEq for CosetGrid {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.r == other.r && self.l == other.l
    }
}

impl Eq for CosetGrid {}

pub fn enumerate_cosets(p: Prime, r: i32, l: i32) -> Result<CosetGrid> {
    CosetGrid::new(p, r, l)
}

impl CosetGrid {
    pub fn new(p: Prime, r: i32, l: i32) -> Result<Self> {
        if l >= r {
            return Err(Error::InvalidWindow { r, l });
        }
        let depth = (r - l) as u32;
        let len = p
            .checked_pow_u64(depth)
            .filter(|&n| n <= MAX_GRID_LEN)
            .ok_or_else(|| Error::Unsupported(format!("grid {p}^{depth} is too large")))?;
        let scale = p.pow(-(r as i64));
        let representatives = (0..len)
            .map(|m| BigRational::from_integer(BigInt::from(m)) * &scale)
            .collect();
        Ok(CosetGrid { p, r, l, len, representatives })
    }

    pub fn shared(p: Prime, r: i32, l: i32) -> Result<Arc<Self>> {
        Self::new(p, r, l).map(Arc::new)
    }

    pub fn prime(&self) -> Prime {
        self.p
    }

    pub fn r(&self) -> i32 {
        self.r
    }

    pub fn l(&self) -> i32 {
        self.l
    }

    /// `r - l`.
    pub fn depth(&self) -> u32 {
        (self.r - self.l) as u32
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn representatives(&self) -> &[BigRational] {
        &self.representatives
    }

    pub fn representative(&self, m: usize) -> &BigRational {
        &self.representatives[m]
    }

    /// Haar measure `p^l` of one coset.
    pub fn cell_measure(&self) -> BigRational {
        self.p.pow(self.l as i64)
    }

    /// Index of the coset containing `x`.
    pub fn coset_index(&self, x: &PAdicRational) -> Result<usize> {
        if !x.in_ball(self.r) {
            return Err(Error::OutsideBall { value: x.value().to_string(), r: self.r });
        }
        if x.value().is_zero() {
            return Ok(0);
        }
        // x p^r lies in Z_p; its residue modulo p^(r-l) is the index.
        let y = x.value() * self.p.pow(self.r as i64);
        let modulus = BigInt::from(self.len);
        let num = y.numer().mod_floor(&modulus);
        let den = y.denom().mod_floor(&modulus);
        let inv = den.extended_gcd(&modulus).x.mod_floor(&modulus);
        let m = (num * inv).mod_floor(&modulus);
        Ok(m.to_usize().expect("index below grid length"))
    }

    pub fn index_of(&self, x: &BigRational) -> Result<usize> {
        self.coset_index(&PAdicRational::new(x.clone(), self.p))
    }

    /// Index of the coset of `x_i - x_j`.
    #[inline]
    pub fn difference_index(&self, i: usize, j: usize) -> usize {
        let n = self.len as usize;
        (i + n - j) % n
    }

    /// Index of the coset of `x_i + x_j`.
    #[inline]
    pub fn sum_index(&self, i: usize, j: usize) -> usize {
        (i + j) % self.len as usize
    }

    /// The `gamma` with `|x_i - x_j|_p = p^gamma`, or `None` when `i == j`.
    ///
    /// Distinct representatives differ by at least `p^(l+1)`.
    pub fn distance_exponent(&self, i: usize, j: usize) -> Option<i32> {
        let d = self.difference_index(i, j) as u64;
        if d == 0 {
            None
        } else {
            Some(self.r - u64_valuation(d, self.p) as i32)
        }
    }

    /// Whether the coset of `x_i` lies inside `B_gamma(x_c)` for `gamma >= l`.
    #[inline]
    pub fn same_ball(&self, i: usize, c: usize, gamma: i32) -> bool {
        match self.distance_exponent(i, c) {
            None => true,
            Some(g) => g <= gamma,
        }
    }

    /// The canonical offset `n in [0, 1)` of the ball of radius `p^gamma`
    /// containing `x_i`, in the `B_gamma(n p^(-gamma))` labelling.
    pub fn ball_label(&self, i: usize, gamma: i32) -> BigRational {
        let x = &self.representatives[i];
        let scaled = x * self.p.pow(gamma as i64);
        frac_part(&scaled, self.p).expect("grid representatives have p-power denominators")
    }

    /// Whether `self` refines `coarse`: same prime, larger ball, finer cells.
    pub fn refines(&self, coarse: &CosetGrid) -> bool {
        self.p == coarse.p && self.r >= coarse.r && self.l <= coarse.l
    }

    /// Representatives of `B_r / B_gamma`, i.e. the admissible ball centres at scale `gamma`.
    pub fn centres(&self, gamma: i32) -> Result<Vec<BigRational>> {
        if gamma > self.r || gamma < self.l {
            return Err(Error::ScaleOutOfWindow { gamma, min: self.l, max: self.r });
        }
        if gamma == self.r {
            return Ok(vec![BigRational::zero()]);
        }
        Ok(CosetGrid::new(self.p, self.r, gamma)?.representatives)
    }
}

/// Base-p digits of `m`, least significant first, padded to `count`.
pub fn base_p_digits(mut m: u64, p: Prime, count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(m % p.get());
        m /= p.get();
    }
    out
}

/// Parses `"a/b"` or `"a"` into a rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Format(format!("not a rational: {s:?}"));
    match s.split_once('/') {
        Some((a, b)) => {
            let a: BigInt = a.trim().parse().map_err(|_| bad())?;
            let b: BigInt = b.trim().parse().map_err(|_| bad())?;
            if b.is_zero() {
                return Err(Error::DivisionByZero);
            }
            Ok(BigRational::new(a, b))
        }
        None => Ok(BigRational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}
