//! Discrete Fourier analysis on `B_r` at resolution `l`.
//!
//! For `f` constant on cosets of `B_l`, the transform
//! `f~(k) = p^(-r/2) int_{B_r} chi(kx) f(x) d_p x` is constant on cosets of
//! `B_{-r}` and vanishes for `|k|_p > p^(-l)`, so it is determined by its
//! values on `p^(r-l)` frequencies `k_m = m p^l`. With `x_m = m p^(-r)` the
//! phase is `chi(k_a x_b) = exp(2 pi i ab / p^(r-l))`.

use std::sync::Arc;

use num::bigint::BigInt;
use num::complex::Complex64;
use num::rational::BigRational;
use num::traits::Zero;
use num::ToPrimitive;

use crate::error::{Error, Result};
use crate::function_space::{ensure_same_grid, GridFunction};
use crate::padic::{root_of_unity, valuation, CosetGrid, Prime};
use crate::scalars::{QuadScalar, Scalar};

/// Frequencies `k_m = m p^l`, `m < p^(r-l)`, representing `B_{-l} / B_{-r}`.
#[derive(Clone, Debug)]
pub struct FrequencyGrid {
    p: Prime,
    r: i32,
    l: i32,
    frequencies: Vec<BigRational>,
    roots: Vec<Complex64>,
}

impl PartialEq for FrequencyGrid {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.r == other.r && self.l == other.l
    }
}

impl FrequencyGrid {
    pub fn new(p: Prime, r: i32, l: i32) -> Result<Self> {
        let grid = CosetGrid::new(p, r, l)?;
        Ok(Self::dual_to(&grid))
    }

    pub fn dual_to(grid: &CosetGrid) -> Self {
        let p = grid.prime();
        let n = grid.len() as u64;
        let scale = p.pow(grid.l() as i64);
        let frequencies =
            (0..n).map(|m| BigRational::from_integer(BigInt::from(m)) * &scale).collect();
        let roots = (0..n).map(|t| root_of_unity(t, n)).collect();
        FrequencyGrid { p, r: grid.r(), l: grid.l(), frequencies, roots }
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

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn frequencies(&self) -> &[BigRational] {
        &self.frequencies
    }

    pub fn frequency(&self, m: usize) -> &BigRational {
        &self.frequencies[m]
    }

    /// The coset grid on `B_r` this frequency set is dual to.
    pub fn coset_grid(&self) -> CosetGrid {
        CosetGrid::new(self.p, self.r, self.l).expect("validated at construction")
    }

    /// Index of `k` modulo `B_{-r}`; rejects `|k|_p > p^(-l)`.
    pub fn index_of(&self, k: &BigRational) -> Result<usize> {
        if let Some(v) = valuation(k, self.p) {
            if v < self.l as i64 {
                return Err(Error::OutsideBall { value: k.to_string(), r: -self.l });
            }
        }
        // k p^(-l) is a p-adic integer; its residue modulo p^(r-l) is the index.
        let scaled = k * self.p.pow(-(self.l as i64));
        CosetGrid::new(self.p, 0, self.l - self.r)?.index_of(&scaled)
    }

    /// `chi(k_a x_b)`.
    #[inline]
    pub fn phase(&self, a: usize, b: usize) -> Complex64 {
        let n = self.roots.len();
        self.roots[(a * b) % n]
    }

    /// `|k_m|_p`, as a float; zero for `m = 0`.
    pub fn norm(&self, m: usize) -> f64 {
        match valuation(&self.frequencies[m], self.p) {
            None => 0.0,
            Some(v) => self.p.powf(-(v as f64)),
        }
    }

    /// Index of `k_a + k_b` (reduced modulo `B_{-r}`).
    pub fn sum_index(&self, a: usize, b: usize) -> usize {
        (a + b) % self.len()
    }

    /// Index of `k_a - k_b`.
    pub fn difference_index(&self, a: usize, b: usize) -> usize {
        let n = self.len();
        (a + n - b) % n
    }
}

/// Complex values over a [`FrequencyGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    frequencies: Arc<FrequencyGrid>,
    values: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(frequencies: Arc<FrequencyGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != frequencies.len() {
            return Err(Error::LengthMismatch { expected: frequencies.len(), actual: values.len() });
        }
        Ok(Spectrum { frequencies, values })
    }

    pub fn frequencies(&self) -> &Arc<FrequencyGrid> {
        &self.frequencies
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn sup_distance(&self, other: &Spectrum) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }
}

fn half_power(p: Prime, r: i32) -> f64 {
    p.powf(-(r as f64) / 2.0)
}

/// `f~(k) = p^(-r/2) p^l sum_m chi(k x_m) f[m]`.
pub fn dft_forward<S: Scalar>(f: &GridFunction<S>) -> Spectrum {
    let grid = f.grid();
    let freq = Arc::new(FrequencyGrid::dual_to(grid));
    let norm = half_power(grid.prime(), grid.r()) * grid.prime().powf(grid.l() as f64);
    let values: Vec<Complex64> = f.values().iter().map(Scalar::to_complex).collect();
    let out = (0..freq.len())
        .map(|k| {
            let mut sum = Complex64::new(0.0, 0.0);
            for (m, v) in values.iter().enumerate() {
                sum += freq.phase(k, m) * v;
            }
            sum * norm
        })
        .collect();
    Spectrum { frequencies: freq, values: out }
}

/// `f(x) = p^(-r/2) sum_k chi(-kx) f~(k)`.
pub fn dft_inverse(spectrum: &Spectrum) -> GridFunction<Complex64> {
    let freq = &spectrum.frequencies;
    let grid = Arc::new(freq.coset_grid());
    let norm = half_power(freq.p, freq.r);
    GridFunction::from_fn(grid, |m, _| {
        let mut sum = Complex64::new(0.0, 0.0);
        for (k, v) in spectrum.values.iter().enumerate() {
            sum += freq.phase(k, m).conj() * v;
        }
        sum * norm
    })
}

/// Convolution through the spectrum: `sum_k chi(-kx) f~(k) g~(k)`.
pub fn convolve_spectral<S: Scalar>(
    f: &GridFunction<S>,
    g: &GridFunction<S>,
) -> Result<GridFunction<Complex64>> {
    ensure_same_grid(f.grid(), g.grid())?;
    let fs = dft_forward(f);
    let gs = dft_forward(g);
    let freq = fs.frequencies.clone();
    Ok(GridFunction::from_fn(f.grid().clone(), |m, _| {
        let mut sum = Complex64::new(0.0, 0.0);
        for k in 0..freq.len() {
            sum += freq.phase(k, m).conj() * fs.values[k] * gs.values[k];
        }
        sum
    }))
}

/// Spectrum of `f g` from the spectra of `f` and `g`:
/// `[fg]~(zeta) = p^(-r/2) sum_k f~(k) g~(zeta - k)`.
pub fn product_spectrum<S: Scalar>(f: &GridFunction<S>, g: &GridFunction<S>) -> Result<Spectrum> {
    ensure_same_grid(f.grid(), g.grid())?;
    let fs = dft_forward(f);
    let gs = dft_forward(g);
    Ok(spectral_product(&fs, &gs))
}

/// `p^(-r/2) sum_k a(k) b(zeta - k)` over the window.
pub fn spectral_product(a: &Spectrum, b: &Spectrum) -> Spectrum {
    let freq = a.frequencies.clone();
    let norm = half_power(freq.p, freq.r);
    let values = (0..freq.len())
        .map(|zeta| {
            let mut sum = Complex64::new(0.0, 0.0);
            for k in 0..freq.len() {
                sum += a.values[k] * b.values[freq.difference_index(zeta, k)];
            }
            sum * norm
        })
        .collect();
    Spectrum { frequencies: freq, values }
}

/// `chi(k_a x)` as a function on the grid (not normalized).
pub fn character_function(grid: Arc<CosetGrid>, a: usize) -> GridFunction<Complex64> {
    let freq = FrequencyGrid::dual_to(&grid);
    GridFunction::from_fn(grid, |m, _| freq.phase(a, m))
}

/// `|sum_k |f~(k)|^2 - int |f|^2|`.
pub fn parseval_gap<S: Scalar>(f: &GridFunction<S>) -> f64 {
    let spectral = dft_forward(f).energy();
    let direct = f.to_complex().norm_squared().re;
    (spectral - direct).abs()
}

/// A formal sum `sum_e c_e zeta^e` with rational `c_e` and `zeta` a primitive
/// `p^s`-th root of unity.
///
/// Vanishing is decided exactly: the sum is zero iff its coefficient
/// polynomial is divisible by the cyclotomic polynomial
/// `Phi_{p^s}(x) = sum_{t<p} x^(t p^(s-1))`, i.e. iff the coefficients are
/// constant along every residue class modulo `p^(s-1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CyclotomicSum {
    p: Prime,
    exponent: u32,
    coefficients: Vec<BigRational>,
}

impl CyclotomicSum {
    pub fn zero(p: Prime, exponent: u32) -> Self {
        let n = p.get().pow(exponent) as usize;
        CyclotomicSum { p, exponent, coefficients: vec![BigRational::zero(); n] }
    }

    pub fn add_term(&mut self, power: usize, c: &BigRational) {
        let n = self.coefficients.len();
        self.coefficients[power % n] += c;
    }

    pub fn sub(&self, other: &Self) -> Self {
        let coefficients =
            self.coefficients.iter().zip(&other.coefficients).map(|(a, b)| a - b).collect();
        CyclotomicSum { p: self.p, exponent: self.exponent, coefficients }
    }

    pub fn is_zero(&self) -> bool {
        if self.exponent == 0 {
            return self.coefficients[0].is_zero();
        }
        let stride = self.p.get().pow(self.exponent - 1) as usize;
        (0..stride).all(|e0| {
            let first = &self.coefficients[e0];
            (1..self.p.get() as usize).all(|t| &self.coefficients[e0 + t * stride] == first)
        })
    }

    pub fn to_complex(&self) -> Complex64 {
        let n = self.coefficients.len() as u64;
        self.coefficients
            .iter()
            .enumerate()
            .map(|(e, c)| root_of_unity(e as u64, n) * c.to_f64().unwrap_or(f64::NAN))
            .sum()
    }
}

fn rational_values(f: &GridFunction<QuadScalar>) -> Result<Vec<BigRational>> {
    f.values()
        .iter()
        .map(|v| {
            if v.is_rational() {
                Ok(v.a().clone())
            } else {
                Err(Error::Unsupported("exact transform needs rational values".into()))
            }
        })
        .collect()
}

/// `sum_m f[m] chi(k_a x_m)` as an exact cyclotomic sum (the transform up to
/// its positive normalization `p^(l - r/2)`).
pub fn exact_transform(f: &GridFunction<QuadScalar>, a: usize) -> Result<CyclotomicSum> {
    let values = rational_values(f)?;
    Ok(exact_transform_of(&values, f.grid(), a))
}

fn exact_transform_of(values: &[BigRational], grid: &CosetGrid, a: usize) -> CyclotomicSum {
    let mut sum = CyclotomicSum::zero(grid.prime(), grid.depth());
    for (m, c) in values.iter().enumerate() {
        if !c.is_zero() {
            sum.add_term(a * m, c);
        }
    }
    sum
}

/// Outcome of the support/constancy duality check on a refined window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualityReport {
    /// Frequencies with `|k|_p > p^(-l)` where the transform vanished exactly.
    pub vanishing_checked: usize,
    /// Frequencies with `|k|_p > p^(-l)` where it did not.
    pub support_violations: usize,
    /// Pairs `k, k + k'` with `|k'|_p <= p^(-r)` compared exactly.
    pub constancy_checked: usize,
    pub constancy_violations: usize,
}

impl DualityReport {
    pub fn holds(&self) -> bool {
        self.support_violations == 0 && self.constancy_violations == 0
    }
}

/// Whether `|k_a|_p > p^(-l)` on the frequency grid dual to `grid`.
fn beyond_support(grid: &CosetGrid, a: usize, l: i32) -> bool {
    // |k_a|_p = p^(-(l_grid + v(a)))
    a != 0 && grid.l() + (crate::padic::u64_valuation(a as u64, grid.prime()) as i32) < l
}

/// Checks that the transform of `f` in `D_r^l` lies in `D_{-l}^{-r}` by
/// computing it exactly on the finer window `refined`.
pub fn support_duality(
    f: &GridFunction<QuadScalar>,
    refined: Arc<CosetGrid>,
) -> Result<DualityReport> {
    let (r, l) = (f.grid().r(), f.grid().l());
    let fine = f.embed(refined.clone())?;
    let values = rational_values(&fine)?;
    let p = refined.prime();
    let n = refined.len();
    let lf = refined.l();
    let transforms: Vec<CyclotomicSum> =
        (0..n).map(|a| exact_transform_of(&values, &refined, a)).collect();
    let mut report = DualityReport {
        vanishing_checked: 0,
        support_violations: 0,
        constancy_checked: 0,
        constancy_violations: 0,
    };
    for (a, t) in transforms.iter().enumerate() {
        if beyond_support(&refined, a, l) {
            report.vanishing_checked += 1;
            if !t.is_zero() {
                report.support_violations += 1;
            }
        }
    }
    // Shifts k' = t p^(r - lf) p^lf have |k'|_p <= p^(-r).
    let stride = p.get().pow((r - lf) as u32) as usize;
    for a in 0..n {
        for shift in (stride..n).step_by(stride) {
            let b = (a + shift) % n;
            report.constancy_checked += 1;
            if !transforms[a].sub(&transforms[b]).is_zero() {
                report.constancy_violations += 1;
            }
        }
    }
    Ok(report)
}

/// Float support check: largest `|f~(k)|` over `|k|_p > p^(-l)` on `refined`.
pub fn leakage_outside_support<S: Scalar>(f: &GridFunction<S>, refined: Arc<CosetGrid>) -> Result<f64> {
    let l = f.grid().l();
    let fine = f.embed(refined.clone())?;
    let spec = dft_forward(&fine);
    Ok(spec
        .values
        .iter()
        .enumerate()
        .filter(|(a, _)| beyond_support(&refined, *a, l))
        .map(|(_, v)| v.norm())
        .fold(0.0, f64::max))
}
