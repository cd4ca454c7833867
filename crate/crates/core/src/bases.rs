//! Real eigenfamilies, the orthonormal real basis and p-adic wavelets.
//!
//! On a window `(r, l)` the admissible scales are `gamma in [l+1, r]`. For
//! each scale and each ball `B_gamma(c)` inside `B_r`:
//!
//! * `f_{gamma,c,a}(x) = Omega(|x - c - a p^-gamma|_p p^(1-gamma)) - p^-1 Omega(|x - c|_p p^-gamma)`
//!   for `a = 0..p-1` (overcomplete, `sum_a f_a = 0`);
//! * `phi_{gamma,c,b} = p^(-(gamma-1)/2) / k * (f_{gamma,c,0} + k f_{gamma,c,b})`,
//!   `b = 1..p-1`, `k = -1 +- sqrt p`, orthonormal together with the
//!   constant `p^(-r/2)`;
//! * `psi_{gamma,n,j}(x) = p^(-gamma/2) chi(p^(gamma-1) j (x - p^-gamma n)) Omega(|p^gamma x - n|_p)`,
//!   `j = 1..p-1`, with `n = p^gamma c` in `Q_p / Z_p`.
//!
//! The f and phi families carry the ball centre `c` as their offset; wavelets
//! carry the label `n`. [`wavelet_label`] converts between the two.
//!
//! With `chi(x) = exp(2 pi i {x}_p)`, translating a wavelet by `a p^-gamma`
//! multiplies it by `chi(-j a / p)`, so the f/phi to wavelet relations below
//! use `chi(-j a / p)` in the forward direction and `chi(j a / p)` in the
//! inverse one.

use std::fmt;
use std::sync::Arc;

use num::bigint::BigInt;
use num::complex::Complex64;
use num::rational::BigRational;
use num::traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::fourier::FrequencyGrid;
use crate::function_space::GridFunction;
use crate::operators::Eigenvalue;
use crate::padic::{ball_indicator, character, frac_part, root_of_unity, CosetGrid, PAdicRational, Prime};
use crate::scalars::{root_of_orthogonality, KSign, QuadScalar, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BasisKind {
    F,
    Phi,
    Psi,
    Character,
    Constant,
}

impl BasisKind {
    pub fn name(&self) -> &'static str {
        match self {
            BasisKind::F => "f",
            BasisKind::Phi => "phi",
            BasisKind::Psi => "psi",
            BasisKind::Character => "character",
            BasisKind::Constant => "constant",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "f" => BasisKind::F,
            "phi" => BasisKind::Phi,
            "psi" => BasisKind::Psi,
            "character" => BasisKind::Character,
            "constant" => BasisKind::Constant,
            _ => return None,
        })
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Descriptor of one basis function.
///
/// `offset` is the ball centre `c` for f/phi, the label `n in Q_p/Z_p` for
/// psi, the frequency `k` for characters and zero for the constant. `label`
/// is `a`, `b`, `j` or the frequency index.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisElement {
    pub kind: BasisKind,
    pub gamma: i32,
    pub offset: BigRational,
    pub label: u64,
    pub eigenvalue: Option<Eigenvalue>,
}

impl BasisElement {
    pub fn new(kind: BasisKind, gamma: i32, offset: BigRational, label: u64) -> Self {
        BasisElement { kind, gamma, offset, label, eigenvalue: None }
    }

    pub fn constant(r: i32) -> Self {
        Self::new(BasisKind::Constant, r, BigRational::zero(), 0)
    }
}

impl fmt::Display for BasisElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            BasisKind::Constant => write!(f, "constant"),
            _ => write!(f, "{}[gamma={}, n={}, label={}]", self.kind, self.gamma, self.offset, self.label),
        }
    }
}

/// An ordered family of functions on one grid.
#[derive(Clone, Debug)]
pub struct BasisSet<S> {
    grid: Arc<CosetGrid>,
    kind: BasisKind,
    complete: bool,
    elements: Vec<BasisElement>,
    functions: Vec<GridFunction<S>>,
}

impl<S: Scalar> BasisSet<S> {
    pub fn grid(&self) -> &Arc<CosetGrid> {
        &self.grid
    }

    /// Kind of the non-constant members.
    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    /// Whether the set spans the whole grid space.
    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn elements(&self) -> &[BasisElement] {
        &self.elements
    }

    pub fn elements_mut(&mut self) -> &mut [BasisElement] {
        &mut self.elements
    }

    pub fn functions(&self) -> &[GridFunction<S>] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BasisElement, &GridFunction<S>)> {
        self.elements.iter().zip(&self.functions)
    }

    pub fn is_orthonormal_kind(&self) -> bool {
        matches!(self.kind, BasisKind::Phi | BasisKind::Psi | BasisKind::Character)
    }

    /// Gram matrix `G[i][j] = <e_i, e_j>`, row-major.
    pub fn gram(&self) -> Vec<Vec<S>> {
        self.functions
            .iter()
            .map(|a| self.functions.iter().map(|b| a.inner_product(b).expect("same grid")).collect())
            .collect()
    }

    pub fn to_complex(&self) -> BasisSet<Complex64> {
        BasisSet {
            grid: self.grid.clone(),
            kind: self.kind,
            complete: self.complete,
            elements: self.elements.clone(),
            functions: self.functions.iter().map(GridFunction::to_complex).collect(),
        }
    }
}

/// Coefficients `c_i = <e_i, f>` in an orthonormal basis.
pub fn analyze<S: Scalar>(f: &GridFunction<S>, basis: &BasisSet<S>) -> Result<Vec<S>> {
    if !basis.is_orthonormal_kind() {
        return Err(Error::Unsupported(format!("analysis in the non-orthonormal {} family", basis.kind)));
    }
    basis.functions.iter().map(|e| e.inner_product(f)).collect()
}

/// `sum_i c_i e_i`.
pub fn synthesize<S: Scalar>(coefficients: &[S], basis: &BasisSet<S>) -> Result<GridFunction<S>> {
    if coefficients.len() != basis.len() {
        return Err(Error::LengthMismatch { expected: basis.len(), actual: coefficients.len() });
    }
    let mut out = GridFunction::zeros(basis.grid.clone());
    for (c, e) in coefficients.iter().zip(&basis.functions) {
        if !c.is_zero() {
            out.axpy(c, e)?;
        }
    }
    Ok(out)
}

fn check_scale(grid: &CosetGrid, gamma: i32) -> Result<()> {
    if gamma <= grid.l() || gamma > grid.r() {
        return Err(Error::ScaleOutOfWindow { gamma, min: grid.l() + 1, max: grid.r() });
    }
    Ok(())
}

fn check_label(label: u64, min: u64, p: Prime) -> Result<()> {
    if label < min || label >= p.get() {
        return Err(Error::InvalidLabel { label, min, max: p.get() - 1 });
    }
    Ok(())
}

/// Index of the centre `c` in the grid, after checking that `c` is a
/// canonical representative of `B_r / B_gamma`.
fn centre_index(grid: &CosetGrid, gamma: i32, centre: &BigRational) -> Result<usize> {
    let scaled = centre * grid.prime().pow(grid.r() as i64);
    let limit = BigInt::from(grid.prime().get()).pow((grid.r() - gamma) as u32);
    let valid = scaled.is_integer() && !scaled.numer() < BigInt::zero() && scaled.numer() < &limit;
    if !valid {
        return Err(Error::InvalidOffset(format!(
            "{centre} is not a representative of B_{} / B_{gamma}",
            grid.r()
        )));
    }
    Ok(scaled.numer().to_usize().expect("below grid length"))
}

/// The wavelet label `n = p^gamma c` of the ball `B_gamma(c)`.
pub fn wavelet_label(p: Prime, gamma: i32, centre: &BigRational) -> BigRational {
    centre * p.pow(gamma as i64)
}

/// The centre `c = p^-gamma n` of a wavelet's support.
pub fn wavelet_centre(p: Prime, gamma: i32, label: &BigRational) -> BigRational {
    label * p.pow(-(gamma as i64))
}

/// Values of `f_{gamma,c,a}` on the grid, as rationals.
fn f_values(grid: &CosetGrid, gamma: i32, centre: usize, a: u64) -> Vec<BigRational> {
    let p = grid.prime();
    let inv_p = p.pow(-1);
    let inside = BigRational::one() - &inv_p;
    let rim = -inv_p;
    // c + a p^-gamma is again a representative: index c + a p^(r - gamma).
    let sub = centre + (a * p.get().pow((grid.r() - gamma) as u32)) as usize;
    (0..grid.len())
        .map(|i| {
            if !grid.same_ball(i, centre, gamma) {
                BigRational::zero()
            } else if grid.same_ball(i, sub, gamma - 1) {
                inside.clone()
            } else {
                rim.clone()
            }
        })
        .collect()
}

/// `f_{gamma,c,a}`, exactly.
pub fn build_f(gamma: i32, centre: &BigRational, a: u64, grid: &Arc<CosetGrid>) -> Result<GridFunction<QuadScalar>> {
    check_scale(grid, gamma)?;
    check_label(a, 0, grid.prime())?;
    let c = centre_index(grid, gamma, centre)?;
    let values = f_values(grid, gamma, c, a).into_iter().map(QuadScalar::rational).collect();
    GridFunction::new(grid.clone(), values)
}

/// `f_{gamma,c,a}` straight from the two ball indicators; slow, used as a
/// cross-check of [`build_f`].
pub fn build_f_from_indicators(
    gamma: i32,
    centre: &BigRational,
    a: u64,
    grid: &Arc<CosetGrid>,
) -> Result<GridFunction<QuadScalar>> {
    check_scale(grid, gamma)?;
    check_label(a, 0, grid.prime())?;
    centre_index(grid, gamma, centre)?;
    let p = grid.prime();
    let shifted = centre + BigRational::from_integer(a.into()) * p.pow(-(gamma as i64));
    let inv_p = p.pow(-1);
    Ok(GridFunction::from_fn(grid.clone(), |_, x| {
        let mut v = BigRational::zero();
        if ball_indicator(x, &shifted, gamma - 1, p) {
            v += BigRational::one();
        }
        if ball_indicator(x, centre, gamma, p) {
            v -= &inv_p;
        }
        QuadScalar::rational(v)
    }))
}

/// Amplitude `p^(-(gamma-1)/2) / k`.
fn phi_amplitude(p: Prime, gamma: i32, k: &QuadScalar) -> QuadScalar {
    let scale = QuadScalar::sqrt_p_power(p, -(gamma as i64 - 1));
    scale.checked_div(k).expect("k = -1 +- sqrt p is nonzero")
}

/// `phi_{gamma,c,b}`, exactly in `Q(sqrt p)`.
pub fn build_phi(
    gamma: i32,
    centre: &BigRational,
    b: u64,
    grid: &Arc<CosetGrid>,
    sign: KSign,
) -> Result<GridFunction<QuadScalar>> {
    check_scale(grid, gamma)?;
    check_label(b, 1, grid.prime())?;
    let c = centre_index(grid, gamma, centre)?;
    let p = grid.prime();
    let k = root_of_orthogonality(p, sign);
    let amp = phi_amplitude(p, gamma, &k);
    let f0 = f_values(grid, gamma, c, 0);
    let fb = f_values(grid, gamma, c, b);
    let values = f0
        .iter()
        .zip(&fb)
        .map(|(u, v)| {
            if u.is_zero() && v.is_zero() {
                return QuadScalar::zero();
            }
            let combo = &QuadScalar::rational(u.clone()) + &k.scale(v);
            &amp * &combo
        })
        .collect();
    GridFunction::new(grid.clone(), values)
}

/// The normalized constant `p^(-r/2)`.
pub fn build_constant(grid: &Arc<CosetGrid>) -> GridFunction<QuadScalar> {
    GridFunction::constant(grid.clone(), QuadScalar::sqrt_p_power(grid.prime(), -(grid.r() as i64)))
}

/// The constant `f_r = p^-r` of the overcomplete family.
pub fn build_f_r(grid: &Arc<CosetGrid>) -> GridFunction<QuadScalar> {
    GridFunction::constant(grid.clone(), QuadScalar::rational(grid.prime().pow(-(grid.r() as i64))))
}

/// Scales in descending order, then centres in coset order.
fn scale_centre_pairs(grid: &CosetGrid) -> Vec<(i32, BigRational)> {
    let mut out = Vec::new();
    for gamma in (grid.l() + 1..=grid.r()).rev() {
        for c in grid.centres(gamma).expect("gamma within window") {
            out.push((gamma, c));
        }
    }
    out
}

/// Number of elements of the phi basis: `1 + sum_gamma p^(r-gamma) (p-1) = p^(r-l)`.
pub fn phi_basis_size(p: Prime, r: i32, l: i32) -> u64 {
    1 + (l + 1..=r).map(|g| p.get().pow((r - g) as u32) * (p.get() - 1)).sum::<u64>()
}

/// The orthonormal basis: constant first, then `gamma` descending, centres in
/// coset order, `b` ascending.
pub fn enumerate_phi_basis(grid: &Arc<CosetGrid>, sign: KSign) -> BasisSet<QuadScalar> {
    let p = grid.prime();
    let mut elements = vec![BasisElement::constant(grid.r())];
    let mut functions = vec![build_constant(grid)];
    for (gamma, c) in scale_centre_pairs(grid) {
        for b in 1..p.get() {
            functions.push(build_phi(gamma, &c, b, grid, sign).expect("valid descriptor"));
            elements.push(BasisElement::new(BasisKind::Phi, gamma, c.clone(), b));
        }
    }
    BasisSet { grid: grid.clone(), kind: BasisKind::Phi, complete: true, elements, functions }
}

/// The phi family as used on all of `Q_p`: no constant, offsets given as
/// wavelet labels `n` (centre `n p^-gamma`). Only complete within the
/// window, so [`BasisSet::is_complete`] is false.
pub fn enumerate_phi_basis_qp(grid: &Arc<CosetGrid>, sign: KSign) -> BasisSet<QuadScalar> {
    let full = enumerate_phi_basis(grid, sign);
    let p = grid.prime();
    let (elements, functions) = full
        .elements
        .into_iter()
        .zip(full.functions)
        .filter(|(e, _)| e.kind != BasisKind::Constant)
        .map(|(mut e, f)| {
            e.offset = wavelet_label(p, e.gamma, &e.offset);
            (e, f)
        })
        .unzip();
    BasisSet { grid: grid.clone(), kind: BasisKind::Phi, complete: false, elements, functions }
}

/// `f_r` followed by every `f_{gamma,c,a}` (overcomplete).
pub fn enumerate_f_family(grid: &Arc<CosetGrid>) -> BasisSet<QuadScalar> {
    let p = grid.prime();
    let mut elements = vec![BasisElement::constant(grid.r())];
    let mut functions = vec![build_f_r(grid)];
    for (gamma, c) in scale_centre_pairs(grid) {
        for a in 0..p.get() {
            functions.push(build_f(gamma, &c, a, grid).expect("valid descriptor"));
            elements.push(BasisElement::new(BasisKind::F, gamma, c.clone(), a));
        }
    }
    BasisSet { grid: grid.clone(), kind: BasisKind::F, complete: true, elements, functions }
}

/// `p^(-r/2) chi(k x)` for every window frequency.
pub fn enumerate_character_basis(grid: &Arc<CosetGrid>) -> BasisSet<Complex64> {
    let freq = FrequencyGrid::dual_to(grid);
    let norm = grid.prime().powf(-(grid.r() as f64) / 2.0);
    let mut elements = Vec::with_capacity(freq.len());
    let mut functions = Vec::with_capacity(freq.len());
    for a in 0..freq.len() {
        let mut e = BasisElement::new(BasisKind::Character, grid.r(), freq.frequency(a).clone(), a as u64);
        if a == 0 {
            e.kind = BasisKind::Constant;
        }
        elements.push(e);
        functions.push(GridFunction::from_fn(grid.clone(), |m, _| freq.phase(a, m) * norm));
    }
    BasisSet { grid: grid.clone(), kind: BasisKind::Character, complete: true, elements, functions }
}

/// `psi_{gamma,n,j}` on the grid.
pub fn build_wavelet(gamma: i32, n: &BigRational, j: u64, grid: &Arc<CosetGrid>) -> Result<GridFunction<Complex64>> {
    check_scale(grid, gamma)?;
    let p = grid.prime();
    check_label(j, 1, p)?;
    if frac_part(n, p)? != *n {
        return Err(Error::InvalidOffset(format!("{n} is not a canonical element of Q_p/Z_p")));
    }
    let centre = wavelet_centre(p, gamma, n);
    if !PAdicRational::new(centre.clone(), p).in_ball(grid.r()) {
        return Err(Error::OutsideBall { value: centre.to_string(), r: grid.r() });
    }
    let amp = p.powf(-(gamma as f64) / 2.0);
    let phase_scale = p.pow(gamma as i64 - 1) * BigRational::from_integer(j.into());
    let mut err = None;
    let f = GridFunction::from_fn(grid.clone(), |_, x| {
        if !ball_indicator(x, &centre, gamma, p) {
            return Complex64::new(0.0, 0.0);
        }
        match character(&(&phase_scale * (x - &centre)), p) {
            Ok(chi) => chi * amp,
            Err(e) => {
                err = Some(e);
                Complex64::new(0.0, 0.0)
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(f),
    }
}

/// Constant `p^(-r/2)` followed by every wavelet in the window.
pub fn enumerate_wavelet_basis(grid: &Arc<CosetGrid>) -> BasisSet<Complex64> {
    let p = grid.prime();
    let mut elements = vec![BasisElement::constant(grid.r())];
    let mut functions = vec![build_constant(grid).to_complex()];
    for (gamma, c) in scale_centre_pairs(grid) {
        let n = wavelet_label(p, gamma, &c);
        for j in 1..p.get() {
            functions.push(build_wavelet(gamma, &n, j, grid).expect("valid descriptor"));
            elements.push(BasisElement::new(BasisKind::Psi, gamma, n.clone(), j));
        }
    }
    BasisSet { grid: grid.clone(), kind: BasisKind::Psi, complete: true, elements, functions }
}

/// `chi(s / p)` for an integer `s`.
fn chi_digit(s: i64, p: Prime) -> Complex64 {
    root_of_unity(s.rem_euclid(p.get() as i64) as u64, p.get())
}

fn k_float(p: Prime, sign: KSign) -> f64 {
    root_of_orthogonality(p, sign).to_f64()
}

fn wavelets_at(grid: &Arc<CosetGrid>, gamma: i32, centre: &BigRational) -> Result<Vec<GridFunction<Complex64>>> {
    let p = grid.prime();
    let n = wavelet_label(p, gamma, centre);
    (1..p.get()).map(|j| build_wavelet(gamma, &n, j, grid)).collect()
}

fn combine(
    grid: &Arc<CosetGrid>,
    terms: impl IntoIterator<Item = (Complex64, GridFunction<Complex64>)>,
) -> Result<GridFunction<Complex64>> {
    let mut out = GridFunction::zeros(grid.clone());
    for (c, f) in terms {
        out.axpy(&c, &f)?;
    }
    Ok(out)
}

/// `f_{gamma,c,a} = p^(gamma/2 - 1) sum_j chi(-j a / p) psi_{gamma,n,j}`.
pub fn f_from_wavelets(gamma: i32, centre: &BigRational, a: u64, grid: &Arc<CosetGrid>) -> Result<GridFunction<Complex64>> {
    let p = grid.prime();
    check_label(a, 0, p)?;
    centre_index(grid, gamma, centre).or_else(|e| check_scale(grid, gamma).and(Err(e)))?;
    let scale = p.powf(gamma as f64 / 2.0 - 1.0);
    let psis = wavelets_at(grid, gamma, centre)?;
    combine(
        grid,
        psis.into_iter().enumerate().map(|(i, psi)| {
            let j = i as i64 + 1;
            (chi_digit(-j * a as i64, p) * scale, psi)
        }),
    )
}

/// `phi_{gamma,c,b} = p^(-1/2) / k sum_j (1 + k chi(-j b / p)) psi_{gamma,n,j}`.
pub fn phi_from_wavelets(
    gamma: i32,
    centre: &BigRational,
    b: u64,
    grid: &Arc<CosetGrid>,
    sign: KSign,
) -> Result<GridFunction<Complex64>> {
    let p = grid.prime();
    check_label(b, 1, p)?;
    centre_index(grid, gamma, centre).or_else(|e| check_scale(grid, gamma).and(Err(e)))?;
    let row = &phi_in_wavelets(p, sign)[b as usize - 1];
    let psis = wavelets_at(grid, gamma, centre)?;
    combine(grid, row.iter().copied().zip(psis))
}

/// `psi_{gamma,n,j} = p^(-gamma/2) sum_a chi(j a / p) f_{gamma,c,a}`.
pub fn wavelet_from_f(gamma: i32, n: &BigRational, j: u64, grid: &Arc<CosetGrid>) -> Result<GridFunction<Complex64>> {
    let p = grid.prime();
    check_label(j, 1, p)?;
    let centre = wavelet_centre(p, gamma, n);
    let scale = p.powf(-(gamma as f64) / 2.0);
    let fs = (0..p.get())
        .map(|a| build_f(gamma, &centre, a, grid).map(|f| f.to_complex()))
        .collect::<Result<Vec<_>>>()?;
    combine(
        grid,
        fs.into_iter().enumerate().map(|(a, f)| (chi_digit(j as i64 * a as i64, p) * scale, f)),
    )
}

/// `psi_{gamma,n,j} = p^(-1/2) sum_b ((k+1)/(p-k-1) + chi(j b / p)) phi_{gamma,c,b}`.
pub fn wavelet_from_phi(
    gamma: i32,
    n: &BigRational,
    j: u64,
    grid: &Arc<CosetGrid>,
    sign: KSign,
) -> Result<GridFunction<Complex64>> {
    let p = grid.prime();
    check_label(j, 1, p)?;
    let centre = wavelet_centre(p, gamma, n);
    let row = &wavelets_in_phi(p, sign)[j as usize - 1];
    let phis = (1..p.get())
        .map(|b| build_phi(gamma, &centre, b, grid, sign).map(|f| f.to_complex()))
        .collect::<Result<Vec<_>>>()?;
    combine(grid, row.iter().copied().zip(phis))
}

/// Rows `b = 1..p-1`: coefficients of `phi_b` over `psi_j`, `j = 1..p-1`.
pub fn phi_in_wavelets(p: Prime, sign: KSign) -> Vec<Vec<Complex64>> {
    let k = k_float(p, sign);
    let pre = p.powf(-0.5) / k;
    (1..p.get() as i64)
        .map(|b| {
            (1..p.get() as i64)
                .map(|j| (Complex64::new(1.0, 0.0) + chi_digit(-j * b, p) * k) * pre)
                .collect()
        })
        .collect()
}

/// Rows `j = 1..p-1`: coefficients of `psi_j` over `phi_b`, `b = 1..p-1`.
pub fn wavelets_in_phi(p: Prime, sign: KSign) -> Vec<Vec<Complex64>> {
    let k = k_float(p, sign);
    let pf = p.get() as f64;
    let shift = (k + 1.0) / (pf - k - 1.0);
    let pre = pf.powf(-0.5);
    (1..p.get() as i64)
        .map(|j| (1..p.get() as i64).map(|b| (chi_digit(j * b, p) + shift) * pre).collect())
        .collect()
}

/// `f_{gamma,c,a}` recovered exactly from the phi family at the same ball:
/// `f_0 = k p^((gamma-1)/2) / (p-k-1) sum_b phi_b` and
/// `f_b = p^((gamma-1)/2) (phi_b - sum_b' phi_b' / (p-k-1))`.
pub fn f_from_phi(
    gamma: i32,
    centre: &BigRational,
    a: u64,
    grid: &Arc<CosetGrid>,
    sign: KSign,
) -> Result<GridFunction<QuadScalar>> {
    let p = grid.prime();
    check_label(a, 0, p)?;
    let k = root_of_orthogonality(p, sign);
    let phis = (1..p.get())
        .map(|b| build_phi(gamma, centre, b, grid, sign))
        .collect::<Result<Vec<_>>>()?;
    let mut sum = GridFunction::zeros(grid.clone());
    for phi in &phis {
        sum = sum.add(phi)?;
    }
    let half = QuadScalar::sqrt_p_power(p, gamma as i64 - 1);
    let denom = &QuadScalar::from_integer(p.get() as i64 - 1) - &k;
    let inv_denom = denom.inv()?;
    if a == 0 {
        Ok(sum.scale(&(&(&k * &half) * &inv_denom)))
    } else {
        let phi_a = &phis[a as usize - 1];
        Ok(phi_a.sub(&sum.scale(&inv_denom))?.scale(&half))
    }
}

/// Coefficients of `Omega(|x|_p) = f_r + sum_{gamma=1}^{r} p^(1-gamma) f_{gamma,0,0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct OmegaExpansion {
    /// Coefficient of `f_r = p^-r`.
    pub constant: BigRational,
    /// `(gamma, coefficient of f_{gamma,0,0})`, `gamma = 1..=r`.
    pub terms: Vec<(i32, BigRational)>,
}

impl OmegaExpansion {
    pub fn synthesize(&self, grid: &Arc<CosetGrid>) -> Result<GridFunction<QuadScalar>> {
        let mut out = build_f_r(grid).scale_rational(&self.constant);
        let zero = BigRational::zero();
        for (gamma, c) in &self.terms {
            out.axpy(&QuadScalar::rational(c.clone()), &build_f(*gamma, &zero, 0, grid)?)?;
        }
        Ok(out)
    }
}

/// The expansion of the indicator of `Z_p`; needs `r >= 0 >= l`.
pub fn omega_expansion(grid: &CosetGrid) -> Result<OmegaExpansion> {
    if grid.r() < 0 || grid.l() > 0 {
        return Err(Error::Unsupported(format!(
            "window (r={}, l={}) cannot resolve Z_p: need r >= 0 >= l",
            grid.r(),
            grid.l()
        )));
    }
    let p = grid.prime();
    let terms = (1..=grid.r()).map(|g| (g, p.pow(1 - g as i64))).collect();
    Ok(OmegaExpansion { constant: BigRational::one(), terms })
}
