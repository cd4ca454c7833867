//! Cauchy problems `df/dt = A f` for the Vladimirov and kernel operators.
//!
//! Both generators are diagonal in the phi basis: the Vladimirov eigenvalue
//! depends on the scale only, a cutoff kernel's on the scale and the wavelet
//! label of the ball. Coefficients and eigenvalues are computed in the input
//! backend; only `exp(lambda t)` is evaluated in floating point.

use std::sync::Arc;

use num::complex::Complex64;
use num::rational::BigRational;
use num::traits::{ToPrimitive, Zero};

use crate::bases::{build_f, build_f_r, enumerate_phi_basis, omega_expansion, wavelet_label, BasisKind, BasisSet};
use crate::error::{Error, Result};
use crate::function_space::GridFunction;
use crate::operators::{
    kernel_eigenvalue, kernel_matrix, matrix_exponential, apply_dense, vladimirov_eigenvalue_br, vladimirov_matrix, Alpha,
    Eigenvalue, KernelSpec, OperatorMatrix, RealValue,
};
use crate::padic::{CosetGrid, PAdicRational};
use crate::scalars::{Backend, KSign, QuadScalar, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub enum OperatorDescriptor {
    Vladimirov { alpha: Alpha },
    Kernel { spec: KernelSpec },
}

impl OperatorDescriptor {
    pub fn matrix(&self, grid: &Arc<CosetGrid>, backend: Backend) -> Result<OperatorMatrix> {
        match self {
            OperatorDescriptor::Vladimirov { alpha } => vladimirov_matrix(grid, *alpha, backend),
            OperatorDescriptor::Kernel { spec } => kernel_matrix(grid, spec, backend),
        }
    }

    pub fn check(&self, grid: &CosetGrid) -> Result<()> {
        if let OperatorDescriptor::Kernel { spec } = self {
            if spec.prime() != grid.prime() {
                return Err(Error::GridMismatch(format!(
                    "kernel for p={} on a grid with p={}",
                    spec.prime().get(),
                    grid.prime().get()
                )));
            }
            if spec.gamma_max() > grid.r() {
                return Err(Error::CutoffViolation { gamma_max: spec.gamma_max(), r: grid.r() });
            }
        }
        Ok(())
    }

    /// Eigenvalue on the ball `B_gamma(c)` eigenfunctions; `None` for the constant.
    pub fn eigenvalue(&self, grid: &CosetGrid, scale: Option<(i32, &BigRational)>) -> Result<Eigenvalue> {
        let Some((gamma, centre)) = scale else {
            return Ok(RealValue::zero());
        };
        match self {
            OperatorDescriptor::Vladimirov { alpha } => vladimirov_eigenvalue_br(grid.prime(), grid.r(), gamma, *alpha),
            OperatorDescriptor::Kernel { spec } => {
                kernel_eigenvalue(gamma, &wavelet_label(grid.prime(), gamma, centre), spec)
            }
        }
    }
}

/// One spectral mode of the initial datum.
#[derive(Clone, Debug)]
pub struct Mode<S> {
    pub coefficient: S,
    pub eigenvalue: Eigenvalue,
}

#[derive(Clone, Debug)]
pub struct EvolutionRun {
    pub grid: Arc<CosetGrid>,
    pub operator: OperatorDescriptor,
    pub initial: GridFunction<Complex64>,
    pub times: Vec<f64>,
    pub snapshots: Vec<GridFunction<Complex64>>,
}

impl EvolutionRun {
    /// `integral f(x, t) dx` per snapshot.
    pub fn masses(&self) -> Vec<Complex64> {
        self.snapshots.iter().map(GridFunction::integrate).collect()
    }

    /// `||f(., t) - m p^-r||_2`, the distance to the mass-preserving constant.
    pub fn distances_to_equilibrium(&self) -> Vec<f64> {
        let volume = self.grid.prime().powf(self.grid.r() as f64);
        let mass = self.initial.integrate();
        let eq = GridFunction::constant(self.grid.clone(), mass / volume);
        self.snapshots
            .iter()
            .map(|s| s.sub(&eq).expect("same grid").norm_squared().re.max(0.0).sqrt())
            .collect()
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    for (i, &t) in times.iter().enumerate() {
        if !t.is_finite() {
            return Err(Error::InvalidTimes(format!("non-finite time {t}")));
        }
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        if i > 0 && t <= times[i - 1] {
            return Err(Error::InvalidTimes("times must be strictly increasing".into()));
        }
    }
    Ok(())
}

fn check_function<S: Scalar>(grid: &Arc<CosetGrid>, f0: &GridFunction<S>) -> Result<()> {
    if **f0.grid() != **grid {
        return Err(Error::GridMismatch("initial condition lives on a different grid".into()));
    }
    Ok(())
}

fn converted<S: Scalar>(basis: &BasisSet<QuadScalar>) -> Vec<GridFunction<S>> {
    basis.functions().iter().map(|f| f.map(S::from_quad)).collect()
}

/// Expansion of `f0` in the phi basis together with each mode's eigenvalue.
pub fn spectral_modes<S: Scalar>(
    grid: &Arc<CosetGrid>,
    operator: &OperatorDescriptor,
    f0: &GridFunction<S>,
) -> Result<(BasisSet<QuadScalar>, Vec<Mode<S>>)> {
    check_function(grid, f0)?;
    operator.check(grid)?;
    let basis = enumerate_phi_basis(grid, KSign::Plus);
    let functions = converted::<S>(&basis);
    let mut modes = Vec::with_capacity(basis.len());
    for (e, phi) in basis.elements().iter().zip(&functions) {
        let scale = (e.kind != BasisKind::Constant).then_some((e.gamma, &e.offset));
        modes.push(Mode { coefficient: phi.inner_product(f0)?, eigenvalue: operator.eigenvalue(grid, scale)? });
    }
    Ok((basis, modes))
}

/// Snapshots `sum_i c_i exp(lambda_i t) phi_i`.
pub fn solve_spectral<S: Scalar>(
    grid: &Arc<CosetGrid>,
    operator: &OperatorDescriptor,
    f0: &GridFunction<S>,
    times: &[f64],
) -> Result<EvolutionRun> {
    check_times(times)?;
    let (basis, modes) = spectral_modes(grid, operator, f0)?;
    let initial = f0.to_complex();
    let phis: Vec<GridFunction<Complex64>> = basis.functions().iter().map(GridFunction::to_complex).collect();
    let snapshots = times
        .iter()
        .map(|&t| {
            if t == 0.0 {
                return initial.clone();
            }
            let mut out = GridFunction::zeros(grid.clone());
            for (m, phi) in modes.iter().zip(&phis) {
                if m.coefficient.is_zero() {
                    continue;
                }
                let c = m.coefficient.to_complex() * (m.eigenvalue.to_f64() * t).exp();
                out.axpy(&c, phi).expect("same grid");
            }
            out
        })
        .collect();
    Ok(EvolutionRun { grid: grid.clone(), operator: operator.clone(), initial, times: times.to_vec(), snapshots })
}

/// Snapshots `exp(t A) f0` from the dense matrix exponential.
pub fn solve_oracle<S: Scalar>(
    grid: &Arc<CosetGrid>,
    operator: &OperatorDescriptor,
    f0: &GridFunction<S>,
    times: &[f64],
) -> Result<EvolutionRun> {
    check_times(times)?;
    check_function(grid, f0)?;
    let a = operator.matrix(grid, Backend::float())?;
    let initial = f0.to_complex();
    let snapshots = times
        .iter()
        .map(|&t| apply_dense(&matrix_exponential(&a, t)?, &initial))
        .collect::<Result<_>>()?;
    Ok(EvolutionRun { grid: grid.clone(), operator: operator.clone(), initial, times: times.to_vec(), snapshots })
}

/// Largest sup-norm gap between matching snapshots of two runs.
pub fn max_snapshot_gap(a: &EvolutionRun, b: &EvolutionRun) -> Result<f64> {
    if a.times != b.times {
        return Err(Error::InvalidTimes("runs use different time grids".into()));
    }
    a.snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(x, y)| x.sup_distance(y))
        .try_fold(0.0f64, |acc, d| d.map(|d| acc.max(d)))
}

/// One term `coefficient * exp(lambda t) f_{gamma,0,0}` of the solution
/// started from `Omega(|x|_p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OmegaTerm {
    pub gamma: i32,
    pub coefficient: BigRational,
    pub eigenvalue: Eigenvalue,
}

/// The Vladimirov solution from `Omega(|x|_p)`:
/// `p^-r + sum_{gamma=1}^{r} p^(1-gamma) exp(lambda_gamma t) f_{gamma,0,0}`.
pub fn omega_terms(grid: &CosetGrid, alpha: Alpha) -> Result<Vec<OmegaTerm>> {
    let expansion = omega_expansion(grid)?;
    expansion
        .terms
        .into_iter()
        .map(|(gamma, coefficient)| {
            Ok(OmegaTerm { gamma, coefficient, eigenvalue: vladimirov_eigenvalue_br(grid.prime(), grid.r(), gamma, alpha)? })
        })
        .collect()
}

pub fn omega_solution(grid: &Arc<CosetGrid>, alpha: Alpha, t: f64) -> Result<GridFunction<Complex64>> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let mut out = build_f_r(grid).to_complex();
    let zero = BigRational::zero();
    for term in omega_terms(grid, alpha)? {
        let c = term.coefficient.to_f64().unwrap_or(f64::NAN) * (term.eigenvalue.to_f64() * t).exp();
        out.axpy(&Complex64::new(c, 0.0), &build_f(term.gamma, &zero, 0, grid)?.to_complex())?;
    }
    Ok(out)
}

/// Where to measure the surviving mass.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Ball { centre: BigRational, gamma: i32 },
    Cosets(Vec<usize>),
}

impl Region {
    /// Coset indices of the region on `grid`.
    pub fn cosets(&self, grid: &CosetGrid) -> Result<Vec<usize>> {
        match self {
            Region::Cosets(ix) => {
                if let Some(&bad) = ix.iter().find(|&&i| i >= grid.len()) {
                    return Err(Error::LengthMismatch { expected: grid.len(), actual: bad + 1 });
                }
                Ok(ix.clone())
            }
            Region::Ball { centre, gamma } => {
                if *gamma > grid.r() {
                    return Err(Error::ScaleOutOfWindow { gamma: *gamma, min: grid.l(), max: grid.r() });
                }
                if *gamma < grid.l() {
                    return Err(Error::ScaleOutOfWindow { gamma: *gamma, min: grid.l(), max: grid.r() });
                }
                let c = grid.coset_index(&PAdicRational::new(centre.clone(), grid.prime()))?;
                Ok((0..grid.len()).filter(|&i| grid.same_ball(i, c, *gamma)).collect())
            }
        }
    }
}

/// `(t, integral over the region of f(x, t))` for every snapshot.
pub fn survival_series(run: &EvolutionRun, region: &Region) -> Result<Vec<(f64, f64)>> {
    let cosets = region.cosets(&run.grid)?;
    let cell = run.grid.prime().powf(run.grid.l() as f64);
    Ok(run
        .times
        .iter()
        .zip(&run.snapshots)
        .map(|(&t, s)| (t, cosets.iter().map(|&i| s.values()[i].re).sum::<f64>() * cell))
        .collect())
}
