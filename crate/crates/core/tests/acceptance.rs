//! Acceptance suite: one line per criterion, nonzero exit status on failure.

use std::panic;
use std::sync::Arc;
use std::time::Instant;

use num::complex::Complex64;
use num::rational::BigRational;
use num::traits::One;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use padic_spectral::bases::{
    analyze, build_f, build_phi, build_wavelet, enumerate_phi_basis, f_from_wavelets, omega_expansion, phi_from_wavelets,
    phi_in_wavelets, wavelet_from_f, wavelet_from_phi, wavelet_label, wavelets_in_phi, BasisKind,
    enumerate_wavelet_basis,
};
use padic_spectral::evolution::{max_snapshot_gap, solve_oracle, solve_spectral, survival_series, OperatorDescriptor, Region};
use padic_spectral::fourier::{
    character_function, convolve_spectral, dft_forward, dft_inverse, parseval_gap, product_spectrum, support_duality,
    FrequencyGrid,
};
use padic_spectral::function_space::GridFunction;
use padic_spectral::operators::{
    annotate_eigenvalues, boundary_term, character_eigenvalue, kernel_eigenvalue, kernel_matrix, vladimirov_eigenvalue_br,
    vladimirov_eigenvalue_qp, vladimirov_matrix, Alpha, KernelSpec, RealValue,
};
use padic_spectral::padic::{root_of_unity, CosetGrid, Prime};
use padic_spectral::scalars::{Backend, KSign, QuadScalar, Scalar};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn prime(p: u64) -> Prime {
    Prime::new(p).expect("prime")
}

fn grid(p: u64, r: i32, l: i32) -> Arc<CosetGrid> {
    CosetGrid::shared(prime(p), r, l).expect("window")
}

fn q(a: i64, b: i64) -> BigRational {
    BigRational::new(a.into(), b.into())
}

/// Windows with `p^(r-l) <= 243` for every depth, at several ball exponents.
fn windows(p: u64) -> Vec<(i32, i32)> {
    let mut out = Vec::new();
    let mut d = 1;
    while p.pow(d as u32) <= 243 {
        let mut rs = vec![-1, 0, 1, d];
        rs.dedup();
        for r in rs {
            out.push((r, r - d));
        }
        d += 1;
    }
    out
}

fn random_function(g: &Arc<CosetGrid>, rng: &mut StdRng) -> GridFunction<Complex64> {
    GridFunction::from_fn(g.clone(), |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn random_real(g: &Arc<CosetGrid>, rng: &mut StdRng) -> GridFunction<Complex64> {
    GridFunction::from_fn(g.clone(), |_, _| Complex64::new(rng.gen_range(-1.0..1.0), 0.0))
}

fn random_rational(rng: &mut StdRng) -> BigRational {
    q(rng.gen_range(-20..=20), rng.gen_range(1..=9))
}

fn is_identity(gram: &[Vec<QuadScalar>]) -> bool {
    gram.iter().enumerate().all(|(i, row)| {
        row.iter().enumerate().all(|(j, v)| *v == if i == j { QuadScalar::one() } else { QuadScalar::zero() })
    })
}

fn criterion_1() -> Outcome {
    let mut checked = 0;
    let mut elements = 0;
    for p in [2, 3, 5] {
        for (r, l) in windows(p) {
            let g = grid(p, r, l);
            for sign in KSign::both() {
                let basis = enumerate_phi_basis(&g, sign);
                ensure(basis.len() == g.len(), || format!("basis size {} on p={p} r={r} l={l}", basis.len()))?;
                ensure(is_identity(&basis.gram()), || format!("Gram matrix is not the identity at p={p} r={r} l={l} k{sign}"))?;
                checked += 1;
                elements += basis.len();
            }
        }
    }
    Ok(format!("{checked} (window, sign) pairs, {elements} basis functions, all Gram matrices exactly I"))
}

fn criterion_2() -> Outcome {
    let example = vladimirov_eigenvalue_br(prime(2), 1, 1, Alpha::Int(1)).map_err(err)?;
    ensure(example == RealValue::Exact(q(-2, 3)), || format!("lambda(p=2, alpha=1, r=1, gamma=1) = {example}"))?;
    let a = vladimirov_matrix(&grid(2, 1, 0), Alpha::Int(1), Backend::ExactQuad).map_err(err)?;
    let phi = build_phi(1, &q(0, 1), 1, &grid(2, 1, 0), KSign::Plus).map_err(err)?;
    ensure(a.apply(&phi).map_err(err)? == phi.scale_rational(&q(-2, 3)), || "2x2 oracle".into())?;

    let mut identities = 0;
    for p in [2, 3, 5] {
        for (r, l) in windows(p) {
            let g = grid(p, r, l);
            for alpha in [1, 2] {
                let a = vladimirov_matrix(&g, Alpha::Int(alpha), Backend::ExactQuad).map_err(err)?;
                for sign in KSign::both() {
                    let mut basis = enumerate_phi_basis(&g, sign);
                    annotate_eigenvalues(&mut basis, Alpha::Int(alpha)).map_err(err)?;
                    for (e, phi) in basis.iter() {
                        let lambda = e.eigenvalue.as_ref().and_then(RealValue::exact).expect("exact eigenvalue");
                        let lhs = a.apply(phi).map_err(err)?;
                        ensure(lhs == phi.scale_rational(lambda), || format!("A phi != lambda phi for {e} at p={p} r={r} l={l}"))?;
                        identities += 1;
                    }
                }
            }
        }
    }
    Ok(format!("lambda = -2/3 at the 2x2 oracle; {identities} exact identities A phi = lambda phi"))
}

/// Residuals are measured relative to `max(1, |lambda|)`, the float
/// backend's comparison rule: for `|k|_p^alpha` near `10^5` one unit in the
/// last place of `lambda` already exceeds `1e-10`.
fn criterion_3() -> Outcome {
    let (mut scaled, mut absolute) = (0.0f64, 0.0f64);
    let mut count = 0;
    for p in [2, 3, 5, 7] {
        for (r, l) in windows(p) {
            let g = grid(p, r, l);
            let freq = FrequencyGrid::dual_to(&g);
            for alpha in [Alpha::Int(1), Alpha::Int(2), Alpha::Real(0.5)] {
                let a = vladimirov_matrix(&g, alpha, Backend::float()).map_err(err)?;
                for k in 0..freq.len() {
                    let chi = character_function(g.clone(), k);
                    let lambda = character_eigenvalue(prime(p), r, freq.frequency(k), alpha).to_f64();
                    let res = a.apply(&chi).map_err(err)?.sup_distance(&chi.scale(&Complex64::new(lambda, 0.0))).map_err(err)?;
                    absolute = absolute.max(res);
                    scaled = scaled.max(res / lambda.abs().max(1.0));
                    count += 1;
                }
            }
        }
    }
    ensure(scaled <= 1e-10, || format!("max scaled residual {scaled:e}"))?;
    Ok(format!("{count} characters, max residual {scaled:.2e} relative to max(1, |lambda|), {absolute:.2e} absolute"))
}

fn criterion_4() -> Outcome {
    let mut rng = StdRng::seed_from_u64(4);
    let (mut round, mut parseval) = (0.0f64, 0.0f64);
    for (p, r, l) in [(2, 1, -4), (2, 3, -3), (3, 1, -3), (3, -2, -4), (5, 1, -2), (7, 0, -2), (11, 1, 0), (13, 0, -1)] {
        let g = grid(p, r, l);
        for _ in 0..20 {
            let f = random_function(&g, &mut rng);
            round = round.max(dft_inverse(&dft_forward(&f)).sup_distance(&f).map_err(err)?);
            parseval = parseval.max(parseval_gap(&f));
        }
    }
    ensure(round <= 1e-10, || format!("round-trip error {round:e}"))?;
    ensure(parseval <= 1e-10, || format!("Parseval gap {parseval:e}"))?;

    let mut duality = 0;
    for (p, r, l) in [(2, 1, 0), (2, 0, -2), (3, 1, 0), (3, 0, -1), (5, 0, -1)] {
        let g = grid(p, r, l);
        for (dr, dl) in [(1, 1), (2, 0), (0, 2)] {
            let refined = grid(p, r + dr, l - dl);
            if refined.len() > 729 {
                continue;
            }
            for _ in 0..3 {
                let f = GridFunction::from_fn(g.clone(), |_, _| QuadScalar::rational(random_rational(&mut rng)));
                let report = support_duality(&f, refined.clone()).map_err(err)?;
                ensure(report.holds(), || format!("duality fails at p={p} r={r} l={l}: {report:?}"))?;
                ensure(report.vanishing_checked > 0 || dl == 0, || "no frequencies beyond the support".into())?;
                duality += 1;
            }
        }
    }
    Ok(format!("round trip {round:.2e}, Parseval {parseval:.2e}, {duality} exact duality checks"))
}

fn criterion_5() -> Outcome {
    let mut rng = StdRng::seed_from_u64(5);
    let (mut conv, mut prod) = (0.0f64, 0.0f64);
    let grids = [(2, 1, -3), (3, 0, -3), (5, 1, -1), (7, 0, -1), (2, -1, -5)];
    for (p, r, l) in grids {
        let g = grid(p, r, l);
        for _ in 0..100 {
            let f = random_function(&g, &mut rng);
            let h = random_function(&g, &mut rng);
            conv = conv.max(convolve_spectral(&f, &h).map_err(err)?.sup_distance(&f.convolve_direct(&h).map_err(err)?).map_err(err)?);
            let direct = dft_forward(&f.pointwise_product(&h).map_err(err)?);
            prod = prod.max(product_spectrum(&f, &h).map_err(err)?.sup_distance(&direct));
        }
    }
    ensure(conv <= 1e-10, || format!("convolution gap {conv:e}"))?;
    ensure(prod <= 1e-10, || format!("product gap {prod:e}"))?;
    Ok(format!("{} grids x 100 pairs, convolution gap {conv:.2e}, product gap {prod:.2e}", grids.len()))
}

fn criterion_6() -> Outcome {
    let mut count = 0;
    for p in [2, 3] {
        for r in 1..=3 {
            for l in [0, -1, -2] {
                let g = grid(p, r, l);
                let omega = GridFunction::<QuadScalar>::omega(g.clone()).map_err(err)?;
                let expansion = omega_expansion(&g).map_err(err)?;
                for (i, (gamma, c)) in expansion.terms.iter().enumerate() {
                    ensure(*gamma == i as i32 + 1 && *c == prime(p).pow(-(i as i64)), || format!("term {i}: ({gamma}, {c})"))?;
                }
                let synthesized = expansion.synthesize(&g).map_err(err)?;
                let residual = synthesized.sub(&omega).map_err(err)?.norm_squared();
                ensure(residual.is_zero(), || format!("||g - Omega||^2 = {residual} at p={p} r={r} l={l}"))?;
                // The same function through the orthonormal basis.
                let basis = enumerate_phi_basis(&g, KSign::Plus);
                let coefficients = analyze(&omega, &basis).map_err(err)?;
                let energy = coefficients.iter().fold(QuadScalar::zero(), |acc, c| acc + c.clone() * c.clone());
                ensure(energy == omega.norm_squared(), || "Parseval in the phi basis".into())?;
                count += 1;
            }
        }
    }
    Ok(format!("{count} windows, reconstruction residual exactly 0"))
}

fn criterion_7() -> Outcome {
    let mut worst = 0.0f64;
    let mut composed = 0.0f64;
    let mut count = 0;
    for (p, r, l) in [(2, 1, -2), (3, 1, -2), (5, 1, -1), (7, 0, -2), (3, 2, 0)] {
        let g = grid(p, r, l);
        let pr = prime(p);
        for sign in KSign::both() {
            let to_psi = wavelets_in_phi(pr, sign);
            let to_phi = phi_in_wavelets(pr, sign);
            for gamma in l + 1..=r {
                for c in g.centres(gamma).map_err(err)? {
                    let n = wavelet_label(pr, gamma, &c);
                    let psis: Vec<_> = (1..p).map(|j| build_wavelet(gamma, &n, j, &g)).collect::<Result<_, _>>().map_err(err)?;
                    let phis: Vec<_> = (1..p)
                        .map(|b| build_phi(gamma, &c, b, &g, sign).map(|f| f.to_complex()))
                        .collect::<Result<_, _>>()
                        .map_err(err)?;
                    let fs: Vec<_> = (0..p)
                        .map(|a| build_f(gamma, &c, a, &g).map(|f| f.to_complex()))
                        .collect::<Result<_, _>>()
                        .map_err(err)?;
                    for a in 0..p {
                        worst = worst.max(f_from_wavelets(gamma, &c, a, &g).map_err(err)?.sup_distance(&fs[a as usize]).map_err(err)?);
                    }
                    let mut phi_via_psi = Vec::new();
                    for b in 1..p {
                        let bridged = phi_from_wavelets(gamma, &c, b, &g, sign).map_err(err)?;
                        worst = worst.max(bridged.sup_distance(&phis[b as usize - 1]).map_err(err)?);
                        phi_via_psi.push(bridged);
                    }
                    let mut psi_via_f = Vec::new();
                    let mut psi_via_phi = Vec::new();
                    for j in 1..p {
                        let from_f = wavelet_from_f(gamma, &n, j, &g).map_err(err)?;
                        let from_phi = wavelet_from_phi(gamma, &n, j, &g, sign).map_err(err)?;
                        worst = worst.max(from_f.sup_distance(&psis[j as usize - 1]).map_err(err)?);
                        worst = worst.max(from_phi.sup_distance(&psis[j as usize - 1]).map_err(err)?);
                        psi_via_f.push(from_f);
                        psi_via_phi.push(from_phi);
                    }
                    let combine = |coeffs: &[Complex64], fs: &[GridFunction<Complex64>]| {
                        let mut out = GridFunction::zeros(g.clone());
                        for (c, f) in coeffs.iter().zip(fs) {
                            out.axpy(c, f).expect("same grid");
                        }
                        out
                    };
                    // psi -> phi -> psi and phi -> psi -> phi.
                    for j in 0..(p - 1) as usize {
                        let back = combine(&to_psi[j], &phi_via_psi);
                        composed = composed.max(back.sup_distance(&psis[j]).map_err(err)?);
                    }
                    for b in 0..(p - 1) as usize {
                        let back = combine(&to_phi[b], &psi_via_phi);
                        composed = composed.max(back.sup_distance(&phis[b]).map_err(err)?);
                    }
                    // f -> psi -> f.
                    let scale = pr.powf(gamma as f64 / 2.0 - 1.0);
                    for a in 0..p {
                        let coeffs: Vec<Complex64> =
                            (1..p).map(|j| root_of_unity((p - (j * a) % p) % p, p) * scale).collect();
                        let back = combine(&coeffs, &psi_via_f);
                        composed = composed.max(back.sup_distance(&fs[a as usize]).map_err(err)?);
                    }
                    count += 1;
                }
            }
        }
    }
    ensure(worst <= 1e-10, || format!("bridge residual {worst:e}"))?;
    ensure(composed <= 1e-10, || format!("round-trip residual {composed:e}"))?;
    Ok(format!("{count} balls, bridge residual {worst:.2e}, composed round trips {composed:.2e}"))
}

fn criterion_8() -> Outcome {
    let mut rng = StdRng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut count = 0;
    for (p, r, l) in [(2, 1, -3), (3, 1, -2), (5, 0, -2), (7, 1, 0), (3, 2, -1)] {
        let g = grid(p, r, l);
        let pr = prime(p);
        for trial in 0..4 {
            let gamma_max = r - (trial % 2);
            let mut spec = KernelSpec::new(pr, l - 1, gamma_max).map_err(err)?;
            for gamma in l - 1..=gamma_max {
                spec.set_default(gamma, RealValue::Exact(random_rational(&mut rng))).map_err(err)?;
                if gamma > l {
                    for _ in 0..3 {
                        let n = g.ball_label(rng.gen_range(0..g.len()), gamma);
                        let value = if trial == 3 {
                            RealValue::Float(rng.gen_range(-2.0..2.0))
                        } else {
                            RealValue::Exact(random_rational(&mut rng))
                        };
                        spec.set_override(gamma, n, value).map_err(err)?;
                    }
                }
            }
            let k = kernel_matrix(&g, &spec, Backend::float()).map_err(err)?;
            for (e, psi) in enumerate_wavelet_basis(&g).iter() {
                let lambda = match e.kind {
                    BasisKind::Constant => 0.0,
                    _ => kernel_eigenvalue(e.gamma, &e.offset, &spec).map_err(err)?.to_f64(),
                };
                let res = k.apply(psi).map_err(err)?.sup_distance(&psi.scale(&Complex64::new(lambda, 0.0))).map_err(err)?;
                worst = worst.max(res);
                count += 1;
            }
        }
    }
    ensure(worst <= 1e-10, || format!("kernel wavelet residual {worst:e}"))?;

    // Vladimirov-equivalent spec: the eigenvalue with cutoff G differs from
    // -p^(-alpha(gamma-1)) by the boundary term at G, which vanishes as G grows.
    let mut limits = Vec::new();
    for (p, alpha, gamma) in [(2, 1, 1), (2, 2, 0), (3, 1, 2), (5, 2, -1)] {
        let pr = prime(p);
        let target = vladimirov_eigenvalue_qp(pr, gamma, Alpha::Int(alpha));
        let mut previous = None;
        for cutoff in gamma..gamma + 40 {
            let spec = KernelSpec::vladimirov(pr, Alpha::Int(alpha), gamma - 3, cutoff).map_err(err)?;
            let lambda = kernel_eigenvalue(gamma, &q(0, 1), &spec).map_err(err)?;
            let tail = lambda.clone() - target.clone();
            ensure(tail == boundary_term(pr, cutoff, Alpha::Int(alpha)), || format!("tail mismatch at cutoff {cutoff}"))?;
            if let Some(prev) = previous {
                ensure(tail.to_f64() < prev, || "tail does not decrease".into())?;
            }
            previous = Some(tail.to_f64());
        }
        let last = previous.unwrap_or(f64::NAN);
        ensure(last < 1e-10, || format!("tail {last:e} after 40 scales"))?;
        limits.push(format!("{}", target));
    }
    let example = vladimirov_eigenvalue_qp(prime(2), 1, Alpha::Int(1));
    ensure(example == RealValue::Exact(-BigRational::one()), || format!("p=2, alpha=1, gamma=1 gives {example}"))?;
    Ok(format!("{count} wavelet identities, max residual {worst:.2e}; cutoff limits {}", limits.join(", ")))
}

fn criterion_9() -> Outcome {
    let times = [0.0, 0.5, 1.0, 2.0, 10.0];
    let mut rng = StdRng::seed_from_u64(9);
    let (mut gap, mut mass) = (0.0f64, 0.0f64);
    for (p, r, l) in [(2, 1, -5), (3, 1, -3), (5, 1, -1), (7, 0, -2), (2, 2, 0)] {
        let g = grid(p, r, l);
        let pr = prime(p);
        let mut ops = vec![
            OperatorDescriptor::Vladimirov { alpha: Alpha::Int(1) },
            OperatorDescriptor::Vladimirov { alpha: Alpha::Int(2) },
            OperatorDescriptor::Vladimirov { alpha: Alpha::Real(0.5) },
        ];
        let mut spec = KernelSpec::new(pr, l + 1, r).map_err(err)?;
        for gamma in l + 1..=r {
            spec.set_default(gamma, RealValue::Exact(q(rng.gen_range(1..6), rng.gen_range(1..6)))).map_err(err)?;
        }
        ops.push(OperatorDescriptor::Kernel { spec });
        for op in &ops {
            for _ in 0..3 {
                let f0 = random_real(&g, &mut rng);
                let a = solve_spectral(&g, op, &f0, &times).map_err(err)?;
                let b = solve_oracle(&g, op, &f0, &times).map_err(err)?;
                gap = gap.max(max_snapshot_gap(&a, &b).map_err(err)?);
                let m0 = f0.integrate();
                mass = mass.max(a.masses().iter().map(|m| (m - m0).norm()).fold(0.0, f64::max));
            }
        }
    }
    ensure(gap <= 1e-8, || format!("spectral vs oracle gap {gap:e}"))?;
    ensure(mass <= 1e-10, || format!("mass drift {mass:e}"))?;

    let g = grid(2, 1, 0);
    let omega = GridFunction::<QuadScalar>::omega(g.clone()).map_err(err)?;
    let run = solve_spectral(&g, &OperatorDescriptor::Vladimirov { alpha: Alpha::Int(1) }, &omega, &times).map_err(err)?;
    let series = survival_series(&run, &Region::Ball { centre: q(0, 1), gamma: 0 }).map_err(err)?;
    let mut closed = 0.0f64;
    for (t, s) in series {
        closed = closed.max((s - (0.5 + 0.5 * (-2.0 * t / 3.0).exp())).abs());
    }
    ensure(closed <= 1e-12, || format!("closed-form survival gap {closed:e}"))?;
    Ok(format!("oracle gap {gap:.2e}, mass drift {mass:.2e}, 1/2 + e^(-2t/3)/2 matched to {closed:.2e}"))
}

fn criterion_10() -> Outcome {
    let mut count = 0;
    for p in [2, 3, 5] {
        let pr = prime(p);
        for alpha in [1u32, 2] {
            let factor = pr.pow(-(alpha as i64));
            for gamma in [-1, 0, 1] {
                let target = vladimirov_eigenvalue_qp(pr, gamma, Alpha::Int(alpha));
                let mut previous: Option<BigRational> = None;
                for r in 1..=6 {
                    if gamma > r {
                        continue;
                    }
                    let lambda = vladimirov_eigenvalue_br(pr, r, gamma, Alpha::Int(alpha)).map_err(err)?;
                    let gap = (lambda - target.clone()).exact().cloned().ok_or("inexact eigenvalue")?;
                    let expected = boundary_term(pr, r, Alpha::Int(alpha)).exact().cloned().ok_or("inexact boundary term")?;
                    ensure(gap == expected, || format!("gap {gap} != {expected} at p={p} alpha={alpha} r={r}"))?;
                    if let Some(prev) = previous {
                        ensure(&gap / &prev == factor, || format!("decay ratio {} at r={r}", &gap / &prev))?;
                    }
                    previous = Some(gap);
                    count += 1;
                }
            }
        }
    }
    let gap6 = boundary_term(prime(2), 6, Alpha::Int(1)).to_f64();
    Ok(format!("{count} exact gaps, ratio p^(-alpha) at every step; p=2, alpha=1, r=6 gap {gap6:.6}"))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "exact orthonormality of the phi basis", criterion_1),
        (2, "exact Vladimirov eigen-identities", criterion_2),
        (3, "character spectrum", criterion_3),
        (4, "Fourier unitarity, inversion and support duality", criterion_4),
        (5, "convolution and product theorems", criterion_5),
        (6, "Omega expansion", criterion_6),
        (7, "wavelet bridge", criterion_7),
        (8, "kernel operators", criterion_8),
        (9, "Cauchy solutions", criterion_9),
        (10, "convergence to the Q_p spectrum", criterion_10),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, name, run) in criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n:>2}: PASS  {name} ({detail}) [{secs:.2}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2}: FAIL  {name} ({detail}) [{secs:.2}s]");
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
