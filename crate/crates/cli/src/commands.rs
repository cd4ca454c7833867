//! One function per subcommand. Each builds its result as text and hands it
//! to [`emit`], which writes atomically or to standard output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use clap::Args;
use num::complex::Complex64;
use serde_json::{json, Value};
use tempfile::NamedTempFile;

use padic_spectral::bases::{
    build_wavelet, enumerate_character_basis, enumerate_f_family, enumerate_phi_basis, enumerate_phi_basis_qp,
    enumerate_wavelet_basis, wavelet_centre, wavelet_from_f, wavelet_from_phi, BasisKind, BasisSet,
};
use padic_spectral::evolution::{solve_spectral, survival_series, EvolutionRun, OperatorDescriptor, Region};
use padic_spectral::fourier::{dft_forward, dft_inverse, Spectrum};
use padic_spectral::function_space::GridFunction;
use padic_spectral::io::{
    basis_to_csv, basis_to_json_exact, basis_to_json_float, fmt_f64, function_to_json, series_to_csv,
    snapshots_to_csv, spectrum_from_json, spectrum_to_json, svg_plot, AnyFunction,
};
use padic_spectral::operators::{character_eigenvalue, RealValue};
use padic_spectral::padic::CosetGrid;
use padic_spectral::scalars::{QuadScalar, Scalar};
use padic_spectral::verify::{run_suite, VerifyConfig};

use crate::config::{Format, Input, RunConfig};
use crate::Failure;

#[derive(Args, Debug, Default)]
pub struct BasisArgs {
    /// phi | phi-qp | f | character | wavelet
    #[arg(long)]
    pub kind: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct WaveletArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<i32>,
    /// Canonical label n in [0, 1) with denominator a power of p.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub j: Option<u64>,
    /// direct | f | phi: build directly or through a change of basis.
    #[arg(long)]
    pub via: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct EvolveArgs {
    /// Centre of the ball whose surviving mass is reported.
    #[arg(long, allow_hyphen_values = true)]
    pub region_centre: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub region_gamma: Option<i32>,
}

pub fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    let Some(path) = out else {
        let mut stdout = std::io::stdout().lock();
        return stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).map_err(|e| Failure::Io(format!("stdout: {e}")));
    };
    let io = |e: std::io::Error| Failure::Io(format!("{}: {e}", path.display()));
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(text.as_bytes()).map_err(io)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644)).map_err(io)?;
    }
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn unsupported(cmd: &str, format: Format) -> Failure {
    Failure::Config(format!("{cmd} cannot write {} output", format.name()))
}

fn operator(cfg: &RunConfig) -> OperatorDescriptor {
    match &cfg.kernel {
        Some(spec) => OperatorDescriptor::Kernel { spec: spec.clone() },
        None => OperatorDescriptor::Vladimirov { alpha: cfg.alpha },
    }
}

/// Operator validated against the grid and the backend.
fn checked_operator(cfg: &RunConfig, grid: &CosetGrid) -> Result<OperatorDescriptor, Failure> {
    let op = operator(cfg);
    op.check(grid)?;
    if cfg.backend.is_exact() {
        match &op {
            OperatorDescriptor::Vladimirov { alpha } => {
                alpha.require_int()?;
            }
            OperatorDescriptor::Kernel { spec } if !spec.is_exact() => {
                return Err(Failure::Config("kernel has float coefficients; use --backend float".into()));
            }
            OperatorDescriptor::Kernel { .. } => {}
        }
    }
    Ok(op)
}

fn real_text(v: &RealValue, exact: bool) -> String {
    if exact {
        v.to_string()
    } else {
        fmt_f64(v.to_f64())
    }
}

fn real_json(v: &RealValue, exact: bool) -> Value {
    if exact {
        Value::String(v.to_string())
    } else {
        json!(v.to_f64())
    }
}

/// The input function, converted to floats in the float backend.
fn input_function(cfg: &RunConfig, grid: &Arc<CosetGrid>) -> Result<AnyFunction, Failure> {
    let f = match &cfg.input {
        None => return Err(Failure::Config("missing --f0".into())),
        Some(Input::Spectrum(path, _)) => {
            return Err(Failure::Config(format!("{} holds a spectrum, not a function", path.display())))
        }
        Some(Input::File(f)) => f.clone(),
        Some(_) => AnyFunction::Exact(cfg.exact_input(grid)?.expect("builtin input")),
    };
    Ok(if cfg.backend.is_exact() { f } else { AnyFunction::Float(f.to_complex()) })
}

fn function_csv(f: &AnyFunction) -> String {
    let xs = f.grid().representatives();
    let mut out = String::new();
    match f {
        AnyFunction::Exact(f) => {
            out.push_str("x,a,b\n");
            for (x, v) in xs.iter().zip(f.values()) {
                let _ = writeln!(out, "{x},{},{}", v.a(), v.b());
            }
        }
        AnyFunction::Float(f) => {
            out.push_str("x,re,im\n");
            for (x, z) in xs.iter().zip(f.values()) {
                let _ = writeln!(out, "{x},{},{}", fmt_f64(z.re), fmt_f64(z.im));
            }
        }
    }
    out
}

fn write_function(cfg: &RunConfig, cmd: &str, f: &AnyFunction) -> Result<(), Failure> {
    let text = match cfg.format(Format::Json)? {
        Format::Json => function_to_json(f),
        Format::Csv => function_csv(f),
        other => return Err(unsupported(cmd, other)),
    };
    emit(cfg.out.as_deref(), &text)
}

pub fn verify(cfg: &RunConfig) -> Result<(), Failure> {
    let grid = cfg.grid()?;
    let report = run_suite(&VerifyConfig {
        p: grid.prime(),
        r: grid.r(),
        l: grid.l(),
        alpha: cfg.alpha,
        backend: cfg.backend,
        sign: cfg.sign,
        kernel: cfg.kernel.clone(),
    })?;
    let text = match cfg.format(Format::Json)? {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report).expect("serializable report");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = String::from("name,passed,residual,tolerance,detail\n");
            for r in &report.results {
                let detail = r.detail.replace(',', ";");
                let _ = writeln!(s, "{},{},{},{},{detail}", r.name, r.passed, fmt_f64(r.residual), fmt_f64(r.tolerance));
            }
            s
        }
        other => return Err(unsupported("verify", other)),
    };
    emit(cfg.out.as_deref(), &text)?;
    let failed: Vec<&str> = report.failures().map(|r| r.name.as_str()).collect();
    eprintln!("verify: {}/{} invariants passed", report.results.len() - failed.len(), report.results.len());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verify(format!("failed invariants: {}", failed.join(", "))))
    }
}

pub fn spectrum(cfg: &RunConfig) -> Result<(), Failure> {
    let grid = cfg.grid()?;
    let op = checked_operator(cfg, &grid)?;
    let exact = cfg.backend.is_exact();
    let basis = enumerate_phi_basis(&grid, cfg.sign);
    let mut rows = Vec::with_capacity(basis.len());
    for e in basis.elements() {
        let scale = (e.kind != BasisKind::Constant).then_some((e.gamma, &e.offset));
        rows.push((e, op.eigenvalue(&grid, scale)?));
    }
    let text = match cfg.format(Format::Csv)? {
        Format::Csv => {
            let mut s = String::from("kind,gamma,n,b,eigenvalue\n");
            for (e, ev) in &rows {
                if e.kind == BasisKind::Constant {
                    let _ = writeln!(s, "constant,,,,{}", real_text(ev, exact));
                } else {
                    let _ = writeln!(s, "{},{},{},{},{}", e.kind, e.gamma, e.offset, e.label, real_text(ev, exact));
                }
            }
            s
        }
        Format::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|(e, ev)| {
                    if e.kind == BasisKind::Constant {
                        json!({"kind": "constant", "eigenvalue": real_json(ev, exact)})
                    } else {
                        json!({
                            "kind": e.kind.name(),
                            "gamma": e.gamma,
                            "n": e.offset.to_string(),
                            "b": e.label,
                            "eigenvalue": real_json(ev, exact),
                        })
                    }
                })
                .collect();
            let doc = json!({
                "kind": "eigenvalues",
                "p": grid.prime().get(),
                "r": grid.r(),
                "l": grid.l(),
                "operator": describe(&op),
                "backend": cfg.backend.name(),
                "rows": rows,
            });
            pretty(&doc)
        }
        other => return Err(unsupported("spectrum", other)),
    };
    emit(cfg.out.as_deref(), &text)
}

fn describe(op: &OperatorDescriptor) -> String {
    match op {
        OperatorDescriptor::Vladimirov { alpha } => format!("vladimirov(alpha={alpha})"),
        OperatorDescriptor::Kernel { spec } => {
            format!("kernel(gamma in {}..={})", spec.gamma_min(), spec.gamma_max())
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Fills eigenvalues of `op` into a basis whose elements are eigenfunctions.
fn annotate<S: Scalar>(basis: &mut BasisSet<S>, op: &OperatorDescriptor, cfg: &RunConfig) -> Result<(), Failure> {
    let grid = basis.grid().clone();
    let p = grid.prime();
    for e in basis.elements_mut() {
        e.eigenvalue = match e.kind {
            BasisKind::Constant => Some(RealValue::zero()),
            BasisKind::Phi => Some(op.eigenvalue(&grid, Some((e.gamma, &e.offset)))?),
            BasisKind::Psi => Some(op.eigenvalue(&grid, Some((e.gamma, &wavelet_centre(p, e.gamma, &e.offset))))?),
            BasisKind::Character if cfg.kernel.is_none() => Some(character_eigenvalue(p, grid.r(), &e.offset, cfg.alpha)),
            BasisKind::Character | BasisKind::F => None,
        };
    }
    Ok(())
}

pub fn basis(cfg: &RunConfig, args: &BasisArgs) -> Result<(), Failure> {
    let grid = cfg.grid()?;
    let op = operator(cfg);
    op.check(&grid)?;
    let kind = args.kind.as_deref().or(cfg.extra.kind.as_deref()).unwrap_or("phi");
    let exact = cfg.backend.is_exact();
    let format = cfg.format(Format::Json)?;
    if format == Format::Svg {
        return Err(unsupported("basis", format));
    }
    let quad = |mut b: BasisSet<QuadScalar>| -> Result<String, Failure> {
        annotate(&mut b, &op, cfg)?;
        Ok(match (format, exact) {
            (Format::Csv, _) => basis_to_csv(&b),
            (_, true) => basis_to_json_exact(&b),
            (_, false) => basis_to_json_float(&b.to_complex()),
        })
    };
    let complex = |mut b: BasisSet<Complex64>| -> Result<String, Failure> {
        annotate(&mut b, &op, cfg)?;
        Ok(if format == Format::Csv { basis_to_csv(&b) } else { basis_to_json_float(&b) })
    };
    let text = match kind {
        "phi" => quad(enumerate_phi_basis(&grid, cfg.sign))?,
        "phi-qp" => quad(enumerate_phi_basis_qp(&grid, cfg.sign))?,
        "f" => quad(enumerate_f_family(&grid))?,
        "character" => complex(enumerate_character_basis(&grid))?,
        "wavelet" => complex(enumerate_wavelet_basis(&grid))?,
        other => {
            return Err(Failure::Config(format!(
                "unknown basis kind '{other}' (expected phi, phi-qp, f, character or wavelet)"
            )))
        }
    };
    emit(cfg.out.as_deref(), &text)
}

fn spectrum_csv(s: &Spectrum) -> String {
    let mut out = String::from("k,re,im\n");
    for (k, z) in s.frequencies().frequencies().iter().zip(s.values()) {
        let _ = writeln!(out, "{k},{},{}", fmt_f64(z.re), fmt_f64(z.im));
    }
    out
}

/// Forward transform of a function, or inverse transform of a spectrum file.
pub fn fourier(cfg: &RunConfig) -> Result<(), Failure> {
    if let Some(Input::Spectrum(path, text)) = &cfg.input {
        let s = spectrum_from_json(text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        return write_function(cfg, "fourier", &AnyFunction::Float(dft_inverse(&s)));
    }
    let grid = cfg.grid()?;
    let s = match input_function(cfg, &grid)? {
        AnyFunction::Exact(f) => dft_forward(&f),
        AnyFunction::Float(f) => dft_forward(&f),
    };
    let text = match cfg.format(Format::Json)? {
        Format::Json => spectrum_to_json(&s),
        Format::Csv => spectrum_csv(&s),
        other => return Err(unsupported("fourier", other)),
    };
    emit(cfg.out.as_deref(), &text)
}

pub fn apply(cfg: &RunConfig) -> Result<(), Failure> {
    let grid = cfg.grid()?;
    let op = checked_operator(cfg, &grid)?;
    let f = input_function(cfg, &grid)?;
    let a = op.matrix(&grid, cfg.backend)?;
    let out = match &f {
        AnyFunction::Exact(f) => AnyFunction::Exact(a.apply(f)?),
        AnyFunction::Float(f) => AnyFunction::Float(a.apply(f)?),
    };
    write_function(cfg, "apply", &out)
}

fn region(cfg: &RunConfig, args: &EvolveArgs) -> Result<Option<Region>, Failure> {
    let centre = args.region_centre.as_ref().or(cfg.extra.region_centre.as_ref());
    let gamma = args.region_gamma.or(cfg.extra.region_gamma);
    match (cfg.rational("region-centre", centre)?, gamma) {
        (Some(centre), Some(gamma)) => Ok(Some(Region::Ball { centre, gamma })),
        (None, None) => Ok(None),
        _ => Err(Failure::Config("--region-centre and --region-gamma go together".into())),
    }
}

fn evolution_json(run: &EvolutionRun, op: &OperatorDescriptor, survival: Option<&[(f64, f64)]>) -> String {
    let pair = |z: &Complex64| json!([z.re, z.im]);
    let mut doc = json!({
        "kind": "evolution",
        "p": run.grid.prime().get(),
        "r": run.grid.r(),
        "l": run.grid.l(),
        "operator": describe(op),
        "times": run.times,
        "masses": run.masses().iter().map(pair).collect::<Vec<_>>(),
        "snapshots": run.snapshots.iter().map(|s| s.values().iter().map(pair).collect::<Vec<_>>()).collect::<Vec<_>>(),
    });
    if let Some(s) = survival {
        doc["survival"] = json!(s.iter().map(|(t, v)| json!([t, v])).collect::<Vec<_>>());
    }
    pretty(&doc)
}

pub fn evolve(cfg: &RunConfig, args: &EvolveArgs) -> Result<(), Failure> {
    let grid = cfg.grid()?;
    let op = checked_operator(cfg, &grid)?;
    let times = cfg.require_times()?;
    let run = match input_function(cfg, &grid)? {
        AnyFunction::Exact(f) => solve_spectral::<QuadScalar>(&grid, &op, &f, times)?,
        AnyFunction::Float(f) => solve_spectral::<Complex64>(&grid, &op, &f, times)?,
    };
    let survival = region(cfg, args)?.map(|r| survival_series(&run, &r)).transpose()?;
    let text = match cfg.format(Format::Csv)? {
        Format::Csv => match &survival {
            Some(s) => series_to_csv(s),
            None => snapshots_to_csv(&run.times, &run.snapshots),
        },
        Format::Json => evolution_json(&run, &op, survival.as_deref()),
        Format::Svg => {
            let title = format!("p={} r={} l={} {}", grid.prime().get(), grid.r(), grid.l(), describe(&op));
            let series = match survival {
                Some(s) => vec![("surviving mass".to_string(), s)],
                None => {
                    let d = run.distances_to_equilibrium();
                    vec![("distance to equilibrium".to_string(), run.times.iter().copied().zip(d).collect())]
                }
            };
            svg_plot(&title, &series)
        }
    };
    emit(cfg.out.as_deref(), &text)
}

pub fn wavelet(cfg: &RunConfig, args: &WaveletArgs) -> Result<(), Failure> {
    let grid = cfg.grid()?;
    let gamma = args.gamma.or(cfg.extra.gamma);
    let n = cfg.rational("n", args.n.as_ref().or(cfg.extra.n.as_ref()))?;
    let j = args.j.or(cfg.extra.j);
    let via = args.via.as_deref().or(cfg.extra.via.as_deref()).unwrap_or("direct");
    match (gamma, n, j) {
        (Some(gamma), Some(n), Some(j)) => {
            let psi: GridFunction<Complex64> = match via {
                "direct" => build_wavelet(gamma, &n, j, &grid)?,
                "f" => wavelet_from_f(gamma, &n, j, &grid)?,
                "phi" => wavelet_from_phi(gamma, &n, j, &grid, cfg.sign)?,
                other => return Err(Failure::Config(format!("unknown --via '{other}' (expected direct, f or phi)"))),
            };
            write_function(cfg, "wavelet", &AnyFunction::Float(psi))
        }
        (None, None, None) => {
            if via != "direct" {
                return Err(Failure::Config("--via needs --gamma, --n and --j".into()));
            }
            let op = operator(cfg);
            op.check(&grid)?;
            let mut b = enumerate_wavelet_basis(&grid);
            annotate(&mut b, &op, cfg)?;
            let text = match cfg.format(Format::Json)? {
                Format::Json => basis_to_json_float(&b),
                Format::Csv => basis_to_csv(&b),
                other => return Err(unsupported("wavelet", other)),
            };
            emit(cfg.out.as_deref(), &text)
        }
        _ => Err(Failure::Config("--gamma, --n and --j go together".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_existing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        emit(Some(&path), "first").unwrap();
        emit(Some(&path), "second").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn missing_directory_is_an_io_failure() {
        let dir = tempfile::tempdir().unwrap();
        let err = emit(Some(&dir.path().join("absent/out.txt")), "x").unwrap_err();
        assert!(matches!(err, Failure::Io(_)));
    }
}
