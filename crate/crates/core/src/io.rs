//! File formats: grid functions, spectra, kernel specs, basis dumps,
//! time series and a small SVG plotter.
//!
//! JSON floats use the shortest representation that parses back to the
//! same bits. CSV floats are written with 17 significant digits.

use std::fmt::Write as _;
use std::sync::Arc;

use num::complex::Complex64;
use num::rational::BigRational;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bases::{BasisElement, BasisSet};
use crate::error::{Error, Result};
use crate::fourier::{FrequencyGrid, Spectrum};
use crate::function_space::GridFunction;
use crate::operators::{KernelSpec, RealValue};
use crate::padic::{parse_rational, CosetGrid, Prime};
use crate::scalars::{QuadScalar, Scalar};

/// A grid function in either backend.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyFunction {
    Exact(GridFunction<QuadScalar>),
    Float(GridFunction<Complex64>),
}

impl AnyFunction {
    pub fn grid(&self) -> &Arc<CosetGrid> {
        match self {
            AnyFunction::Exact(f) => f.grid(),
            AnyFunction::Float(f) => f.grid(),
        }
    }

    pub fn to_complex(&self) -> GridFunction<Complex64> {
        match self {
            AnyFunction::Exact(f) => f.to_complex(),
            AnyFunction::Float(f) => f.clone(),
        }
    }
}

/// `f64` rendered with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Serialize, Deserialize)]
struct FunctionFile {
    kind: String,
    p: u64,
    r: i32,
    l: i32,
    backend: String,
    values: Vec<[Value; 2]>,
}

fn quad_pair(v: &QuadScalar) -> [Value; 2] {
    [Value::String(v.a().to_string()), Value::String(v.b().to_string())]
}

fn complex_pair(z: &Complex64) -> [Value; 2] {
    [float_value(z.re), float_value(z.im)]
}

fn float_value(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

fn value_f64(v: &Value) -> Result<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| Error::Format(format!("bad number {n}"))),
        Value::String(s) => s.trim().parse().map_err(|_| Error::Format(format!("bad number '{s}'"))),
        _ => Err(Error::Format(format!("expected a number, got {v}"))),
    }
}

fn value_rational(v: &Value) -> Result<BigRational> {
    match v {
        Value::String(s) => parse_rational(s),
        Value::Number(n) if n.is_i64() => Ok(BigRational::from_integer(n.as_i64().unwrap_or(0).into())),
        _ => Err(Error::Format(format!("expected a rational string, got {v}"))),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn from_json<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
}

/// `{kind: "function", p, r, l, backend, values}`; exact values are
/// `[a, b]` for `a + b sqrt p` as rational strings, float values `[re, im]`.
pub fn function_to_json(f: &AnyFunction) -> String {
    let g = f.grid();
    let (backend, values) = match f {
        AnyFunction::Exact(f) => ("exact", f.values().iter().map(quad_pair).collect()),
        AnyFunction::Float(f) => ("float", f.values().iter().map(complex_pair).collect()),
    };
    to_json(&FunctionFile {
        kind: "function".into(),
        p: g.prime().get(),
        r: g.r(),
        l: g.l(),
        backend: backend.into(),
        values,
    })
}

pub fn function_from_json(text: &str) -> Result<AnyFunction> {
    let file: FunctionFile = from_json(text)?;
    if file.kind != "function" {
        return Err(Error::Format(format!("expected a function file, found kind '{}'", file.kind)));
    }
    let p = Prime::new(file.p)?;
    let grid = CosetGrid::shared(p, file.r, file.l)?;
    match file.backend.as_str() {
        "exact" => {
            let values = file
                .values
                .iter()
                .map(|[a, b]| Ok(QuadScalar::new(value_rational(a)?, value_rational(b)?, p)))
                .collect::<Result<Vec<_>>>()?;
            Ok(AnyFunction::Exact(GridFunction::new(grid, values)?))
        }
        "float" => {
            let values = file
                .values
                .iter()
                .map(|[a, b]| Ok(Complex64::new(value_f64(a)?, value_f64(b)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(AnyFunction::Float(GridFunction::new(grid, values)?))
        }
        other => Err(Error::Format(format!("unknown backend '{other}'"))),
    }
}

#[derive(Serialize, Deserialize)]
struct SpectrumFile {
    kind: String,
    role: String,
    p: u64,
    r: i32,
    l: i32,
    frequencies: Vec<String>,
    values: Vec<[Value; 2]>,
}

/// `{kind: "spectrum", role: "frequencies", ...}`: values indexed by the
/// frequency grid dual to `(r, l)`, frequencies listed as rational strings.
pub fn spectrum_to_json(s: &Spectrum) -> String {
    let f = s.frequencies();
    to_json(&SpectrumFile {
        kind: "spectrum".into(),
        role: "frequencies".into(),
        p: f.prime().get(),
        r: f.r(),
        l: f.l(),
        frequencies: f.frequencies().iter().map(ToString::to_string).collect(),
        values: s.values().iter().map(complex_pair).collect(),
    })
}

pub fn spectrum_from_json(text: &str) -> Result<Spectrum> {
    let file: SpectrumFile = from_json(text)?;
    if file.kind != "spectrum" || file.role != "frequencies" {
        return Err(Error::Format("expected a spectrum file with role 'frequencies'".into()));
    }
    let freq = FrequencyGrid::new(Prime::new(file.p)?, file.r, file.l)?;
    let values = file
        .values
        .iter()
        .map(|[a, b]| Ok(Complex64::new(value_f64(a)?, value_f64(b)?)))
        .collect::<Result<Vec<_>>>()?;
    Spectrum::new(Arc::new(freq), values)
}

#[derive(Serialize, Deserialize)]
struct KernelFile {
    p: u64,
    gamma_min: i32,
    gamma_max: i32,
    scales: Vec<ScaleEntry>,
}

#[derive(Serialize, Deserialize)]
struct ScaleEntry {
    gamma: i32,
    default: Value,
    #[serde(default)]
    overrides: Vec<OverrideEntry>,
}

#[derive(Serialize, Deserialize)]
struct OverrideEntry {
    n: String,
    value: Value,
}

fn real_value(v: &Value) -> Result<RealValue> {
    match v {
        Value::String(s) => RealValue::parse(s),
        Value::Number(n) if n.is_i64() => Ok(RealValue::Exact(BigRational::from_integer(n.as_i64().unwrap_or(0).into()))),
        Value::Number(n) => Ok(RealValue::Float(n.as_f64().unwrap_or(f64::NAN))),
        _ => Err(Error::Format(format!("expected a real value, got {v}"))),
    }
}

fn real_to_value(v: &RealValue) -> Value {
    match v {
        RealValue::Exact(q) => Value::String(q.to_string()),
        RealValue::Float(x) => float_value(*x),
    }
}

/// Kernel spec: `{p, gamma_min, gamma_max, scales: [{gamma, default,
/// overrides: [{n, value}]}]}`; values are rational strings or numbers.
pub fn kernel_from_json(text: &str) -> Result<KernelSpec> {
    let file: KernelFile = from_json(text)?;
    let mut spec = KernelSpec::new(Prime::new(file.p)?, file.gamma_min, file.gamma_max)?;
    for s in &file.scales {
        spec.set_default(s.gamma, real_value(&s.default)?)?;
        for o in &s.overrides {
            spec.set_override(s.gamma, parse_rational(&o.n)?, real_value(&o.value)?)?;
        }
    }
    Ok(spec)
}

pub fn kernel_to_json(spec: &KernelSpec) -> String {
    to_json(&KernelFile {
        p: spec.prime().get(),
        gamma_min: spec.gamma_min(),
        gamma_max: spec.gamma_max(),
        scales: spec
            .scales()
            .iter()
            .map(|(&gamma, s)| ScaleEntry {
                gamma,
                default: real_to_value(&s.default),
                overrides: s
                    .overrides
                    .iter()
                    .map(|(n, v)| OverrideEntry { n: n.to_string(), value: real_to_value(v) })
                    .collect(),
            })
            .collect(),
    })
}

#[derive(Serialize, Deserialize)]
struct BasisRecord {
    kind: String,
    gamma: i32,
    n: String,
    label: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    eigenvalue: Option<Value>,
    values: Vec<[Value; 2]>,
}

#[derive(Serialize, Deserialize)]
struct BasisFile {
    kind: String,
    p: u64,
    r: i32,
    l: i32,
    backend: String,
    records: Vec<BasisRecord>,
}

fn record<S>(e: &BasisElement, f: &GridFunction<S>, pair: impl Fn(&S) -> [Value; 2]) -> BasisRecord
where
    S: Scalar,
{
    BasisRecord {
        kind: e.kind.name().into(),
        gamma: e.gamma,
        n: e.offset.to_string(),
        label: e.label,
        eigenvalue: e.eigenvalue.as_ref().map(real_to_value),
        values: f.values().iter().map(pair).collect(),
    }
}

fn basis_file<S: Scalar>(basis: &BasisSet<S>, backend: &str, pair: impl Fn(&S) -> [Value; 2]) -> String {
    let g = basis.grid();
    to_json(&BasisFile {
        kind: "basis".into(),
        p: g.prime().get(),
        r: g.r(),
        l: g.l(),
        backend: backend.into(),
        records: basis.iter().map(|(e, f)| record(e, f, &pair)).collect(),
    })
}

pub fn basis_to_json_exact(basis: &BasisSet<QuadScalar>) -> String {
    basis_file(basis, "exact", quad_pair)
}

pub fn basis_to_json_float(basis: &BasisSet<Complex64>) -> String {
    basis_file(basis, "float", complex_pair)
}

/// One row per basis element: descriptor, eigenvalue, then real parts of
/// the values (and imaginary parts when any are nonzero).
pub fn basis_to_csv<S: Scalar>(basis: &BasisSet<S>) -> String {
    let g = basis.grid();
    let complex = basis.functions().iter().any(|f| f.values().iter().any(|v| v.to_complex().im != 0.0));
    let mut out = String::from("kind,gamma,n,label,eigenvalue");
    for x in g.representatives() {
        let _ = write!(out, ",re(x={x})");
        if complex {
            let _ = write!(out, ",im(x={x})");
        }
    }
    out.push('\n');
    for (e, f) in basis.iter() {
        let ev = e.eigenvalue.as_ref().map(ToString::to_string).unwrap_or_default();
        let _ = write!(out, "{},{},{},{},{}", e.kind, e.gamma, e.offset, e.label, ev);
        for v in f.values() {
            let z = v.to_complex();
            let _ = write!(out, ",{}", fmt_f64(z.re));
            if complex {
                let _ = write!(out, ",{}", fmt_f64(z.im));
            }
        }
        out.push('\n');
    }
    out
}

/// Header `t,x=...` with one column per coset; imaginary columns follow
/// when any snapshot is complex.
pub fn snapshots_to_csv(times: &[f64], snapshots: &[GridFunction<Complex64>]) -> String {
    let mut out = String::from("t");
    let Some(first) = snapshots.first() else {
        out.push('\n');
        return out;
    };
    let complex = snapshots.iter().any(|s| s.values().iter().any(|z| z.im != 0.0));
    for x in first.grid().representatives() {
        let _ = write!(out, ",x={x}");
    }
    if complex {
        for x in first.grid().representatives() {
            let _ = write!(out, ",im(x={x})");
        }
    }
    out.push('\n');
    for (t, s) in times.iter().zip(snapshots) {
        out.push_str(&fmt_f64(*t));
        for z in s.values() {
            let _ = write!(out, ",{}", fmt_f64(z.re));
        }
        if complex {
            for z in s.values() {
                let _ = write!(out, ",{}", fmt_f64(z.im));
            }
        }
        out.push('\n');
    }
    out
}

/// `t,s` rows.
pub fn series_to_csv(series: &[(f64, f64)]) -> String {
    let mut out = String::from("t,s\n");
    for (t, s) in series {
        let _ = writeln!(out, "{},{}", fmt_f64(*t), fmt_f64(*s));
    }
    out
}

/// Parses a header-plus-rows numeric CSV back into columns.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Format("empty CSV".into()))?
        .split(',')
        .map(str::to_owned)
        .collect();
    let rows = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|_| Error::Format(format!("bad CSV cell '{c}'"))))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}

/// A polyline plot of one or more `(x, y)` series.
pub fn svg_plot(title: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
    let points = series.iter().flat_map(|(_, s)| s.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 <= 0.0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#, W / 2.0, xml_escape(title));
    let _ = writeln!(
        out,
        r#"<path d="M{M} {M} L{M} {b} L{r} {b}" fill="none" stroke="black"/>"#,
        b = H - M,
        r = W - M
    );
    for (v, y) in [(y0, H - M), (y1, M)] {
        let _ = writeln!(out, r#"<text x="{}" y="{y}" text-anchor="end" font-family="sans-serif" font-size="10">{v:.4}</text>"#, M - 4.0);
    }
    for (v, x) in [(x0, M), (x1, W - M)] {
        let _ = writeln!(out, r#"<text x="{x}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="10">{v:.4}</text>"#, H - M + 14.0);
    }
    for (i, (name, s)) in series.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let pts: Vec<String> = s.iter().map(|&(x, y)| format!("{:.3},{:.3}", sx(x), sy(y))).collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#, pts.join(" "));
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{colour}">{}</text>"#,
            W - M + 4.0 - 120.0,
            M + 14.0 * (i as f64 + 1.0),
            xml_escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::enumerate_phi_basis;
    use crate::fourier::dft_forward;
    use crate::operators::Alpha;
    use crate::scalars::KSign;
    use proptest::prelude::*;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    fn grid(p: u64, r: i32, l: i32) -> Arc<CosetGrid> {
        CosetGrid::shared(Prime::new(p).unwrap(), r, l).unwrap()
    }

    #[test]
    fn exact_function_round_trip() {
        let g = grid(3, 1, -1);
        let p = Prime::new(3).unwrap();
        let f = GridFunction::from_fn(g.clone(), |m, x| QuadScalar::new(x.clone(), q(m as i64, 7), p));
        let text = function_to_json(&AnyFunction::Exact(f.clone()));
        assert_eq!(function_from_json(&text).unwrap(), AnyFunction::Exact(f));
        assert!(function_from_json("{}").is_err());
        assert!(function_from_json(&text.replace("\"exact\"", "\"other\"")).is_err());
    }

    #[test]
    fn spectrum_round_trip_and_role() {
        let g = grid(2, 1, -1);
        let f = GridFunction::from_fn(g, |m, _| Complex64::new(m as f64 * 0.1, -0.3));
        let s = dft_forward(&f);
        let text = spectrum_to_json(&s);
        assert!(text.contains("\"role\": \"frequencies\""));
        let back = spectrum_from_json(&text).unwrap();
        assert_eq!(back.values(), s.values());
        let as_function = text.replace("\"spectrum\"", "\"function\"");
        assert!(spectrum_from_json(&as_function).is_err());
        assert!(function_from_json(&text).is_err());
    }

    #[test]
    fn kernel_file() {
        let text = r#"{"p": 3, "gamma_min": 0, "gamma_max": 1,
            "scales": [{"gamma": 0, "default": "1/2", "overrides": [{"n": "2/3", "value": 0.25}]},
                       {"gamma": 1, "default": 2}]}"#;
        let spec = kernel_from_json(text).unwrap();
        assert_eq!(spec.coefficient(0, &q(0, 1)), RealValue::Exact(q(1, 2)));
        assert_eq!(spec.coefficient(0, &q(2, 3)), RealValue::Float(0.25));
        assert_eq!(spec.coefficient(1, &q(1, 3)), RealValue::Exact(q(2, 1)));
        assert_eq!(kernel_from_json(&kernel_to_json(&spec)).unwrap(), spec);
        let vlad = KernelSpec::vladimirov(Prime::new(2).unwrap(), Alpha::Int(1), -1, 2).unwrap();
        assert_eq!(kernel_from_json(&kernel_to_json(&vlad)).unwrap(), vlad);
        assert!(kernel_from_json(r#"{"p": 4, "gamma_min": 0, "gamma_max": 1, "scales": []}"#).is_err());
    }

    #[test]
    fn basis_dump() {
        let b = enumerate_phi_basis(&grid(2, 1, 0), KSign::Plus);
        let json = basis_to_json_exact(&b);
        let v: Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["records"].as_array().unwrap().len(), 2);
        assert_eq!(v["records"][1]["values"][1][1], Value::String("-1/2".into()));
        let csv = basis_to_csv(&b);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(2).unwrap().starts_with("phi,1,0,1,"));
    }

    #[test]
    fn csv_uses_17_digits() {
        let g = grid(2, 1, 0);
        let s = GridFunction::new(g, vec![Complex64::new(1.0 / 3.0, 0.0), Complex64::new(0.1, 0.0)]).unwrap();
        let csv = snapshots_to_csv(&[0.5], &[s.clone()]);
        assert_eq!(csv.lines().next().unwrap(), "t,x=0,x=1/2");
        let (_, rows) = parse_csv(&csv).unwrap();
        assert_eq!(rows[0][1], 1.0 / 3.0);
        assert_eq!(rows[0][2], 0.1);
        assert_eq!(series_to_csv(&[(0.0, 1.0)]), "t,s\n0.0000000000000000e0,1.0000000000000000e0\n");
    }

    #[test]
    fn svg_is_well_formed() {
        let svg = svg_plot("decay <test>", &[("s".into(), vec![(0.0, 1.0), (1.0, 0.5)]), ("flat".into(), vec![(0.0, 1.0)])]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("&lt;test&gt;"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg_plot("empty", &[]).contains("</svg>"));
    }

    proptest! {
        #[test]
        fn float_function_round_trip_is_bit_exact(values in proptest::collection::vec((-1e300f64..1e300, -1e-300f64..1e-300), 9)) {
            let g = grid(3, 0, -2);
            let f = GridFunction::new(g, values.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap();
            let text = function_to_json(&AnyFunction::Float(f.clone()));
            prop_assert_eq!(function_from_json(&text).unwrap(), AnyFunction::Float(f));
        }

        #[test]
        fn csv_round_trip_is_bit_exact(x in proptest::num::f64::NORMAL) {
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
