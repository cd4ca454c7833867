//! Run configuration: command-line flags layered over an optional JSON file.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use serde::Deserialize;
use serde_json::Value;

use padic_spectral::io::{function_from_json, kernel_from_json, AnyFunction};
use padic_spectral::operators::{Alpha, KernelSpec};
use padic_spectral::padic::{parse_rational, CosetGrid, Prime};
use padic_spectral::scalars::{Backend, KSign};
use padic_spectral::function_space::GridFunction;
use padic_spectral::scalars::QuadScalar;
use num::rational::BigRational;

use crate::Failure;

#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// JSON config file; flags given on the command line take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub p: Option<u64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub r: Option<i32>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub l: Option<i32>,
    /// Operator order: integer, decimal or fraction such as 1/2.
    #[arg(long, global = true)]
    pub alpha: Option<String>,
    /// exact | float
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// Sign in k = -1 +- sqrt(p): + or -.
    #[arg(long = "k-sign", global = true, allow_hyphen_values = true)]
    pub k_sign: Option<String>,
    /// Kernel spec file; replaces the Vladimirov operator.
    #[arg(long, global = true)]
    pub kernel: Option<PathBuf>,
    /// Input function file, or a builtin: `omega` (indicator of Z_p), `one`.
    #[arg(long, global = true)]
    pub f0: Option<String>,
    /// Comma-separated, strictly increasing, nonnegative times.
    #[arg(long, global = true)]
    pub times: Option<String>,
    /// Output path; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// csv | json | svg
    #[arg(long, global = true)]
    pub format: Option<String>,
}

/// Keys of the config file. Relative paths resolve against the file's directory.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    p: Option<u64>,
    r: Option<i32>,
    l: Option<i32>,
    alpha: Option<Value>,
    backend: Option<String>,
    k_sign: Option<String>,
    kernel: Option<PathBuf>,
    f0: Option<String>,
    times: Option<Times>,
    out: Option<PathBuf>,
    format: Option<String>,
    pub kind: Option<String>,
    pub gamma: Option<i32>,
    pub n: Option<String>,
    pub j: Option<u64>,
    pub via: Option<String>,
    pub region_centre: Option<String>,
    pub region_gamma: Option<i32>,
}

#[derive(Deserialize, Debug)]
#[serde(untagged)]
enum Times {
    List(Vec<f64>),
    Text(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    fn parse(s: &str) -> Result<Self, Failure> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" | "svg-plot" => Ok(Format::Svg),
            other => Err(Failure::Config(format!("unknown format '{other}' (expected csv, json or svg)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }
}

/// Initial data: a loaded file or a builtin evaluated on the run grid.
#[derive(Clone, Debug)]
pub enum Input {
    File(AnyFunction),
    Spectrum(PathBuf, String),
    Omega,
    One,
}

/// Validated configuration shared by every command.
#[derive(Debug)]
pub struct RunConfig {
    pub p: Option<u64>,
    pub r: Option<i32>,
    pub l: Option<i32>,
    pub alpha: Alpha,
    pub backend: Backend,
    pub sign: KSign,
    pub kernel: Option<KernelSpec>,
    pub input: Option<Input>,
    pub times: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    format: Option<Format>,
    pub extra: FileConfig,
}

pub fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn parse_sign(s: &str) -> Result<KSign, Failure> {
    match s.trim() {
        "+" | "plus" | "+1" => Ok(KSign::Plus),
        "-" | "\u{2212}" | "minus" | "-1" => Ok(KSign::Minus),
        other => Err(Failure::Config(format!("invalid k-sign '{other}' (expected + or -)"))),
    }
}

fn parse_backend(s: &str) -> Result<Backend, Failure> {
    match s.trim() {
        "exact" => Ok(Backend::ExactQuad),
        "float" => Ok(Backend::float()),
        other => Err(Failure::Config(format!("invalid backend '{other}' (expected exact or float)"))),
    }
}

fn parse_times(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|_| Failure::Config(format!("invalid time '{}'", t.trim()))))
        .collect()
}

fn alpha_text(v: &Value) -> Result<String, Failure> {
    match v {
        Value::Number(n) => Ok(n.to_string()),
        Value::String(s) => Ok(s.clone()),
        other => Err(Failure::Config(format!("alpha must be a number or string, got {other}"))),
    }
}

fn load_input(spec: &str) -> Result<Input, Failure> {
    match spec {
        "omega" => return Ok(Input::Omega),
        "one" => return Ok(Input::One),
        _ => {}
    }
    let path = PathBuf::from(spec);
    let text = read_text(&path)?;
    let kind = serde_json::from_str::<Value>(&text)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        .get("kind")
        .and_then(Value::as_str)
        .map(str::to_owned);
    if kind.as_deref() == Some("spectrum") {
        return Ok(Input::Spectrum(path, text));
    }
    function_from_json(&text).map(Input::File).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> Result<Self, Failure> {
        let (file, base) = match &flags.config {
            Some(path) => {
                let text = read_text(path)?;
                let file: FileConfig =
                    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
                (file, path.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (FileConfig::default(), PathBuf::new()),
        };
        let rebase = |p: &PathBuf| if p.is_relative() { base.join(p) } else { p.clone() };

        let alpha = match (&flags.alpha, &file.alpha) {
            (Some(s), _) => s.clone(),
            (None, Some(v)) => alpha_text(v)?,
            (None, None) => "1".into(),
        };
        let alpha = Alpha::parse(&alpha)?;
        let backend = parse_backend(flags.backend.as_deref().or(file.backend.as_deref()).unwrap_or("exact"))?;
        let sign = parse_sign(flags.k_sign.as_deref().or(file.k_sign.as_deref()).unwrap_or("+"))?;
        let kernel = match flags.kernel.clone().or_else(|| file.kernel.as_ref().map(rebase)) {
            Some(path) => {
                let text = read_text(&path)?;
                Some(kernel_from_json(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?)
            }
            None => None,
        };
        let input = match (&flags.f0, &file.f0) {
            (Some(s), _) => Some(load_input(s)?),
            (None, Some(s)) if s == "omega" || s == "one" => Some(load_input(s)?),
            (None, Some(s)) => Some(load_input(&rebase(&PathBuf::from(s)).to_string_lossy())?),
            (None, None) => None,
        };
        let times = match (&flags.times, &file.times) {
            (Some(s), _) => Some(parse_times(s)?),
            (None, Some(Times::Text(s))) => Some(parse_times(s)?),
            (None, Some(Times::List(v))) => Some(v.clone()),
            (None, None) => None,
        };
        let out = flags.out.clone().or_else(|| file.out.as_ref().map(rebase));
        let format = flags.format.as_deref().or(file.format.as_deref()).map(Format::parse).transpose()?;
        let p = flags.p.or(file.p);
        if let Some(p) = p {
            Prime::new(p)?;
        }
        Ok(RunConfig {
            p,
            r: flags.r.or(file.r),
            l: flags.l.or(file.l),
            alpha,
            backend,
            sign,
            kernel,
            input,
            times,
            out,
            format,
            extra: file,
        })
    }

    /// Explicit format, else the output file's extension, else `default`.
    pub fn format(&self, default: Format) -> Result<Format, Failure> {
        if let Some(f) = self.format {
            return Ok(f);
        }
        match self.out.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some(ext) => Format::parse(ext).or(Ok(default)),
            None => Ok(default),
        }
    }

    /// The window from p, r, l, reconciled with the input file's grid.
    pub fn grid(&self) -> Result<Arc<CosetGrid>, Failure> {
        let from_file = match &self.input {
            Some(Input::File(f)) => Some(f.grid().clone()),
            _ => None,
        };
        if let Some(g) = &from_file {
            let clash = self.p.is_some_and(|p| p != g.prime().get())
                || self.r.is_some_and(|r| r != g.r())
                || self.l.is_some_and(|l| l != g.l());
            if clash {
                return Err(Failure::Config(format!(
                    "input lives on (p={}, r={}, l={}), which contradicts the configured window",
                    g.prime().get(),
                    g.r(),
                    g.l()
                )));
            }
            return Ok(g.clone());
        }
        let missing = |name: &str| Failure::Config(format!("missing --{name}"));
        let p = Prime::new(self.p.ok_or_else(|| missing("p"))?)?;
        let r = self.r.ok_or_else(|| missing("r"))?;
        let l = self.l.ok_or_else(|| missing("l"))?;
        Ok(CosetGrid::shared(p, r, l)?)
    }

    /// The input as an exact function when possible, on `grid`.
    pub fn exact_input(&self, grid: &Arc<CosetGrid>) -> Result<Option<GridFunction<QuadScalar>>, Failure> {
        Ok(match &self.input {
            Some(Input::File(AnyFunction::Exact(f))) => Some(f.clone()),
            Some(Input::Omega) => Some(GridFunction::omega(grid.clone())?),
            Some(Input::One) => Some(GridFunction::constant(grid.clone(), QuadScalar::from_integer(1))),
            _ => None,
        })
    }

    pub fn require_times(&self) -> Result<&[f64], Failure> {
        self.times.as_deref().ok_or_else(|| Failure::Config("missing --times".into()))
    }

    pub fn rational(&self, name: &str, value: Option<&String>) -> Result<Option<BigRational>, Failure> {
        value
            .map(|s| parse_rational(s).map_err(|e| Failure::Config(format!("{name}: {e}"))))
            .transpose()
    }
}
