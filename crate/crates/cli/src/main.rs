//! `padic`: command-line front end for the p-adic spectral toolkit.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 I/O error.

mod commands;
mod config;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{BasisArgs, EvolveArgs, WaveletArgs};
use config::{Flags, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "padic", version, about = "Spectral analysis of p-adic operators on finite windows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the invariant suite on one window and report residuals.
    Verify,
    /// Tabulate eigenvalues over the phi basis.
    Spectrum,
    /// Dump a basis with its values on the grid.
    Basis(BasisArgs),
    /// Fourier transform of a function file, or inverse of a spectrum file.
    Fourier,
    /// Apply the operator to a function.
    Apply,
    /// Solve the Cauchy problem and write snapshots or a survival curve.
    Evolve(EvolveArgs),
    /// Build one wavelet, or the whole wavelet basis.
    Wavelet(WaveletArgs),
}

#[derive(Debug)]
pub enum Failure {
    Verify(String),
    Config(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verify(_) => 1,
            Failure::Config(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Verify(m) => write!(f, "verification failed: {m}"),
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<padic_spectral::Error> for Failure {
    fn from(e: padic_spectral::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = RunConfig::resolve(&cli.flags)?;
    match &cli.command {
        Command::Verify => commands::verify(&cfg),
        Command::Spectrum => commands::spectrum(&cfg),
        Command::Basis(args) => commands::basis(&cfg, args),
        Command::Fourier => commands::fourier(&cfg),
        Command::Apply => commands::apply(&cfg),
        Command::Evolve(args) => commands::evolve(&cfg, args),
        Command::Wavelet(args) => commands::wavelet(&cfg, args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("padic: {f}");
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_failure_kind() {
        assert_eq!(Failure::Verify(String::new()).code(), 1);
        assert_eq!(Failure::Config(String::new()).code(), 2);
        assert_eq!(Failure::Io(String::new()).code(), 3);
        assert_eq!(Failure::from(padic_spectral::Error::NotPrime(4)).code(), 2);
    }

    #[test]
    fn negative_window_flags_parse() {
        let cli = Cli::try_parse_from(["padic", "spectrum", "--p", "3", "--r", "-1", "--l", "-3", "--k-sign", "-"]).unwrap();
        assert_eq!((cli.flags.r, cli.flags.l), (Some(-1), Some(-3)));
        assert_eq!(cli.flags.k_sign.as_deref(), Some("-"));
    }
}
