//! Command-line front end: problem files in, CSV and JSON artifacts out.
//!
//! Exit codes: 0 success, 2 a check that ran and came out negative (for
//! example "no trichotomy"), 1 any other error.

mod commands;
mod problem;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use thiserror::Error;

use crate::hyperbolicity::HyperbolicityError;
use crate::rap::{RapError, Tail};
use crate::solvers::SolverError;

pub use commands::{run, Flags, RunOutcome};
pub use problem::{
    load_certificate, load_problem, parse_spec, CertificateSpec, Mode, Problem, ProblemSpec, RapSpec,
    ToleranceSpec,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NEGATIVE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    CheckDichotomy,
    CheckTrichotomy,
    SolveLinear,
    SolveSemilinear,
    ContinueEpsilon,
    ProbeC1,
    RapScan,
    Audit,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("schema violation at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("invalid problem at {pointer}: {message}")]
    Problem { pointer: String, message: String },
    #[error(transparent)]
    Hyperbolicity(#[from] HyperbolicityError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Rap(#[from] RapError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 2 for hyperbolicity or contraction conditions that were checked and
    /// fail, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use HyperbolicityError as H;
        let negative = |h: &H| matches!(h, H::NoDichotomy { .. } | H::NonHyperbolic { .. } | H::DecayViolated(_));
        match self {
            CliError::Hyperbolicity(h) => {
                if negative(h) {
                    EXIT_NEGATIVE
                } else {
                    EXIT_ERROR
                }
            }
            CliError::Solver(SolverError::Hyperbolicity(h)) if negative(h) => EXIT_NEGATIVE,
            CliError::Solver(SolverError::ContractionViolated { .. }) => EXIT_NEGATIVE,
            _ => EXIT_ERROR,
        }
    }

    /// Remediation hint, when one applies.
    pub fn hint(&self) -> Option<String> {
        match self {
            CliError::Solver(SolverError::WindowTooSmall { required, .. }) => {
                Some(format!("increase window T to >= {:.1}", required.ceil()))
            }
            CliError::Hyperbolicity(HyperbolicityError::IntervalTooShort { required, .. })
            | CliError::Solver(SolverError::Hyperbolicity(HyperbolicityError::IntervalTooShort { required, .. })) => {
                Some(format!("increase window T to >= {:.1}", required.ceil()))
            }
            CliError::Solver(SolverError::ContractionViolated { limit, .. }) => {
                Some(format!("reduce L below {limit:.6} or scale the nonlinearity with --eps"))
            }
            CliError::Hyperbolicity(HyperbolicityError::NoDichotomy { .. }) => {
                Some("growth rates do not separate on this window; try a longer window".into())
            }
            CliError::Solver(SolverError::Residual { .. }) => Some("tighten tolerances.rtol/atol or --tol".into()),
            CliError::Solver(SolverError::NotConverged { .. }) => Some("raise tolerances.max_iter".into()),
            CliError::Rap(RapError::WindowTooSmall { .. }) => {
                Some("increase the window or lower the horizon schedule".into())
            }
            CliError::Schema { .. } | CliError::Problem { .. } => Some("see schema/problem.schema.json".into()),
            _ => None,
        }
    }
}

fn parse_tau_range(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err("expected A:B:STEP".into());
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    if !(v[2] > 0.0) || v[1] < v[0] {
        return Err("need A <= B and STEP > 0".into());
    }
    Ok((v[0], v[1], v[2]))
}

fn parse_side(s: &str) -> Result<Tail, String> {
    s.parse::<Tail>().map_err(|e| e.to_string())
}

/// Bounded solutions of x' = A(t)x + f(t) + F(t, x) under exponential
/// dichotomy or trichotomy.
#[derive(Debug, Parser)]
#[command(name = "trichotomy", version)]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// Problem file (JSON).
    pub problem: PathBuf,
    /// Output directory for CSV and JSON artifacts.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Override the window T.
    #[arg(long)]
    pub window: Option<f64>,
    /// Override the solver tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Comma-separated epsilon list.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub eps: Option<Vec<f64>>,
    /// Shift range A:B:STEP.
    #[arg(long, value_parser = parse_tau_range, allow_hyphen_values = true)]
    pub tau_range: Option<(f64, f64, f64)>,
    /// Tail for remote residuals: plus, minus or both.
    #[arg(long, value_parser = parse_side)]
    pub side: Option<Tail>,
    /// Certificate file with P, Q and optionally N, nu.
    #[arg(long)]
    pub certificate: Option<PathBuf>,
}

impl Args {
    pub fn flags(&self) -> Flags {
        Flags {
            out: self.out.clone(),
            window: self.window,
            tol: self.tol,
            eps: self.eps.clone(),
            tau_range: self.tau_range,
            side: self.side,
            certificate: self.certificate.clone(),
        }
    }
}

/// Caps the global thread pool from `TRICHOTOMY_THREADS`.
fn configure_threads() {
    if let Some(n) = std::env::var("TRICHOTOMY_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Parses arguments, runs one command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    let result = load_problem(&args.problem).and_then(|p| run(args.command, &p, &args.flags()));
    match result {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            for a in &outcome.artifacts {
                println!("wrote {}", a.display());
            }
            outcome.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(h) = e.hint() {
                eprintln!("hint: {h}");
            }
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_range_parsing() {
        assert_eq!(parse_tau_range("0:10:0.5").unwrap(), (0.0, 10.0, 0.5));
        assert!(parse_tau_range("0:10").is_err());
        assert!(parse_tau_range("5:1:1").is_err());
    }

    #[test]
    fn args_parse() {
        let a = Args::try_parse_from([
            "trichotomy",
            "continue-epsilon",
            "p.json",
            "--eps",
            "0.4,0.2",
            "--side",
            "minus",
            "--tau-range",
            "-1:1:0.5",
        ])
        .unwrap();
        assert_eq!(a.command, Command::ContinueEpsilon);
        assert_eq!(a.eps.unwrap(), vec![0.4, 0.2]);
        assert_eq!(a.side, Some(Tail::Minus));
        assert_eq!(a.tau_range, Some((-1.0, 1.0, 0.5)));
    }

    #[test]
    fn window_hint() {
        let e = CliError::Solver(SolverError::WindowTooSmall {
            t_cut: 20.0,
            required: 41.3,
        });
        assert_eq!(e.hint().unwrap(), "increase window T to >= 42.0");
        assert_eq!(e.exit_code(), EXIT_ERROR);
    }
}
