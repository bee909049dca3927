//! Bounded solutions: linear Green-kernel quadrature, Picard iteration for
//! semilinear problems, ε-continuation and the cubic example probe.

mod c1;
mod continuation;
mod grid_function;
mod linear;
mod picard;
pub mod quadrature;

use thiserror::Error;

use crate::expr::EvalError;
use crate::hyperbolicity::HyperbolicityError;
use crate::propagator::PropagatorError;

pub use c1::{example_c1_probe, C1Probe, C1SupRow};
pub use continuation::{epsilon_continuation, ContinuationReport, ContinuationStep};
pub use grid_function::{ExprForcing, FnForcing, Forcing, GridFunction, ZeroForcing};
pub use linear::{ode_residual, solve_linear_bounded, LinearReport, LinearSolution, MIN_TRUSTED};
pub use picard::{
    picard_solve, picard_solve_from, LipschitzSpec, LipschitzValidation, PicardOptions, PicardReport,
    PicardSolution,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Hyperbolicity(#[from] HyperbolicityError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error("evaluation failed at t = {t}: {source}")]
    Eval { t: f64, source: EvalError },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("time {t} lies outside the sampled window [{a}, {b}]")]
    OutsideWindow { t: f64, a: f64, b: f64 },
    #[error("grid functions are sampled on different grids")]
    GridMismatch,
    #[error("forcing is not finite at t = {t}")]
    NonFinite { t: f64 },
    #[error("certificate window too small: truncation horizon {t_cut:.3} needs window T >= {required:.1}")]
    WindowTooSmall { t_cut: f64, required: f64 },
    #[error("ODE residual {residual:e} at t = {t} exceeds {bound:e}")]
    Residual { residual: f64, t: f64, bound: f64 },
    #[error("center component |R phi(0)| = {value:e} exceeds {bound:e}")]
    Center { value: f64, bound: f64 },
    #[error("contraction violated: alpha = 2NL/nu = {alpha:.4} >= 1 (need L < {limit:.6})")]
    ContractionViolated { alpha: f64, limit: f64 },
    #[error("Picard iteration did not converge in {iterations} iterations (last ratio {last_ratio:.4}, step {last_step:e})")]
    NotConverged { iterations: usize, last_ratio: f64, last_step: f64 },
    #[error("declared Lipschitz constant {declared} is exceeded: sampled ratio {sampled} at t = {t}")]
    LipschitzViolated { declared: f64, sampled: f64, t: f64 },
    #[error("nonlinearity does not vanish at x = 0: |F(t, 0)| = {value:e} at t = {t}")]
    NonzeroAtOrigin { t: f64, value: f64 },
    #[error("invalid nonlinearity: {0}")]
    Nonlinearity(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("quadrature tail failed to converge at t = {t}")]
    QuadratureTail { t: f64 },
}
