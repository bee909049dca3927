//! Exponential dichotomy and trichotomy: estimation, verification and the
//! associated Green kernels.
//!
//! Half-lines are realised as finite intervals. Every report carries the
//! horizon it was checked on; nothing beyond it is certified.

mod dichotomy;
mod estimate;
mod green;
mod grid;
mod splitting;
mod trichotomy;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::propagator::PropagatorError;

pub use dichotomy::{
    certify_dichotomy, certify_left_dichotomy, verify_dichotomy, DichotomyCertificate,
    VerificationReport, WorstPair,
};
pub use estimate::{estimate_constants, estimate_stable_projector, ConstantsFit, StableEstimate};
pub use green::{green_eval, green_shift_check, GreenKernel, KernelMode, ShiftCheck};
pub use grid::{StepGrid, DEFAULT_STEP};
pub use trichotomy::{
    build_trichotomy, IncompatibilityReport, TrichotomyCertificate, TrichotomyOutcome,
    TrichotomyReport,
};

/// Relative slack allowed on the decay inequalities.
pub const DECAY_SLACK: f64 = 1e-6;
/// Minimum singular-value gap ratio accepted as a dichotomy.
pub const GAP_THRESHOLD: f64 = 10.0;
/// Safety shrink applied to fitted rates.
pub const RATE_MARGIN: f64 = 0.95;

/// Dichotomy constants `‖·‖ ≤ 𝒩 e^{−ν|t−τ|}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    #[serde(rename = "N")]
    pub n: f64,
    pub nu: f64,
}

impl Constants {
    pub fn new(n: f64, nu: f64) -> Self {
        Constants { n, nu }
    }

    pub fn bound(&self, separation: f64) -> f64 {
        self.n * (-self.nu * separation.abs()).exp()
    }
}

/// One-sided limit selector at the jump `t = τ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// `t → τ⁺`
    Plus,
    /// `t → τ⁻`
    Minus,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HyperbolicityError {
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error("no dichotomy detected on [{from}, {to}]: singular-value gap ratio {gap_ratio:.3} < 10")]
    NoDichotomy { from: f64, to: f64, gap_ratio: f64 },
    #[error("not hyperbolic: fitted decay rate {rate:e} is not positive")]
    NonHyperbolic { rate: f64 },
    #[error("projector is not idempotent (‖P²−P‖ = {defect:e})")]
    NotIdempotent { defect: f64 },
    #[error("interval length {length} is shorter than the required {required}")]
    IntervalTooShort { length: f64, required: f64 },
    #[error("range and kernel subspaces are not complementary at t = {t}")]
    Splitting { t: f64 },
    #[error("step transition matrix is singular at t = {t}")]
    Singular { t: f64 },
    #[error("decay bound violated: {0}")]
    DecayViolated(Box<VerificationReport>),
    #[error("t = τ = {t} is a jump point; request a one-sided limit")]
    JumpPoint { t: f64 },
    #[error("time {t} lies outside the kernel window [{lo}, {hi}]")]
    OutOfWindow { t: f64, lo: f64, hi: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("projector identity {what} fails (residual {residual:e})")]
    Algebra { what: &'static str, residual: f64 },
}

/// Extension beyond the window used to converge the swept subspaces.
pub(crate) fn sweep_margin(nu: f64) -> f64 {
    (14.0 / nu).clamp(5.0, 60.0)
}
