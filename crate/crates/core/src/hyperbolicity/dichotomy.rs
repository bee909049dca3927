//! Half-line dichotomy certificates.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::estimate::{fit_constants, pair_samples, strides, PairSample};
use super::grid::{StepGrid, DEFAULT_STEP};
use super::splitting::Families;
use super::{
    estimate_stable_projector, sweep_margin, Constants, HyperbolicityError, DECAY_SLACK,
};
use crate::linalg::{idempotency_defect, Matrix};
use crate::propagator::TransitionOperator;

/// Pair with the largest relative violation of its decay bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstPair {
    pub t: f64,
    pub tau: f64,
    pub branch: String,
    pub norm: f64,
    pub bound: f64,
}

/// Outcome of checking the decay inequalities on a grid of `(t, τ)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// `max ‖·‖ / (𝒩 e^{−ν|t−τ|}) − 1`; non-positive means every bound holds.
    pub max_violation: f64,
    pub worst: Option<WorstPair>,
    pub pairs: usize,
    /// Horizon actually checked.
    pub interval: (f64, f64),
    /// `max ‖P(t)‖` over the grid (boundedness of the projector family).
    pub max_projector_norm: f64,
    /// Distance between swept and given subspaces at the reference node.
    pub reference_mismatch: f64,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.max_violation <= DECAY_SLACK
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "max relative violation {:.3e} over {} pairs", self.max_violation, self.pairs)?;
        if let Some(w) = &self.worst {
            write!(
                f,
                "; worst at t = {:.4}, tau = {:.4} ({}): norm {:.6e}, bound {:.6e}",
                w.t, w.tau, w.branch, w.norm, w.bound
            )?;
        }
        Ok(())
    }
}

/// Exponential dichotomy on a finite interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DichotomyCertificate {
    pub interval: (f64, f64),
    /// Time at which `projector` is given (an endpoint of the interval).
    pub reference: f64,
    #[serde(with = "crate::linalg::rows")]
    pub projector: Matrix,
    pub constants: Constants,
    pub report: VerificationReport,
}

impl DichotomyCertificate {
    /// Whether the reference time is the left end of the interval.
    pub fn is_right_half(&self) -> bool {
        self.reference == self.interval.0
    }
}

pub(crate) fn evaluate(
    samples: &[PairSample],
    grid: &StepGrid,
    constants: Constants,
    whole_line: bool,
) -> (f64, Option<WorstPair>) {
    let mut worst: Option<(f64, &PairSample)> = None;
    for s in samples {
        let d = (grid.node(s.t) - grid.node(s.tau)).abs();
        let v = s.norm / constants.bound(d) - 1.0;
        if worst.is_none_or(|(w, _)| v > w) {
            worst = Some((v, s));
        }
    }
    match worst {
        None => (f64::NEG_INFINITY, None),
        Some((v, s)) => {
            let d = (grid.node(s.t) - grid.node(s.tau)).abs();
            (
                v,
                Some(WorstPair {
                    t: grid.node(s.t),
                    tau: grid.node(s.tau),
                    branch: s.branch.label(whole_line).to_string(),
                    norm: s.norm,
                    bound: constants.bound(d),
                }),
            )
        }
    }
}

pub(crate) struct HalfGrid {
    pub grid: StepGrid,
    pub fam: Families,
    pub lo: usize,
    pub hi: usize,
}

/// Grid and node projectors for a half-line problem with reference at `a`
/// (`right = true`) or at `b`.
pub(crate) fn half_grid(
    op: &TransitionOperator,
    p: &Matrix,
    interval: (f64, f64),
    right: bool,
    nu_hint: f64,
) -> Result<HalfGrid, HyperbolicityError> {
    let (a, b) = interval;
    let h = StepGrid::fitted_step(b - a, DEFAULT_STEP);
    let steps = ((b - a) / h).round() as i64;
    let ext = (sweep_margin(nu_hint) / h).ceil() as i64;
    if right {
        let grid = StepGrid::new(op, a, h, 0, steps + ext)?;
        let fam = Families::dichotomy_right(&grid, 0, p)?;
        Ok(HalfGrid {
            grid,
            fam,
            lo: 0,
            hi: steps as usize,
        })
    } else {
        let grid = StepGrid::new(op, b, h, -(steps + ext), 0)?;
        let zero = grid.len() - 1;
        let fam = Families::dichotomy_left(&grid, zero, p)?;
        Ok(HalfGrid {
            grid,
            fam,
            lo: ext as usize,
            hi: zero,
        })
    }
}

fn check_projector(op: &TransitionOperator, p: &Matrix) -> Result<(), HyperbolicityError> {
    if p.nrows() != op.dim() || p.ncols() != op.dim() {
        return Err(HyperbolicityError::Dimension {
            expected: op.dim(),
            got: p.nrows(),
        });
    }
    let defect = idempotency_defect(p);
    if defect > 1e-10 {
        return Err(HyperbolicityError::NotIdempotent { defect });
    }
    Ok(())
}

fn verify_on(
    op: &TransitionOperator,
    p: &Matrix,
    interval: (f64, f64),
    right: bool,
    constants: Constants,
) -> Result<DichotomyCertificate, HyperbolicityError> {
    check_projector(op, p)?;
    let (a, b) = interval;
    let required = 10.0 / constants.nu;
    if b - a < required {
        return Err(HyperbolicityError::IntervalTooShort {
            length: b - a,
            required,
        });
    }
    let hg = half_grid(op, p, interval, right, constants.nu)?;
    let (ts, tt) = strides(hg.hi - hg.lo + 1);
    let samples = pair_samples(&hg.grid, &hg.fam, hg.lo, hg.hi, ts, tt);
    let (max_violation, worst) = evaluate(&samples, &hg.grid, constants, false);
    let max_projector_norm = (hg.lo..=hg.hi)
        .step_by(ts)
        .map(|j| crate::linalg::op_norm(hg.fam.fwd(j)))
        .fold(0.0, f64::max);
    let report = VerificationReport {
        max_violation,
        worst,
        pairs: samples.len(),
        interval,
        max_projector_norm,
        reference_mismatch: hg.fam.mismatch,
    };
    if !report.passed() {
        return Err(HyperbolicityError::DecayViolated(Box::new(report)));
    }
    Ok(DichotomyCertificate {
        interval,
        reference: if right { a } else { b },
        projector: p.clone(),
        constants,
        report,
    })
}

/// Checks both decay inequalities for the projector `p` given at `a`.
pub fn verify_dichotomy(
    op: &TransitionOperator,
    p: &Matrix,
    interval: (f64, f64),
    constants: Constants,
) -> Result<DichotomyCertificate, HyperbolicityError> {
    verify_on(op, p, interval, true, constants)
}

/// Estimates `P` at `a` and `(𝒩, ν)` on `[a, b]`, then verifies.
pub fn certify_dichotomy(
    op: &TransitionOperator,
    interval: (f64, f64),
) -> Result<DichotomyCertificate, HyperbolicityError> {
    let est = estimate_stable_projector(op, interval.0, interval.1)?;
    let fit = fit_half(op, &est.projector, interval, true)?;
    verify_on(op, &est.projector, interval, true, fit.constants)
}

/// Left half-line `[a, b]` with the projector given at `b`: the range
/// decays forward, the kernel decays towards `a`.
pub fn certify_left_dichotomy(
    op: &TransitionOperator,
    interval: (f64, f64),
) -> Result<DichotomyCertificate, HyperbolicityError> {
    let est = estimate_stable_projector(op, interval.1, interval.0)?;
    let n = op.dim();
    let p = Matrix::identity(n, n) - &est.projector;
    let fit = fit_half(op, &p, interval, false)?;
    verify_on(op, &p, interval, false, fit.constants)
}

pub(crate) fn fit_half(
    op: &TransitionOperator,
    p: &Matrix,
    interval: (f64, f64),
    right: bool,
) -> Result<super::ConstantsFit, HyperbolicityError> {
    check_projector(op, p)?;
    let hg = half_grid(op, p, interval, right, 1.0)?;
    let (ts, tt) = strides(hg.hi - hg.lo + 1);
    let samples = pair_samples(&hg.grid, &hg.fam, hg.lo, hg.hi, ts, tt);
    fit_constants(&samples, hg.grid.h())
}
