//! Stable-subspace and constant estimation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::grid::{StepGrid, DEFAULT_STEP};
use super::splitting::{sweep_backward, sweep_forward, Families, Half};
use super::{Constants, HyperbolicityError, GAP_THRESHOLD, RATE_MARGIN};
use crate::linalg::{op_norm, orthogonal_complement, orthogonal_projector, Matrix};
use crate::propagator::TransitionOperator;

/// Minimum estimation horizon.
pub const MIN_HORIZON: f64 = 10.0;

/// Result of the stable-subspace estimate on `[from, to]`.
///
/// `to < from` estimates the subspace at `from` of solutions decaying as
/// time runs towards `to`, i.e. the time-reversed problem.
#[derive(Debug, Clone, Serialize)]
pub struct StableEstimate {
    pub from: f64,
    pub to: f64,
    /// Orthogonal projector onto the estimated stable subspace at `from`.
    #[serde(with = "crate::linalg::rows")]
    pub projector: Matrix,
    #[serde(skip)]
    pub basis: Matrix,
    /// Accumulated log growth per QR direction (stand-ins for `log σᵢ`).
    pub log_growth: Vec<f64>,
    pub unstable_dim: usize,
    /// `min(σ_u, 1/σ_s)` across the gap, `∞` when one side is empty.
    pub gap_ratio: f64,
    /// No unstable directions at all.
    pub trivial: bool,
}

fn generic_orthogonal(n: usize) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7a1c_0b5e);
    let m = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

/// Estimates the stable subspace at `from` from the growth of `Φ(to, from)`.
///
/// A discrete QR flow replaces the explicit singular value decomposition:
/// it yields the same splitting and growth exponents without forming the
/// ill-conditioned product.
pub fn estimate_stable_projector(
    op: &TransitionOperator,
    from: f64,
    to: f64,
) -> Result<StableEstimate, HyperbolicityError> {
    let span = (to - from).abs();
    if span < MIN_HORIZON {
        return Err(HyperbolicityError::IntervalTooShort {
            length: span,
            required: MIN_HORIZON,
        });
    }
    let n = op.dim();
    let h = StepGrid::fitted_step(span, DEFAULT_STEP);
    let steps = (span / h).round() as i64;
    let forward = to > from;
    let origin = from.min(to);
    let grid = StepGrid::new(op, origin, h, 0, steps)?;
    let last = grid.len() - 1;

    let mut y = generic_orthogonal(n);
    let mut growth = vec![0.0; n];
    let order: Vec<usize> = if forward {
        (0..last).collect()
    } else {
        (0..last).rev().collect()
    };
    for j in order {
        let m = if forward { grid.step(j) } else { grid.inverse(j) };
        let qr = (m * &y).qr();
        let r = qr.r();
        for (i, g) in growth.iter_mut().enumerate() {
            *g += r[(i, i)].abs().ln();
        }
        y = qr.q();
    }

    let unstable_dim = growth.iter().filter(|&&s| s > 0.0).count();
    let ordered = growth[..unstable_dim].iter().all(|&s| s > 0.0);
    let log_u = if unstable_dim == 0 {
        f64::INFINITY
    } else {
        growth[unstable_dim - 1]
    };
    let log_s = if unstable_dim == n {
        f64::INFINITY
    } else {
        -growth[unstable_dim]
    };
    let log_ratio = log_u.min(log_s);
    let gap_ratio = if log_ratio > 700.0 {
        f64::INFINITY
    } else {
        log_ratio.exp()
    };
    if !ordered || gap_ratio < GAP_THRESHOLD {
        return Err(HyperbolicityError::NoDichotomy {
            from,
            to,
            gap_ratio,
        });
    }

    let unstable_end = y.columns(0, unstable_dim).into_owned();
    let start = orthogonal_complement(&unstable_end);
    let basis = if forward {
        sweep_backward(&grid, last, 0, &start).swap_remove(0)
    } else {
        sweep_forward(&grid, 0, last, &start).pop().expect("nonempty")
    };
    Ok(StableEstimate {
        from,
        to,
        projector: orthogonal_projector(&basis),
        basis,
        log_growth: growth,
        unstable_dim,
        gap_ratio,
        trivial: unstable_dim == 0,
    })
}

/// Each branch family of the four decay inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// `t ≥ τ`, projector of the given half at `τ`.
    Forward(HalfTag),
    /// `t ≤ τ`, complementary projector.
    Backward(HalfTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HalfTag {
    Minus,
    Plus,
}

impl From<Half> for HalfTag {
    fn from(h: Half) -> Self {
        match h {
            Half::Minus => HalfTag::Minus,
            Half::Plus => HalfTag::Plus,
        }
    }
}

impl Branch {
    pub fn label(&self, whole_line: bool) -> &'static str {
        match (self, whole_line) {
            (Branch::Forward(_), false) => "U P U^-1, tau <= t",
            (Branch::Backward(_), false) => "U (I-P) U^-1, t <= tau",
            (Branch::Forward(HalfTag::Plus), true) => "U P U^-1, 0 <= tau <= t",
            (Branch::Backward(HalfTag::Plus), true) => "U (I-P) U^-1, t <= tau, tau >= 0",
            (Branch::Backward(HalfTag::Minus), true) => "U Q U^-1, t <= tau <= 0",
            (Branch::Forward(HalfTag::Minus), true) => "U (I-Q) U^-1, tau <= t, tau <= 0",
        }
    }
}

/// One sampled pair `‖U(t,τ) Π U(τ,t)‖`, by grid indices.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PairSample {
    pub branch: Branch,
    pub tau: usize,
    pub t: usize,
    pub norm: f64,
}

/// Samples the branch norms for all `τ` nodes in `[lo, hi]` (stride
/// `tau_stride`) and `t` nodes at stride `t_stride` from `τ`.
pub(crate) fn pair_samples(
    grid: &StepGrid,
    fam: &Families,
    lo: usize,
    hi: usize,
    tau_stride: usize,
    t_stride: usize,
) -> Vec<PairSample> {
    let mut taus: Vec<usize> = (lo..=hi).step_by(tau_stride.max(1)).collect();
    if *taus.last().expect("nonempty window") != hi {
        taus.push(hi);
    }
    if lo <= fam.zero && fam.zero <= hi && !taus.contains(&fam.zero) {
        taus.push(fam.zero);
    }
    taus.par_iter()
        .flat_map_iter(|&i| {
            let mut out = Vec::new();
            for half in [Half::Minus, Half::Plus] {
                if !fam.has(i, half) {
                    continue;
                }
                march_forward(grid, fam, i, half, hi, t_stride, &mut out);
                march_backward(grid, fam, i, half, lo, t_stride, &mut out);
            }
            out.into_iter()
        })
        .collect()
}

fn record(out: &mut Vec<PairSample>, branch: Branch, tau: usize, t: usize, m: &Matrix) {
    out.push(PairSample {
        branch,
        tau,
        t,
        norm: op_norm(m),
    });
}

fn march_forward(grid: &StepGrid, fam: &Families, i: usize, half: Half, hi: usize, stride: usize, out: &mut Vec<PairSample>) {
    let branch = Branch::Forward(half.into());
    let mut m = fam.proj(i, half).clone();
    record(out, branch, i, i, &m);
    for j in i..hi {
        m = fam.fwd(j + 1) * (grid.step(j) * m);
        if (j + 1 - i) % stride == 0 || j + 1 == hi {
            record(out, branch, i, j + 1, &m);
        }
    }
}

fn march_backward(grid: &StepGrid, fam: &Families, i: usize, half: Half, lo: usize, stride: usize, out: &mut Vec<PairSample>) {
    let branch = Branch::Backward(half.into());
    let mut m = fam.proj_c(i, half).clone();
    record(out, branch, i, i, &m);
    for j in (lo..i).rev() {
        m = fam.bwd(j) * (grid.inverse(j) * m);
        if (i - j) % stride == 0 || j == lo {
            record(out, branch, i, j, &m);
        }
    }
}

/// Envelope fit of the sampled branch norms.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantsFit {
    pub constants: Constants,
    /// Least-squares rate before the safety shrink.
    pub nu_fit: f64,
    /// Largest `‖·‖ / (𝒩 e^{−ν d}) − 1` on the fit samples.
    pub max_violation: f64,
    pub samples: usize,
}

pub(crate) fn fit_constants(samples: &[PairSample], h: f64) -> Result<ConstantsFit, HyperbolicityError> {
    let max_d = samples.iter().map(|s| s.t.abs_diff(s.tau)).max().unwrap_or(0);
    let mut env = vec![f64::NEG_INFINITY; max_d + 1];
    for s in samples {
        let d = s.t.abs_diff(s.tau);
        let y = s.norm.max(1e-300).ln();
        env[d] = env[d].max(y);
    }
    let pts: Vec<(f64, f64)> = env
        .iter()
        .enumerate()
        .filter(|(_, y)| y.is_finite())
        .map(|(d, &y)| (d as f64 * h, y))
        .collect();
    // zero-norm branches (empty subspaces) carry no rate information
    let informative: Vec<(f64, f64)> = pts.iter().copied().filter(|&(_, y)| y > -690.0).collect();
    let slope = if informative.len() >= 2 {
        let m = informative.len() as f64;
        let (sx, sy) = informative.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (mx, my) = (sx / m, sy / m);
        let (sxy, sxx) = informative
            .iter()
            .fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2)));
        if sxx > 0.0 {
            sxy / sxx
        } else {
            0.0
        }
    } else {
        f64::NEG_INFINITY
    };
    let nu_fit = -slope;
    if !(nu_fit > 1e-6) {
        return Err(HyperbolicityError::NonHyperbolic { rate: nu_fit });
    }
    // all branches trivially zero: any rate works; report a unit rate
    let nu_fit = if nu_fit.is_finite() { nu_fit } else { 1.0 / RATE_MARGIN };
    let nu = RATE_MARGIN * nu_fit;
    let n = pts
        .iter()
        .map(|&(d, y)| (y + nu * d).exp())
        .fold(1.0f64, f64::max);
    let constants = Constants::new(n, nu);
    let max_violation = samples
        .iter()
        .map(|s| s.norm / constants.bound((s.t.abs_diff(s.tau)) as f64 * h) - 1.0)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ConstantsFit {
        constants,
        nu_fit,
        max_violation,
        samples: samples.len(),
    })
}

pub(crate) fn strides(window_nodes: usize) -> (usize, usize) {
    ((window_nodes / 120).max(1), (window_nodes / 400).max(1))
}

/// Fits `(𝒩, ν)` for the dichotomy projector `p` given at `a` on `[a, b]`.
pub fn estimate_constants(
    op: &TransitionOperator,
    p: &Matrix,
    interval: (f64, f64),
) -> Result<ConstantsFit, HyperbolicityError> {
    super::dichotomy::fit_half(op, p, interval, true)
}
