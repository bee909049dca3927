//! Finite-horizon diagnostics: remote periodicity residuals, almost-period
//! scans, the Bebutov shift metric and Lagrange stability evidence.
//!
//! Everything here is evidence up to the sampled horizon; reports carry
//! the horizon they were computed on.

mod audit;
mod bebutov;
mod lagrange;
mod scan;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solvers::GridFunction;

pub use audit::{solution_rap_audit, AuditInput, AuditReport, AuditRow, InputScan};
pub use bebutov::{bebutov_distance, default_l_grid};
pub use lagrange::{lagrange_report, LagrangeReport};
pub use scan::{almost_period_scan, RapReport, ScanOptions, TauEntry, DEFAULT_SCHEDULE};

/// Interpolation order for shifts that are not multiples of the step.
const SHIFT_POINTS: usize = 8;

/// Which tail of the line a residual looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    /// `t ≥ T`
    Plus,
    /// `t ≤ −T`
    Minus,
    Both,
}

impl std::str::FromStr for Tail {
    type Err = RapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plus" | "+" => Ok(Tail::Plus),
            "minus" | "-" => Ok(Tail::Minus),
            "both" => Ok(Tail::Both),
            _ => Err(RapError::Invalid(format!("unknown side `{s}` (plus, minus or both)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RapError {
    #[error("window [{a}, {b}] too small for shift {tau} at horizon {horizon} on side {side:?}")]
    WindowTooSmall {
        a: f64,
        b: f64,
        tau: f64,
        horizon: f64,
        side: Tail,
    },
    #[error("functions are sampled on different grids")]
    GridMismatch,
    #[error("invalid argument: {0}")]
    Invalid(String),
}

fn shifted_value(phi: &GridFunction, i: usize, tau: f64, buf: &mut [f64]) {
    let h = phi.step();
    let m = tau / h;
    let k = m.round();
    if (m - k).abs() < 1e-9 {
        let j = i as i64 + k as i64;
        buf.copy_from_slice(phi.sample(j as usize));
    } else {
        phi.eval_lagrange_into(phi.time(i) + tau, SHIFT_POINTS, buf)
            .expect("shift stays in the window");
    }
}

/// Grid indices `i` with `t_i` in `[lo, hi]` and `t_i + τ` in the window.
fn valid_indices(phi: &GridFunction, tau: f64, lo: f64, hi: f64) -> std::ops::RangeInclusive<usize> {
    let (a, b) = phi.window();
    let h = phi.step();
    let eps = 1e-9 * h;
    let from = lo.max(a).max(a - tau);
    let to = hi.min(b).min(b - tau);
    let first = ((from - a) / h - 1e-9).ceil().max(0.0) as usize;
    let last_f = (to - a) / h + 1e-9;
    if to < from - eps || last_f < 0.0 {
        #[allow(clippy::reversed_empty_ranges)]
        return 1..=0;
    }
    let last = (last_f.floor() as usize).min(phi.len() - 1);
    first..=last
}

/// `|φ(t + τ) − φ(t)|` at the grid points of one tail, in index order.
pub(crate) fn tail_differences(
    phi: &GridFunction,
    tau: f64,
    horizon: f64,
    side: Tail,
) -> Result<Vec<(f64, f64)>, RapError> {
    let (a, b) = phi.window();
    let ranges: Vec<std::ops::RangeInclusive<usize>> = match side {
        Tail::Plus => vec![valid_indices(phi, tau, horizon, f64::INFINITY)],
        Tail::Minus => vec![valid_indices(phi, tau, f64::NEG_INFINITY, -horizon)],
        Tail::Both => vec![
            valid_indices(phi, tau, f64::NEG_INFINITY, -horizon),
            valid_indices(phi, tau, horizon, f64::INFINITY),
        ],
    };
    if ranges.iter().any(|r| r.is_empty()) {
        return Err(RapError::WindowTooSmall {
            a,
            b,
            tau,
            horizon,
            side,
        });
    }
    let n = phi.dim();
    let mut buf = vec![0.0; n];
    let mut out = Vec::new();
    for r in ranges {
        for i in r {
            shifted_value(phi, i, tau, &mut buf);
            let d = buf
                .iter()
                .zip(phi.sample(i))
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            out.push((phi.time(i), d));
        }
    }
    Ok(out)
}

/// `sup |φ(t + τ) − φ(t)|` over grid points `t ≥ T`, `t ≤ −T` or both.
pub fn remote_period_residual(phi: &GridFunction, tau: f64, horizon: f64, side: Tail) -> Result<f64, RapError> {
    Ok(tail_differences(phi, tau, horizon, side)?
        .into_iter()
        .map(|(_, d)| d)
        .fold(0.0, f64::max))
}
