use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use super::{tail_differences, RapError, Tail};
use crate::solvers::GridFunction;

pub const DEFAULT_SCHEDULE: [f64; 4] = [5.0, 10.0, 20.0, 40.0];

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOptions {
    pub tau_range: (f64, f64),
    pub tau_step: f64,
    /// Horizons `T`, ascending after normalisation.
    pub schedule: Vec<f64>,
    pub side: Tail,
}

impl ScanOptions {
    pub fn new(tau_range: (f64, f64), tau_step: f64) -> Self {
        ScanOptions {
            tau_range,
            tau_step,
            schedule: DEFAULT_SCHEDULE.to_vec(),
            side: Tail::Both,
        }
    }

    pub fn with_schedule(mut self, schedule: &[f64]) -> Self {
        self.schedule = schedule.to_vec();
        self
    }

    pub fn with_side(mut self, side: Tail) -> Self {
        self.side = side;
        self
    }

    /// Scanned shifts; `τ = 0` is trivially a period and is left out.
    pub fn taus(&self) -> Vec<f64> {
        let (a, b) = self.tau_range;
        let n = ((b - a) / self.tau_step + 1e-9).floor() as usize;
        (0..=n)
            .map(|k| a + k as f64 * self.tau_step)
            .filter(|t| t.abs() > 0.5 * self.tau_step)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauEntry {
    pub tau: f64,
    /// Residual at each horizon of the schedule; `None` where the window
    /// cannot hold the tail.
    pub residuals: Vec<Option<f64>>,
    /// Smallest horizon with residual below `ε`.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RapReport {
    pub eps: f64,
    pub side: Tail,
    pub tau_range: (f64, f64),
    pub tau_step: f64,
    pub schedule: Vec<f64>,
    pub window: (f64, f64),
    pub entries: Vec<TauEntry>,
    pub accepted: Vec<f64>,
    /// Largest gap between consecutive accepted shifts, range ends
    /// included; `None` when nothing was accepted.
    pub inclusion_length: Option<f64>,
    /// At least two accepted shifts and `ℓ̂` at most half the range.
    pub relatively_dense: bool,
    pub accepted_fraction: f64,
    /// Largest horizon at which any residual could be evaluated.
    pub horizon: f64,
}

impl RapReport {
    /// Residual curves: `tau`, one column per horizon, then the threshold.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "tau")?;
        for t in &self.schedule {
            write!(w, ",T={t}")?;
        }
        writeln!(w, ",threshold")?;
        for e in &self.entries {
            write!(w, "{:.16e}", e.tau)?;
            for r in &e.residuals {
                match r {
                    Some(v) => write!(w, ",{v:.16e}")?,
                    None => write!(w, ",")?,
                }
            }
            match e.threshold {
                Some(t) => writeln!(w, ",{t}")?,
                None => writeln!(w, ",")?,
            }
        }
        Ok(())
    }

    pub fn is_accepted(&self, tau: f64) -> bool {
        let tol = 1e-9 * self.tau_step.max(1.0);
        self.accepted.iter().any(|t| (t - tau).abs() <= tol)
    }
}

fn entry(phi: &GridFunction, tau: f64, eps: f64, schedule: &[f64], side: Tail) -> TauEntry {
    let diffs = match tail_differences(phi, tau, 0.0, side) {
        Ok(d) => d,
        Err(_) => {
            return TauEntry {
                tau,
                residuals: vec![None; schedule.len()],
                threshold: None,
            }
        }
    };
    let residuals: Vec<Option<f64>> = schedule
        .iter()
        .map(|&big_t| {
            let tail_max = |pred: &dyn Fn(f64) -> bool| {
                diffs
                    .iter()
                    .filter(|(t, _)| pred(*t))
                    .map(|&(_, d)| d)
                    .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d))))
            };
            let plus = || tail_max(&|t| t >= big_t - 1e-9);
            let minus = || tail_max(&|t| t <= -big_t + 1e-9);
            match side {
                Tail::Plus => plus(),
                Tail::Minus => minus(),
                Tail::Both => match (plus(), minus()) {
                    (Some(p), Some(m)) => Some(p.max(m)),
                    _ => None,
                },
            }
        })
        .collect();
    let threshold = schedule
        .iter()
        .zip(&residuals)
        .find(|(_, r)| r.is_some_and(|r| r < eps))
        .map(|(&t, _)| t);
    TauEntry {
        tau,
        residuals,
        threshold,
    }
}

/// For every scanned `τ`, the smallest horizon of the schedule at which
/// the remote residual drops below `ε`.
pub fn almost_period_scan(phi: &GridFunction, eps: f64, opts: &ScanOptions) -> Result<RapReport, RapError> {
    if !(eps > 0.0) {
        return Err(RapError::Invalid(format!("epsilon must be positive, got {eps}")));
    }
    let (a, b) = opts.tau_range;
    if !(opts.tau_step > 0.0) || b < a {
        return Err(RapError::Invalid("tau range must be A:B:STEP with A <= B and STEP > 0".into()));
    }
    if phi.step() > opts.tau_step * (1.0 + 1e-9) {
        return Err(RapError::Invalid(format!(
            "grid step {} is coarser than the tau step {}",
            phi.step(),
            opts.tau_step
        )));
    }
    let mut schedule = opts.schedule.clone();
    schedule.sort_by(f64::total_cmp);
    schedule.dedup();
    if schedule.is_empty() || schedule[0] < 0.0 {
        return Err(RapError::Invalid("horizon schedule must be non-empty and non-negative".into()));
    }
    let entries: Vec<TauEntry> = opts
        .taus()
        .par_iter()
        .map(|&tau| entry(phi, tau, eps, &schedule, opts.side))
        .collect();
    let accepted: Vec<f64> = entries.iter().filter(|e| e.threshold.is_some()).map(|e| e.tau).collect();
    let inclusion_length = (!accepted.is_empty()).then(|| {
        let mut pts = vec![a];
        pts.extend(&accepted);
        pts.push(b);
        pts.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    });
    let relatively_dense = accepted.len() >= 2 && inclusion_length.is_some_and(|l| l <= 0.5 * (b - a));
    let horizon = entries
        .iter()
        .flat_map(|e| e.residuals.iter().zip(&schedule).filter(|(r, _)| r.is_some()).map(|(_, &t)| t))
        .fold(0.0, f64::max);
    let accepted_fraction = if entries.is_empty() {
        0.0
    } else {
        accepted.len() as f64 / entries.len() as f64
    };
    Ok(RapReport {
        eps,
        side: opts.side,
        tau_range: opts.tau_range,
        tau_step: opts.tau_step,
        schedule,
        window: phi.window(),
        entries,
        accepted,
        inclusion_length,
        relatively_dense,
        accepted_fraction,
        horizon,
    })
}
