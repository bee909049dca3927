use serde::Serialize;

use super::scan::{almost_period_scan, RapReport, ScanOptions};
use super::RapError;
use crate::solvers::GridFunction;

/// A named input of the equation, sampled on the solution's window.
#[derive(Debug, Clone)]
pub struct AuditInput {
    pub name: String,
    pub function: GridFunction,
}

impl AuditInput {
    pub fn new(name: impl Into<String>, function: GridFunction) -> Self {
        AuditInput {
            name: name.into(),
            function,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputScan {
    pub name: String,
    pub accepted: usize,
    pub scanned: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditRow {
    pub eps: f64,
    pub inputs: Vec<InputScan>,
    /// Shifts accepted for every input.
    pub common: Vec<f64>,
    pub solution_accepted: Vec<f64>,
    pub solution_fraction: f64,
    /// Common input shifts the solution does not share.
    pub missing: Vec<f64>,
    /// `common ⊆ solution_accepted`.
    pub inherited: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub tau_range: (f64, f64),
    pub tau_step: f64,
    pub schedule: Vec<f64>,
    pub window: (f64, f64),
    pub rows: Vec<AuditRow>,
    pub all_inherited: bool,
}

/// Scans the inputs and the solution with the same ladder and reports
/// whether every shift accepted for all inputs is also accepted for `φ`.
pub fn solution_rap_audit(
    phi: &GridFunction,
    inputs: &[AuditInput],
    eps_ladder: &[f64],
    opts: &ScanOptions,
) -> Result<AuditReport, RapError> {
    for inp in inputs {
        let f = &inp.function;
        if f.len() != phi.len() || (f.start() - phi.start()).abs() > 1e-9 * phi.step() {
            return Err(RapError::GridMismatch);
        }
    }
    let mut rows = Vec::new();
    let mut schedule = Vec::new();
    for &eps in eps_ladder {
        let sol: RapReport = almost_period_scan(phi, eps, opts)?;
        let scans: Vec<RapReport> = inputs
            .iter()
            .map(|i| almost_period_scan(&i.function, eps, opts))
            .collect::<Result<_, _>>()?;
        let common: Vec<f64> = sol
            .entries
            .iter()
            .map(|e| e.tau)
            .filter(|&tau| scans.iter().all(|s| s.is_accepted(tau)))
            .collect();
        let missing: Vec<f64> = common.iter().copied().filter(|&t| !sol.is_accepted(t)).collect();
        schedule = sol.schedule.clone();
        rows.push(AuditRow {
            eps,
            inputs: inputs
                .iter()
                .zip(&scans)
                .map(|(i, s)| InputScan {
                    name: i.name.clone(),
                    accepted: s.accepted.len(),
                    scanned: s.entries.len(),
                })
                .collect(),
            inherited: missing.is_empty(),
            common,
            solution_fraction: sol.accepted_fraction,
            solution_accepted: sol.accepted,
            missing,
        });
    }
    Ok(AuditReport {
        tau_range: opts.tau_range,
        tau_step: opts.tau_step,
        schedule,
        window: phi.window(),
        all_inherited: rows.iter().all(|r| r.inherited),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_and_solution() {
        let c = GridFunction::sample_scalar(-60.0, 60.0, 0.05, |_| 0.5);
        let rep = solution_rap_audit(&c, &[AuditInput::new("f", c.clone())], &[0.1], &ScanOptions::new((0.5, 5.0), 0.5)).unwrap();
        assert!(rep.all_inherited);
        assert_eq!(rep.rows[0].common.len(), 10);
        assert_eq!(rep.rows[0].solution_fraction, 1.0);
    }

    #[test]
    fn missing_period_is_reported() {
        let f = GridFunction::sample_scalar(-60.0, 60.0, 0.05, |_| 1.0);
        let phi = GridFunction::sample_scalar(-60.0, 60.0, 0.05, |t| t);
        let rep = solution_rap_audit(&phi, &[AuditInput::new("f", f)], &[0.1], &ScanOptions::new((0.5, 2.0), 0.5)).unwrap();
        assert!(!rep.all_inherited);
        assert_eq!(rep.rows[0].missing.len(), 4);
    }
}
