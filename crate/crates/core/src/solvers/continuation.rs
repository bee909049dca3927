//! Solutions of `x' = A(t)x + f(t) + εF(t, x)` along a list of `ε`.

use rayon::prelude::*;
use serde::Serialize;

use super::grid_function::{Forcing, GridFunction};
use super::picard::{contraction, iterate, linear_part, LipschitzSpec, PicardOptions};
use super::SolverError;
use crate::hyperbolicity::{Constants, GreenKernel};

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationStep {
    pub eps: f64,
    /// `‖φ_ε − φ₀‖_b` on the trusted window.
    pub deviation: f64,
    /// `4|ε|𝒩²L‖f‖ / (ν(ν − 2𝒩L|ε|))`.
    pub bound: f64,
    pub iterations: usize,
    pub alpha: f64,
    #[serde(skip)]
    pub solution: GridFunction,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationReport {
    pub constants: Constants,
    pub lipschitz: f64,
    pub f_norm: f64,
    pub steps: Vec<ContinuationStep>,
    /// Deviations strictly decrease along decreasing `|ε|` (ties in `|ε|`
    /// are skipped).
    pub monotone: bool,
    pub within_bounds: bool,
}

/// Runs the Picard solver for `εF` at each `ε`, in parallel.
pub fn epsilon_continuation(
    kernel: &GreenKernel,
    f: &dyn Forcing,
    spec: &LipschitzSpec,
    eps: &[f64],
    tol: f64,
) -> Result<ContinuationReport, SolverError> {
    let constants = kernel.constants();
    for &e in eps {
        if !e.is_finite() {
            return Err(SolverError::Invalid(format!("epsilon {e} is not finite")));
        }
        contraction(constants, e.abs() * spec.lipschitz())?;
    }
    let (phi0, f_norm) = linear_part(kernel, f)?;
    let opts = PicardOptions {
        tol,
        ..PicardOptions::default()
    };
    let Constants { n, nu } = constants;
    let l = spec.lipschitz();
    let steps: Vec<ContinuationStep> = eps
        .par_iter()
        .map(|&e| {
            let scaled = spec.scaled(e);
            let sol = iterate(kernel, f, &phi0, f_norm, &scaled, &opts)?;
            let bound = 4.0 * e.abs() * n * n * l * f_norm / (nu * (nu - 2.0 * n * l * e.abs()));
            Ok(ContinuationStep {
                eps: e,
                deviation: sol.report.deviation,
                bound,
                iterations: sol.report.iterations,
                alpha: sol.report.alpha,
                solution: sol.solution,
            })
        })
        .collect::<Result<_, SolverError>>()?;
    let mut order: Vec<&ContinuationStep> = steps.iter().collect();
    order.sort_by(|a, b| b.eps.abs().total_cmp(&a.eps.abs()));
    let monotone = order
        .windows(2)
        .all(|w| w[0].eps.abs() == w[1].eps.abs() || w[1].deviation < w[0].deviation);
    let within_bounds = steps.iter().all(|s| s.deviation <= s.bound * (1.0 + 1e-3) + 1e-12);
    Ok(ContinuationReport {
        constants,
        lipschitz: l,
        f_norm,
        steps,
        monotone,
        within_bounds,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::hyperbolicity::TrichotomyCertificate;
    use crate::linalg::Matrix;
    use crate::propagator::{CoefficientMatrix, TransitionOperator};
    use crate::solvers::FnForcing;

    fn kernel() -> GreenKernel {
        let op = Arc::new(TransitionOperator::new(CoefficientMatrix::diagonal(&[-1.0])));
        let cert = TrichotomyCertificate::from_projectors(
            &op,
            &Matrix::identity(1, 1),
            &Matrix::zeros(1, 1),
            Some(Constants::new(1.0, 1.0)),
            80.0,
        )
        .unwrap();
        GreenKernel::whole_line(op, &cert).unwrap()
    }

    #[test]
    fn deviations_shrink_with_eps() {
        let k = kernel();
        let spec = LipschitzSpec::parse(&["sin(x1)"], 1.0).unwrap();
        let f = FnForcing::new(1, |_t: f64, o: &mut [f64]| o[0] = 0.5);
        let rep = epsilon_continuation(&k, &f, &spec, &[0.4, 0.2, 0.1, 0.05, 0.0], 1e-7).unwrap();
        assert!(rep.monotone && rep.within_bounds, "{rep:?}");
        let last = rep.steps.last().unwrap();
        assert_eq!(last.deviation, 0.0);
        // fixed point x = 0.5 + ε sin x
        let x = rep.steps[0].solution.sample(0)[0];
        assert!((x - 0.5 - 0.4 * x.sin()).abs() < 1e-6);
    }

    #[test]
    fn boundary_eps_refused() {
        let k = kernel();
        let spec = LipschitzSpec::parse(&["sin(x1)"], 1.0).unwrap();
        let f = FnForcing::new(1, |_t: f64, o: &mut [f64]| o[0] = 0.5);
        assert!(matches!(
            epsilon_continuation(&k, &f, &spec, &[0.5], 1e-7),
            Err(SolverError::ContractionViolated { .. })
        ));
    }
}
