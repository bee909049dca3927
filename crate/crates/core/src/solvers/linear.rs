//! Bounded solution of `x' = A(t)x + f(t)` by Green-kernel quadrature.

use rayon::prelude::*;
use serde::Serialize;

use super::grid_function::{Forcing, GridFunction};
use super::quadrature::GL_POINTS;
use super::SolverError;
use crate::hyperbolicity::{GreenKernel, KernelMode};
use crate::linalg::{Matrix, Vector};
use crate::propagator::TransitionOperator;

/// Shortest trusted sub-window accepted, in time units.
pub const MIN_TRUSTED: f64 = 1.0;

/// Sixth-order central difference weights for `x'` (times `60h`).
const FD6: [f64; 7] = [-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearReport {
    pub tol: f64,
    /// `‖f‖_b` over the quadrature nodes of the window.
    pub f_norm: f64,
    /// Tail horizon with `(𝒩/ν) e^{−ν T_cut} ‖f‖_b ≤ tol/2`.
    pub t_cut: f64,
    /// Full kernel window.
    pub window: (f64, f64),
    /// Sub-window on which the tail bound holds.
    pub trusted: (f64, f64),
    pub sup_norm: f64,
    /// `(2𝒩/ν)‖f‖_b`.
    pub norm_bound: f64,
    /// `max |φ' − Aφ − f|` over the trusted grid.
    pub residual: f64,
    pub residual_at: f64,
    /// `|Rφ(0)|`, whole line only.
    pub center_residual: Option<f64>,
    pub nodes: usize,
}

#[derive(Debug, Clone)]
pub struct LinearSolution {
    /// Solution on the trusted window.
    pub solution: GridFunction,
    /// Solution on the whole kernel window, tail error included.
    pub full: GridFunction,
    pub report: LinearReport,
}

/// Forcing values at the panel quadrature nodes, panel-major.
pub(crate) fn forcing_at_nodes(kernel: &GreenKernel, f: &dyn Forcing) -> Result<Vec<Vector>, SolverError> {
    let panels = kernel.panels()?;
    let n = kernel.dim();
    panels
        .par_iter()
        .flat_map_iter(|p| p.nodes.iter().copied())
        .map(|t| {
            let mut out = vec![0.0; n];
            f.eval_into(t, &mut out)?;
            if out.iter().any(|v| !v.is_finite()) {
                return Err(SolverError::NonFinite { t });
            }
            Ok(Vector::from_vec(out))
        })
        .collect()
}

/// `𝔾f` on the window nodes together with `‖f‖_b` at the quadrature nodes.
pub(crate) fn green_integral(kernel: &GreenKernel, f: &dyn Forcing) -> Result<(GridFunction, f64), SolverError> {
    if f.dim() != kernel.dim() {
        return Err(SolverError::Dimension {
            expected: kernel.dim(),
            got: f.dim(),
        });
    }
    let values = forcing_at_nodes(kernel, f)?;
    debug_assert_eq!(values.len() % GL_POINTS, 0);
    let f_norm = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let phi = kernel.convolve(&values)?;
    Ok((GridFunction::from_vectors(kernel.span().0, kernel.step(), &phi), f_norm))
}

pub(crate) fn trusted_or_error(kernel: &GreenKernel, t_cut: f64) -> Result<(f64, f64), SolverError> {
    let too_small = || SolverError::WindowTooSmall {
        t_cut,
        required: kernel.required_window(t_cut, MIN_TRUSTED),
    };
    let (a, b) = kernel.trusted_window(t_cut).ok_or_else(too_small)?;
    if b - a < MIN_TRUSTED {
        return Err(too_small());
    }
    Ok((a, b))
}

/// `max |φ' − A(t)φ − g(t, φ)|` over grid nodes of `range` with a full
/// difference stencil, `φ'` from sixth-order central differences.
pub fn ode_residual(
    op: &TransitionOperator,
    phi: &GridFunction,
    g: &(dyn Fn(f64, &[f64], &mut [f64]) -> Result<(), SolverError> + Sync),
    range: (f64, f64),
) -> Result<(f64, f64), SolverError> {
    let n = phi.dim();
    let h = phi.step();
    let len = phi.len();
    if len < FD6.len() {
        return Ok((0.0, phi.start()));
    }
    let idx: Vec<usize> = (3..len - 3)
        .filter(|&i| {
            let t = phi.time(i);
            t >= range.0 - 1e-9 * h && t <= range.1 + 1e-9 * h
        })
        .collect();
    let per: Vec<(f64, f64)> = idx
        .par_iter()
        .map(|&i| {
            let t = phi.time(i);
            let a: Matrix = op.coefficient(t)?;
            let x = phi.sample_vector(i);
            let mut gv = vec![0.0; n];
            g(t, x.as_slice(), &mut gv)?;
            let mut dx = Vector::zeros(n);
            for (m, w) in FD6.iter().enumerate() {
                if *w != 0.0 {
                    dx += *w * phi.sample_vector(i + m - 3);
                }
            }
            dx /= 60.0 * h;
            let r = dx - a * x - Vector::from_vec(gv);
            Ok((r.norm(), t))
        })
        .collect::<Result<_, SolverError>>()?;
    Ok(per
        .into_iter()
        .fold((0.0, range.0), |acc, p| if p.0 > acc.0 { p } else { acc }))
}

/// Bounded solution `φ = ∫ G(·, τ) f(τ) dτ`, checked against the ODE.
pub fn solve_linear_bounded(kernel: &GreenKernel, f: &dyn Forcing, tol: f64) -> Result<LinearSolution, SolverError> {
    if !(tol > 0.0) {
        return Err(SolverError::Invalid(format!("tolerance must be positive, got {tol}")));
    }
    let (full, f_norm) = green_integral(kernel, f)?;
    let t_cut = kernel.tail_horizon(f_norm, tol);
    let trusted = trusted_or_error(kernel, t_cut)?;
    let solution = full.restrict(trusted.0, trusted.1);
    let n = kernel.dim();
    let forcing = |t: f64, _x: &[f64], out: &mut [f64]| f.eval_into(t, out);
    let (residual, residual_at) = ode_residual(kernel.operator(), &full, &forcing, trusted)?;
    let bound = 10.0 * tol;
    if residual > bound {
        return Err(SolverError::Residual {
            residual,
            t: residual_at,
            bound,
        });
    }
    let center_residual = match kernel.mode() {
        KernelMode::WholeLine { .. } => {
            let i = full.index_of(0.0).expect("zero is a node");
            let v = kernel.center_component(&full.sample_vector(i)).unwrap_or(0.0);
            if v > tol {
                return Err(SolverError::Center { value: v, bound: tol });
            }
            Some(v)
        }
        KernelMode::HalfLine { .. } => None,
    };
    debug_assert_eq!(full.dim(), n);
    let c = kernel.constants();
    let report = LinearReport {
        tol,
        f_norm,
        t_cut,
        window: kernel.span(),
        trusted,
        sup_norm: solution.sup_norm(),
        norm_bound: 2.0 * c.n / c.nu * f_norm,
        residual,
        residual_at,
        center_residual,
        nodes: solution.len(),
    };
    Ok(LinearSolution { solution, full, report })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::hyperbolicity::{verify_dichotomy, Constants, TrichotomyCertificate};
    use crate::propagator::CoefficientMatrix;
    use crate::solvers::{FnForcing, ZeroForcing};

    fn diag(v: &[f64]) -> Matrix {
        Matrix::from_diagonal(&nalgebra::DVector::from_vec(v.to_vec()))
    }

    fn saddle_whole(window: f64) -> GreenKernel {
        let op = Arc::new(TransitionOperator::new(CoefficientMatrix::diagonal(&[-1.0, 1.0])));
        let p = diag(&[1.0, 0.0]);
        let q = diag(&[0.0, 1.0]);
        let cert = TrichotomyCertificate::from_projectors(&op, &p, &q, Some(Constants::new(1.0, 1.0)), window).unwrap();
        GreenKernel::whole_line(op, &cert).unwrap()
    }

    fn cosines() -> FnForcing<impl Fn(f64, &mut [f64]) + Sync> {
        FnForcing::new(2, |t: f64, o: &mut [f64]| {
            o[0] = t.cos();
            o[1] = t.cos();
        })
    }

    #[test]
    fn closed_form_saddle() {
        let k = saddle_whole(30.0);
        let sol = solve_linear_bounded(&k, &cosines(), 1e-7).unwrap();
        let g = &sol.solution;
        assert!(g.start() <= -10.0 && g.end() >= 10.0, "{:?}", sol.report);
        let mut err: f64 = 0.0;
        for i in 0..g.len() {
            let t = g.time(i);
            let x = g.sample(i);
            err = err.max((x[0] - (t.cos() + t.sin()) / 2.0).abs());
            err = err.max((x[1] - (t.sin() - t.cos()) / 2.0).abs());
        }
        assert!(err < 1e-6, "{err}");
        assert!(sol.report.residual < 1e-6, "{:?}", sol.report);
        assert!(sol.report.sup_norm <= sol.report.norm_bound);
    }

    #[test]
    fn zero_forcing_gives_zero() {
        let k = saddle_whole(30.0);
        let sol = solve_linear_bounded(&k, &ZeroForcing(2), 1e-7).unwrap();
        assert_eq!(sol.solution.sup_norm(), 0.0);
    }

    #[test]
    fn half_line_saddle() {
        let op = Arc::new(TransitionOperator::new(CoefficientMatrix::diagonal(&[-1.0, 1.0])));
        let cert = verify_dichotomy(&op, &diag(&[1.0, 0.0]), (0.0, 40.0), Constants::new(1.0, 1.0)).unwrap();
        let k = GreenKernel::half_line(op, &cert).unwrap();
        let sol = solve_linear_bounded(&k, &cosines(), 1e-7).unwrap();
        // x1 starts from 0 at t = 0: x1 = (cos t + sin t − e^{−t})/2
        let g = &sol.solution;
        for i in (0..g.len()).step_by(37) {
            let t = g.time(i);
            let want = (t.cos() + t.sin() - (-t).exp()) / 2.0;
            assert!((g.sample(i)[0] - want).abs() < 1e-6, "{t}");
            assert!((g.sample(i)[1] - (t.sin() - t.cos()) / 2.0).abs() < 1e-6, "{t}");
        }
    }

    #[test]
    fn window_too_small_reports_requirement() {
        let k = saddle_whole(10.0);
        match solve_linear_bounded(&k, &cosines(), 1e-7) {
            Err(SolverError::WindowTooSmall { required, t_cut }) => {
                assert!(required > 10.0 && t_cut > 9.0, "{required}");
            }
            other => panic!("{other:?}"),
        }
    }
}
