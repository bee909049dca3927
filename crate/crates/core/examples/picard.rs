//! Picard iteration for x' = -x + 0.5 + 0.1 sin x, a contraction with
//! alpha = 2NL/nu = 0.2.

use std::sync::Arc;

use trichotomy::hyperbolicity::{Constants, GreenKernel, TrichotomyCertificate};
use trichotomy::linalg::Matrix;
use trichotomy::propagator::{CoefficientMatrix, TransitionOperator};
use trichotomy::solvers::{picard_solve, picard_solve_from, FnForcing, GridFunction, LipschitzSpec, PicardOptions};

fn main() -> Result<(), trichotomy::Error> {
    let op = Arc::new(TransitionOperator::new(CoefficientMatrix::diagonal(&[-1.0])));
    let one = Matrix::identity(1, 1);
    let zero = Matrix::zeros(1, 1);
    let cert = TrichotomyCertificate::from_projectors(&op, &one, &zero, Some(Constants::new(1.0, 1.0)), 40.0)?;
    let kernel = GreenKernel::whole_line(op, &cert)?;

    let f = FnForcing::new(1, |_t: f64, out: &mut [f64]| out[0] = 0.5);
    let spec = LipschitzSpec::parse(&["0.1*sin(x1)"], 0.1)?.validated(kernel.span())?;
    let sol = picard_solve(&kernel, &f, &spec, 1e-7, 200)?;
    let r = &sol.report;
    println!("iterations {}, ratios {:.4?}", r.iterations, r.ratios);
    println!("alpha = {:.3}, |phi - phi0| = {:.6} <= r = {:.3}", r.alpha, r.deviation, r.r);
    println!("phi(0) = {:.6}", sol.solution.eval(0.0)?[0]);

    let (a, b) = sol.full.window();
    let start = GridFunction::from_fn(a, sol.full.step(), sol.full.len(), 1, |t, out| out[0] = 3.0 * t.sin());
    let opts = PicardOptions {
        tol: 1e-7,
        max_iter: 200,
        initial: Some(start),
    };
    let other = picard_solve_from(&kernel, &f, &spec, &opts)?;
    println!("from another initial guess on [{a}, {b}]: difference {:.2e}", other.solution.distance(&sol.solution)?);
    Ok(())
}
