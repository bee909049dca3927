//! Bounded solution of x' = diag(-1, 1) x + (cos t, cos t).

use std::sync::Arc;

use trichotomy::hyperbolicity::{build_trichotomy, GreenKernel, TrichotomyOutcome};
use trichotomy::propagator::{CoefficientMatrix, TransitionOperator};
use trichotomy::solvers::{solve_linear_bounded, FnForcing};

fn main() -> Result<(), trichotomy::Error> {
    let op = Arc::new(TransitionOperator::new(CoefficientMatrix::diagonal(&[-1.0, 1.0])));
    let TrichotomyOutcome::Certified(c) = build_trichotomy(&op, 30.0)? else {
        unreachable!();
    };
    let kernel = GreenKernel::whole_line(op, &c)?;
    let f = FnForcing::new(2, |t: f64, out: &mut [f64]| {
        out[0] = t.cos();
        out[1] = t.cos();
    });
    let sol = solve_linear_bounded(&kernel, &f, 1e-7)?;
    let phi = &sol.solution;

    let mut err = 0.0f64;
    for i in 0..phi.len() {
        let t = phi.time(i);
        let x = phi.sample(i);
        err = err
            .max((x[0] - (t.cos() + t.sin()) / 2.0).abs())
            .max((x[1] - (t.sin() - t.cos()) / 2.0).abs());
    }
    let r = &sol.report;
    println!("trusted window [{:.2}, {:.2}], truncation horizon {:.2}", r.trusted.0, r.trusted.1, r.t_cut);
    println!("phi(0) = {:.8?}", phi.eval(0.0)?.as_slice());
    println!("max error against the closed form: {err:.2e}");
    println!("sup |phi| = {:.5} <= 2N/nu |f| = {:.5}", r.sup_norm, r.norm_bound);
    println!("ODE residual {:.2e}", r.residual);
    Ok(())
}
