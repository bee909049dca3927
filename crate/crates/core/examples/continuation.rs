//! Deviation of the semilinear solution from the linear one as the
//! nonlinearity eps sin x is switched off.

use std::sync::Arc;

use trichotomy::hyperbolicity::{Constants, GreenKernel, TrichotomyCertificate};
use trichotomy::linalg::Matrix;
use trichotomy::propagator::{CoefficientMatrix, TransitionOperator};
use trichotomy::solvers::{epsilon_continuation, FnForcing, LipschitzSpec};

fn main() -> Result<(), trichotomy::Error> {
    let op = Arc::new(TransitionOperator::new(CoefficientMatrix::diagonal(&[-1.0])));
    let cert = TrichotomyCertificate::from_projectors(
        &op,
        &Matrix::identity(1, 1),
        &Matrix::zeros(1, 1),
        Some(Constants::new(1.0, 1.0)),
        80.0,
    )?;
    let kernel = GreenKernel::whole_line(op, &cert)?;
    let f = FnForcing::new(1, |_t: f64, out: &mut [f64]| out[0] = 0.5);
    let spec = LipschitzSpec::parse(&["sin(x1)"], 1.0)?;

    let rep = epsilon_continuation(&kernel, &f, &spec, &[0.4, 0.2, 0.1, 0.05], 1e-7)?;
    println!("{:>6} {:>14} {:>14} {:>6}", "eps", "deviation", "bound", "iter");
    for s in &rep.steps {
        println!("{:>6} {:>14.6e} {:>14.6e} {:>6}", s.eps, s.deviation, s.bound, s.iterations);
    }
    println!("monotone {}, within bounds {}", rep.monotone, rep.within_bounds);
    Ok(())
}
