//! Green kernel of a rotation-conjugated saddle: the unit jump on the
//! diagonal and covariance under time shifts.

use std::sync::Arc;

use trichotomy::hyperbolicity::{build_trichotomy, green_shift_check, GreenKernel, Side, TrichotomyOutcome};
use trichotomy::linalg::{op_norm, Matrix};
use trichotomy::propagator::{CoefficientMatrix, TransitionOperator};

fn main() -> Result<(), trichotomy::Error> {
    let a = CoefficientMatrix::parse(&[vec!["-cos(t)", "-sin(t) - 0.5"], vec!["0.5 - sin(t)", "cos(t)"]])?;
    let op = Arc::new(TransitionOperator::new(a));
    let TrichotomyOutcome::Certified(c) = build_trichotomy(&op, 30.0)? else {
        unreachable!("the saddle is hyperbolic");
    };
    let g = GreenKernel::whole_line(op, &c)?;
    let id = Matrix::identity(2, 2);
    for tau in [-7.3, -1.0, 0.0, 2.5, 11.0] {
        let jump = g.matrix(tau, tau, Some(Side::Plus))? - g.matrix(tau, tau, Some(Side::Minus))?;
        println!("tau = {tau:>5}: |G(tau+, tau) - G(tau-, tau) - I| = {:.2e}", op_norm(&(jump - &id)));
    }
    let far = op_norm(&g.matrix(10.0, 0.0, None)?);
    println!("|G(10, 0)| = {far:.3e} <= N e^(-10 nu) = {:.3e}", c.constants.bound(10.0));

    let times: Vec<f64> = (-4..=4).map(|k| 1.5 * k as f64).collect();
    let shift = green_shift_check(&g, 0.75, &times)?;
    println!("shift covariance residual {:.2e} over {} pairs", shift.max_residual, shift.pairs);
    Ok(())
}
