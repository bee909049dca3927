//! Recover the trichotomy projectors of diag(-1, 1, -tanh t).

use trichotomy::hyperbolicity::{build_trichotomy, TrichotomyOutcome};
use trichotomy::propagator::{CoefficientMatrix, TransitionOperator};

fn main() -> Result<(), trichotomy::Error> {
    let a = CoefficientMatrix::parse(&[vec!["-1", "0", "0"], vec!["0", "1", "0"], vec!["0", "0", "-tanh(t)"]])?;
    let op = TransitionOperator::new(a);
    let TrichotomyOutcome::Certified(c) = build_trichotomy(&op, 30.0)? else {
        println!("projections incompatible");
        return Ok(());
    };
    println!("P = {:.6}", c.p);
    println!("Q = {:.6}", c.q);
    println!("center rank {}, N = {:.4}, nu = {:.4}", c.report.center_dim, c.constants.n, c.constants.nu);
    println!(
        "|PQ - QP| = {:.2e}, |P + Q - PQ - I| = {:.2e}, max |PiPj| = {:.2e}",
        c.report.commutator, c.report.identity_residual, c.report.orthogonality
    );
    Ok(())
}
