//! Certify exponential dichotomies on half-lines, and watch the scalar
//! equation x' = atan(t) x split on each side but not across zero.

use trichotomy::hyperbolicity::{build_trichotomy, certify_dichotomy, certify_left_dichotomy, TrichotomyOutcome};
use trichotomy::propagator::{CoefficientMatrix, TransitionOperator};

fn main() -> Result<(), trichotomy::Error> {
    let saddle = TransitionOperator::new(CoefficientMatrix::diagonal(&[-1.0, 1.0]));
    let c = certify_dichotomy(&saddle, (0.0, 20.0))?;
    println!("saddle on [0, 20]: N = {:.4}, nu = {:.4}", c.constants.n, c.constants.nu);
    println!("P = {:.4}", c.projector);
    println!("{}", c.report);

    let op = TransitionOperator::new(CoefficientMatrix::parse(&[vec!["atan(t)"]])?);
    let right = certify_dichotomy(&op, (0.0, 50.0))?;
    let left = certify_left_dichotomy(&op, (-50.0, 0.0))?;
    println!("atan, right half: P = {:.3}", right.projector[(0, 0)]);
    println!("atan, left half:  P = {:.3}", left.projector[(0, 0)]);
    match build_trichotomy(&op, 50.0)? {
        TrichotomyOutcome::Certified(_) => println!("unexpected trichotomy"),
        TrichotomyOutcome::Incompatible(r) => {
            println!("no trichotomy: compatibility residual {:.3}", r.compatibility_residual)
        }
    }
    Ok(())
}
