//! Remote periodicity residuals, an almost-period scan, the Bebutov
//! distance and Lagrange stability for a few sampled signals.

use std::f64::consts::PI;

use trichotomy::rap::{almost_period_scan, bebutov_distance, lagrange_report, remote_period_residual, ScanOptions, Tail};
use trichotomy::solvers::GridFunction;

fn main() -> Result<(), trichotomy::Error> {
    let h = 0.01;
    let sine = GridFunction::sample_scalar(-60.0, 60.0, h, f64::sin);
    let atan = GridFunction::sample_scalar(-60.0, 60.0, h, f64::atan);
    println!("sin, tau = 2pi, T = 10: {:.2e}", remote_period_residual(&sine, 2.0 * PI, 10.0, Tail::Both)?);
    println!("atan, tau = 1, T = 10: {:.5}", remote_period_residual(&atan, 1.0, 10.0, Tail::Both)?);

    let quasi = GridFunction::sample_scalar(-150.0, 150.0, 0.05, |t| t.sin() + (2f64.sqrt() * t).sin());
    let rep = almost_period_scan(&quasi, 0.5, &ScanOptions::new((0.5, 100.0), 0.05).with_schedule(&[5.0, 20.0]))?;
    println!(
        "sin t + sin(sqrt2 t), eps 0.5: {} accepted, inclusion length {:?}, dense {}",
        rep.accepted.len(),
        rep.inclusion_length,
        rep.relatively_dense
    );

    let shifted = GridFunction::sample_scalar(-60.0, 60.0, h, |t| (t + 0.1).sin());
    println!("Bebutov distance sin(t) to sin(t + 0.1): {:.4}", bebutov_distance(&sine, &shifted, None)?);

    let ramp = GridFunction::sample_scalar(-60.0, 60.0, h, |t| t * t.sin());
    for (name, g) in [("sin", &sine), ("t sin t", &ramp)] {
        let l = lagrange_report(g);
        println!("{name}: bounded {}, continuity ratio {:.3}, stable {}", l.bounded, l.continuity_ratio, l.lagrange_stable);
    }
    Ok(())
}
