//! x' = x - eps e^{-|t|} x^3: the bounded solution q of the Bernoulli
//! reduction and the growth of sup |q| with the window.

use trichotomy::solvers::example_c1_probe;

fn main() -> Result<(), trichotomy::Error> {
    let probe = example_c1_probe(1.0, 20.0)?;
    println!("q(-2) = {:.6}, closed form {:.6}", probe.q_minus2, probe.q_minus2_closed);
    println!(
        "forward-integration cross-check on [{}, {}]: {:.2e}",
        probe.cross_check_window.0, probe.cross_check_window.1, probe.cross_check_error
    );
    println!("residuals: 0 -> {:.1e}, q -> {:.1e}, -q -> {:.1e}", probe.zero_residual, probe.q_residual, probe.neg_q_residual);
    println!("{:>6} {:>14} {:>8} {:>8}", "T", "sup |q|", "at", "rate");
    for row in &probe.sup_table {
        let rate = row.growth_rate.map(|g| format!("{g:.4}")).unwrap_or_default();
        println!("{:>6} {:>14.6e} {:>8.2} {:>8}", row.window, row.sup, row.sup_at, rate);
    }
    Ok(())
}
