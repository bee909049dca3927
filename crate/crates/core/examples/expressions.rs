//! Parse coefficient expressions and evaluate them at a point.

use std::collections::BTreeMap;

use trichotomy::expr::{parse, parse_with_params, Point};

fn main() -> Result<(), trichotomy::Error> {
    let a = parse("atan(t)")?;
    println!("{a} at t = 1: {:.10}", a.eval(&Point::at(1.0))?);

    let params = BTreeMap::from([("eps".to_string(), 0.5)]);
    let g = parse_with_params("-eps*exp(-abs(t))*x1^3", &params)?;
    println!("{g} at (t, x1) = (0, 2): {}", g.eval(&Point::new(0.0, &[2.0]))?);
    println!("free variables: {:?}", g.free_vars());

    match parse("sin(t") {
        Ok(_) => unreachable!(),
        Err(e) => println!("error at byte {}: {e}", e.offset()),
    }
    Ok(())
}
