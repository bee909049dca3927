use serde::Serialize;

use crate::solvers::GridFunction;

/// Full-window sup may exceed the inner-half sup by this factor and still
/// count as bounded.
const BOUNDED_FACTOR: f64 = 1.25;
const LADDER: u32 = 8;
/// `ω̂(δ₀)/ω̂(δ₃)` above this is far from linear decay (which gives 1/8).
const LINEARITY_RATIO: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagrangeReport {
    pub window: (f64, f64),
    pub sup_norm: f64,
    /// Sup over the middle half of the window.
    pub inner_sup: f64,
    pub bounded: bool,
    /// `δ_k = h · 2^k`.
    pub deltas: Vec<f64>,
    /// `ω̂(δ) = max |φ(t) − φ(s)|` over grid pairs with `|t − s| ≤ δ`.
    pub moduli: Vec<f64>,
    pub continuity_ratio: f64,
    pub continuity_doubtful: bool,
    /// Bounded and uniformly continuous on the sampled window.
    pub lagrange_stable: bool,
}

pub fn lagrange_report(phi: &GridFunction) -> LagrangeReport {
    let (a, b) = phi.window();
    let (c, r) = (0.5 * (a + b), 0.25 * (b - a));
    let sup_norm = phi.sup_norm();
    let inner_sup = phi.sup_norm_on(c - r, c + r);
    let bounded = sup_norm <= BOUNDED_FACTOR * inner_sup || sup_norm == 0.0;
    let n = phi.len();
    let mut deltas = Vec::new();
    let mut moduli = Vec::new();
    let mut omega: f64 = 0.0;
    let mut done = 0usize;
    for k in 0..LADDER {
        let m_max = (1usize << k).min(n.saturating_sub(1));
        for m in done + 1..=m_max {
            for i in 0..n - m {
                let d = phi
                    .sample(i + m)
                    .iter()
                    .zip(phi.sample(i))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                omega = omega.max(d);
            }
        }
        done = done.max(m_max);
        deltas.push(phi.step() * (1u64 << k) as f64);
        moduli.push(omega);
    }
    let continuity_ratio = if moduli[3] > 0.0 { moduli[0] / moduli[3] } else { 0.0 };
    let continuity_doubtful = continuity_ratio > LINEARITY_RATIO;
    LagrangeReport {
        window: (a, b),
        sup_norm,
        inner_sup,
        bounded,
        deltas,
        moduli,
        continuity_ratio,
        continuity_doubtful,
        lagrange_stable: bounded && !continuity_doubtful,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_is_stable() {
        let r = lagrange_report(&GridFunction::sample_scalar(-50.0, 50.0, 0.05, f64::sin));
        assert!(r.bounded && !r.continuity_doubtful && r.lagrange_stable, "{r:?}");
    }

    #[test]
    fn drift_is_unbounded() {
        let r = lagrange_report(&GridFunction::sample_scalar(-50.0, 50.0, 0.05, |t| t));
        assert!(!r.bounded && !r.lagrange_stable);
    }

    #[test]
    fn chirp_is_doubtful() {
        let r = lagrange_report(&GridFunction::sample_scalar(-50.0, 50.0, 0.01, |t| (t * t).sin()));
        assert!(r.bounded && r.continuity_doubtful, "{r:?}");
        assert!(r.moduli[7] > 1.9);
    }
}
