//! Probe for `x' = x − ε e^{−|t|} x³`.
//!
//! With `w = x⁻²` the equation becomes `w' = −2w + 2ε e^{−|t|}`, whose
//! solution decaying at `−∞` gives the nonzero candidates `±q_ε`,
//! `q_ε(t) = (2ε ∫_{−∞}^t e^{−2(t−τ)} e^{−|τ|} dτ)^{−1/2}`.

use rayon::prelude::*;
use serde::Serialize;

use super::grid_function::GridFunction;
use super::quadrature::integrate;
use super::SolverError;
use crate::propagator::dopri::{self, Options};
use crate::propagator::Tolerances;

/// Lower cut of the inner integral below `min(t, 0)`.
const TAIL: f64 = 40.0;
const PANEL: f64 = 0.5;
const CROSS_CHECK: (f64, f64) = (-5.0, 5.0);
const RESIDUAL_STEP: f64 = 0.01;
const SUP_STEP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct C1SupRow {
    pub window: f64,
    /// `max_{|t| ≤ T} q_ε(t)` on the sampling grid.
    pub sup: f64,
    pub sup_at: f64,
    pub closed_form: f64,
    /// `Δ ln sup / ΔT` against the previous row.
    pub growth_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct C1Probe {
    pub eps: f64,
    pub window: f64,
    /// `q_ε(−2)` by quadrature and in closed form.
    pub q_minus2: f64,
    pub q_minus2_closed: f64,
    /// `max |q_quad − q_ode|` on the cross-check window.
    pub cross_check_error: f64,
    pub cross_check_window: (f64, f64),
    /// `max |q_quad − q_closed|` on the cross-check window.
    pub closed_form_error: f64,
    pub sup_table: Vec<C1SupRow>,
    /// Residuals of `0`, `q_ε`, `−q_ε` in the equation.
    pub zero_residual: f64,
    pub q_residual: f64,
    pub neg_q_residual: f64,
    /// Samples of `q_ε` on `[−T, T]`.
    #[serde(skip)]
    pub q: GridFunction,
}

fn p(t: f64) -> f64 {
    (-t.abs()).exp()
}

fn rhs(eps: f64, t: f64, x: f64) -> f64 {
    x - eps * p(t) * x * x * x
}

/// `∫_{−∞}^t e^{−2(t−τ)} e^{−|τ|} dτ` by composite Gauss–Legendre.
fn inner_integral(t: f64) -> Result<f64, SolverError> {
    let kernel = |tau: f64| (-2.0 * (t - tau) - tau.abs()).exp();
    let mid = t.min(0.0);
    let lo = mid - TAIL;
    let mut v = integrate(lo, mid, PANEL, kernel);
    if t > 0.0 {
        v += integrate(0.0, t, PANEL, kernel);
    }
    // beyond `lo` the integrand is e^{3τ − 2t}, so the tail is kernel(lo)/3
    let tail = kernel(lo) / 3.0;
    if !(v > 0.0) || !v.is_finite() || tail > 1e-14 * v {
        return Err(SolverError::QuadratureTail { t });
    }
    Ok(v)
}

/// `q_ε(t)` from the quadrature of the inner integral.
pub(crate) fn q_quadrature(eps: f64, t: f64) -> Result<f64, SolverError> {
    Ok((2.0 * eps * inner_integral(t)?).powf(-0.5))
}

/// `q_ε(t)` from the piecewise closed form of the inner integral.
pub(crate) fn q_closed(eps: f64, t: f64) -> f64 {
    let i = if t <= 0.0 {
        t.exp() / 3.0
    } else {
        (-t).exp() - (2.0 / 3.0) * (-2.0 * t).exp()
    };
    (2.0 * eps * i).powf(-0.5)
}

/// `q_ε` on `[a, b]` from `w' = −2w + 2εe^{−|t|}`, `w(−40) = 0`, split at
/// the kink `t = 0`.
fn q_bernoulli(eps: f64, a: f64, b: f64, h: f64) -> Result<GridFunction, SolverError> {
    let tol = Tolerances {
        rtol: 1e-12,
        atol: 1e-24,
    };
    let f = |t: f64, w: &[f64], out: &mut [f64]| {
        out[0] = -2.0 * w[0] + 2.0 * eps * p(t);
        Ok(())
    };
    let start = a.min(0.0) - TAIL;
    let mut segments = Vec::new();
    let mut w = vec![0.0];
    let mut t = start;
    for end in [0.0f64.min(b), b] {
        if end <= t {
            continue;
        }
        let out = dopri::integrate(
            f,
            t,
            end,
            &w,
            tol,
            Options {
                dense: true,
                ..Options::default()
            },
        )?;
        w = out.y;
        t = end;
        segments.extend(out.segments);
    }
    let n = ((b - a) / h).round() as usize;
    let step = (b - a) / n as f64;
    let mut data = Vec::with_capacity(n + 1);
    let mut buf = [0.0];
    for i in 0..=n {
        let s = a + i as f64 * step;
        let seg = segments
            .iter()
            .find(|g| g.contains(s))
            .ok_or(SolverError::OutsideWindow { t: s, a, b })?;
        seg.eval(s, &mut buf);
        data.push(buf[0].powf(-0.5));
    }
    Ok(GridFunction::new(a, step, 1, data))
}

fn sampled(eps: f64, a: f64, b: f64, h: f64) -> Result<GridFunction, SolverError> {
    let n = ((b - a) / h).round() as usize;
    let step = (b - a) / n as f64;
    let data = (0..=n)
        .into_par_iter()
        .map(|i| q_quadrature(eps, a + i as f64 * step))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GridFunction::new(a, step, 1, data))
}

/// `max |x' − x + εp x³|` with sixth-order differences, skipping stencils
/// that straddle the kink at 0.
fn residual(eps: f64, x: &GridFunction) -> f64 {
    const W: [f64; 7] = [-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0];
    let h = x.step();
    let mut max: f64 = 0.0;
    for i in 3..x.len().saturating_sub(3) {
        let (lo, hi) = (x.time(i - 3), x.time(i + 3));
        if lo < -1e-12 && hi > 1e-12 {
            continue;
        }
        let d: f64 = (0..7).map(|m| W[m] * x.sample(i + m - 3)[0]).sum::<f64>() / (60.0 * h);
        let t = x.time(i);
        let v = x.sample(i)[0];
        max = max.max((d - rhs(eps, t, v)).abs());
    }
    max
}

/// Evaluates `q_ε`, cross-checks it and tabulates its growth on
/// `[−T, T]` for `T = 5, 10, 20, …` up to `window`.
pub fn example_c1_probe(eps: f64, window: f64) -> Result<C1Probe, SolverError> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(SolverError::Invalid(format!("epsilon must be positive, got {eps}")));
    }
    if !(window >= CROSS_CHECK.1) {
        return Err(SolverError::Invalid(format!("window must be at least {}, got {window}", CROSS_CHECK.1)));
    }
    let (a, b) = CROSS_CHECK;
    let quad = sampled(eps, a, b, RESIDUAL_STEP)?;
    let ode = q_bernoulli(eps, a, b, RESIDUAL_STEP)?;
    let cross_check_error = quad.distance(&ode)?;
    let closed_form_error = (0..quad.len())
        .map(|i| (quad.sample(i)[0] - q_closed(eps, quad.time(i))).abs())
        .fold(0.0, f64::max);
    let q_residual = residual(eps, &quad);
    let neg_q_residual = residual(eps, &quad.scaled(-1.0));
    let zero = GridFunction::zeros(a, quad.step(), quad.len(), 1);
    let zero_residual = residual(eps, &zero);

    let q = sampled(eps, -window, window, SUP_STEP)?;
    let mut windows = vec![];
    let mut w = 5.0;
    while w <= window + 1e-9 {
        windows.push(w);
        w *= 2.0;
    }
    if windows.last().is_none_or(|&last| last < window - 1e-9) {
        windows.push(window);
    }
    let mut sup_table: Vec<C1SupRow> = Vec::new();
    for &t in &windows {
        let (mut sup, mut sup_at) = (0.0, 0.0);
        for i in 0..q.len() {
            let s = q.time(i);
            if s.abs() <= t + 1e-9 && q.sample(i)[0] > sup {
                sup = q.sample(i)[0];
                sup_at = s;
            }
        }
        let growth_rate = sup_table
            .last()
            .map(|prev| (sup.ln() - prev.sup.ln()) / (t - prev.window));
        sup_table.push(C1SupRow {
            window: t,
            sup,
            sup_at,
            closed_form: q_closed(eps, -t).max(q_closed(eps, t)),
            growth_rate,
        });
    }
    Ok(C1Probe {
        eps,
        window,
        q_minus2: q_quadrature(eps, -2.0)?,
        q_minus2_closed: q_closed(eps, -2.0),
        cross_check_error,
        cross_check_window: CROSS_CHECK,
        closed_form_error,
        sup_table,
        zero_residual,
        q_residual,
        neg_q_residual,
        q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_on_both_sides() {
        for &t in &[-7.0, -2.0, -0.3, 0.0, 0.4, 3.0, 9.0] {
            let a = q_quadrature(1.0, t).unwrap();
            let b = q_closed(1.0, t);
            assert!((a - b).abs() <= 1e-12 * b, "{t}: {a} vs {b}");
        }
        assert!((q_closed(1.0, -2.0) - 1.5f64.sqrt() * std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn probe_values() {
        let p = example_c1_probe(1.0, 20.0).unwrap();
        assert!((p.q_minus2 - 3.3292).abs() < 1e-3);
        assert!(p.cross_check_error < 1e-5, "{}", p.cross_check_error);
        assert!(p.q_residual < 1e-6 && p.neg_q_residual < 1e-6, "{} {}", p.q_residual, p.neg_q_residual);
        assert_eq!(p.zero_residual, 0.0);
        let ws: Vec<f64> = p.sup_table.iter().map(|r| r.window).collect();
        assert_eq!(ws, vec![5.0, 10.0, 20.0]);
        for r in &p.sup_table[1..] {
            assert!((r.growth_rate.unwrap() - 0.5).abs() < 1e-6);
        }
    }
}
