use super::RapError;
use crate::solvers::GridFunction;

const L_POINTS: usize = 50;
const L_MIN: f64 = 0.1;

/// Logarithmic grid from 0.1 to the half-width `max(|a|, |b|)` of the window.
pub fn default_l_grid(window: (f64, f64)) -> Vec<f64> {
    let hw = window.0.abs().max(window.1.abs());
    if hw <= L_MIN {
        return vec![hw.max(f64::MIN_POSITIVE)];
    }
    let (lo, hi) = (L_MIN.ln(), hw.ln());
    (0..L_POINTS)
        .map(|k| (lo + (hi - lo) * k as f64 / (L_POINTS - 1) as f64).exp())
        .collect()
}

/// `sup_L min(max_{|t| ≤ L} |φ(t) − ψ(t)|, 1/L)` over the grid samples.
/// `l_grid = None` uses [`default_l_grid`].
pub fn bebutov_distance(phi: &GridFunction, psi: &GridFunction, l_grid: Option<&[f64]>) -> Result<f64, RapError> {
    let same = phi.dim() == psi.dim()
        && phi.len() == psi.len()
        && (phi.start() - psi.start()).abs() <= 1e-9 * phi.step()
        && (phi.step() - psi.step()).abs() <= 1e-12 * phi.step();
    if !same {
        return Err(RapError::GridMismatch);
    }
    let default;
    let ls = match l_grid {
        Some(g) => g,
        None => {
            default = default_l_grid(phi.window());
            &default
        }
    };
    if ls.iter().any(|&l| !(l > 0.0)) {
        return Err(RapError::Invalid("L grid must be positive".into()));
    }
    // samples ordered by |t|, with running max of the pointwise distance
    let mut pts: Vec<(f64, f64)> = (0..phi.len())
        .map(|i| {
            let d = phi
                .sample(i)
                .iter()
                .zip(psi.sample(i))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            (phi.time(i).abs(), d)
        })
        .collect();
    pts.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut running = Vec::with_capacity(pts.len());
    let mut m: f64 = 0.0;
    for &(_, d) in &pts {
        m = m.max(d);
        running.push(m);
    }
    let slack = 1e-9 * phi.step();
    let mut best: f64 = 0.0;
    for &l in ls {
        let k = pts.partition_point(|p| p.0 <= l + slack);
        let sup = if k == 0 { 0.0 } else { running[k - 1] };
        best = best.max(sup.min(1.0 / l));
    }
    Ok(best)
}
