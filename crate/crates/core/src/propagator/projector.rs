//! Transport of a projector along the flow, `P(t) = Φ(t,0) P₀ Φ(0,t)`.

use serde::Serialize;

use super::{integrate, Options, PropagatorError, TransitionOperator};
use crate::linalg::{idempotency_defect, op_norm, Matrix};

/// Accepted steps between idempotency restorations.
pub const RESTORATION_CADENCE: usize = 10;

const DIVERGENCE_DEFECT: f64 = 1e-3;

/// Projector samples on a time grid.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectorPath {
    times: Vec<f64>,
    #[serde(serialize_with = "ser_mats")]
    samples: Vec<Matrix>,
}

fn ser_mats<S: serde::Serializer>(m: &[Matrix], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.len()))?;
    for x in m {
        seq.serialize_element(&crate::linalg::matrix_to_rows(x))?;
    }
    seq.end()
}

impl ProjectorPath {
    /// Times must be strictly increasing and match `samples` in length.
    pub fn from_samples(times: Vec<f64>, samples: Vec<Matrix>) -> Self {
        assert_eq!(times.len(), samples.len());
        debug_assert!(times.windows(2).all(|w| w[0] < w[1]));
        ProjectorPath { times, samples }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn samples(&self) -> &[Matrix] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Sample at a grid time (exact match), if present.
    pub fn at(&self, t: f64) -> Option<&Matrix> {
        self.times
            .binary_search_by(|s| s.total_cmp(&t))
            .ok()
            .map(|i| &self.samples[i])
    }

    /// Index of the last sample at or before `t`.
    pub fn floor_index(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// `max ‖P(t)‖` over the samples.
    pub fn max_norm(&self) -> f64 {
        self.samples.iter().map(op_norm).fold(0.0, f64::max)
    }

    pub fn max_idempotency_defect(&self) -> f64 {
        self.samples.iter().map(idempotency_defect).fold(0.0, f64::max)
    }

    /// `max_t ‖Φ(t,t₀) P(t₀) − P(t) Φ(t,t₀)‖ / ‖Φ(t,t₀)‖` with `t₀` the first sample.
    pub fn intertwining_residual(&self, op: &TransitionOperator) -> Result<f64, PropagatorError> {
        let Some(&t0) = self.times.first() else {
            return Ok(0.0);
        };
        let p0 = &self.samples[0];
        let mut worst = 0.0f64;
        for (t, p) in self.times.iter().zip(&self.samples) {
            let phi = op.transition_matrix(t0, *t)?;
            let r = op_norm(&(&phi * p0 - p * &phi)) / op_norm(&phi);
            worst = worst.max(r);
        }
        Ok(worst)
    }
}

/// `P ← 3P² − 2P³`.
pub(crate) fn restore(p: &mut Matrix) {
    let p2 = &*p * &*p;
    let p3 = &p2 * &*p;
    *p = p2 * 3.0 - p3 * 2.0;
}

/// Integrates `P' = A(t)P − P A(t)` from `P(0) = P₀` to each grid time,
/// restoring idempotency every [`RESTORATION_CADENCE`] accepted steps.
///
/// The grid may contain negative times; `0` need not be a grid point.
pub fn transport_projector(
    op: &TransitionOperator,
    p0: &Matrix,
    grid: &[f64],
) -> Result<ProjectorPath, PropagatorError> {
    let n = op.dim();
    if p0.nrows() != n || p0.ncols() != n {
        return Err(PropagatorError::Dimension {
            expected: n,
            got: p0.nrows(),
        });
    }
    let defect = idempotency_defect(p0);
    if defect > 1e-10 {
        return Err(PropagatorError::NotIdempotent { defect });
    }
    let mut times = grid.to_vec();
    times.sort_by(f64::total_cmp);
    times.dedup();

    let split = times.partition_point(|&t| t < 0.0);
    let mut samples: Vec<Option<Matrix>> = vec![None; times.len()];
    // forward over t ≥ 0, then backward over t < 0
    let forward: Vec<usize> = (split..times.len()).collect();
    let backward: Vec<usize> = (0..split).rev().collect();
    for order in [forward, backward] {
        let mut state = p0.clone();
        let mut t = 0.0;
        let mut steps = 0usize;
        for idx in order {
            let target = times[idx];
            state = transport_segment(op, &state, t, target, &mut steps)?;
            t = target;
            samples[idx] = Some(state.clone());
        }
    }
    let samples = samples.into_iter().map(|s| s.expect("filled")).collect();
    Ok(ProjectorPath::from_samples(times, samples))
}

fn transport_segment(
    op: &TransitionOperator,
    p: &Matrix,
    from: f64,
    to: f64,
    steps: &mut usize,
) -> Result<Matrix, PropagatorError> {
    if from == to {
        return Ok(p.clone());
    }
    let n = op.dim();
    let mut a = Matrix::zeros(n, n);
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        op.system()
            .matrix_into(t, &mut a)
            .map_err(|source| PropagatorError::Coefficient { t, source })?;
        let pm = Matrix::from_column_slice(n, n, y);
        let d = &a * &pm - &pm * &a;
        dy.copy_from_slice(d.as_slice());
        Ok(())
    };
    let mut hook = |t: f64, y: &mut [f64]| -> Result<bool, PropagatorError> {
        *steps += 1;
        if *steps % RESTORATION_CADENCE != 0 {
            return Ok(false);
        }
        let mut pm = Matrix::from_column_slice(n, n, y);
        let before = idempotency_defect(&pm);
        if !before.is_finite() || before > DIVERGENCE_DEFECT {
            return Err(PropagatorError::RestorationDiverged { t, defect: before });
        }
        restore(&mut pm);
        let after = idempotency_defect(&pm);
        if after > before.max(1e-12) {
            return Err(PropagatorError::RestorationDiverged { t, defect: after });
        }
        y.copy_from_slice(pm.as_slice());
        Ok(true)
    };
    let out = integrate(
        rhs,
        from,
        to,
        p.as_slice(),
        op.tolerances(),
        Options {
            hook: Some(&mut hook),
            ..Options::default()
        },
    )?;
    let mut pm = Matrix::from_vec(n, n, out.y);
    let defect = idempotency_defect(&pm);
    if !defect.is_finite() || defect > DIVERGENCE_DEFECT {
        return Err(PropagatorError::RestorationDiverged { t: to, defect });
    }
    restore(&mut pm);
    Ok(pm)
}
