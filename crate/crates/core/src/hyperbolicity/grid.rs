//! Uniform node grid with one-step transition matrices.

use rayon::prelude::*;

use super::HyperbolicityError;
use crate::linalg::Matrix;
use crate::propagator::TransitionOperator;

/// Default node spacing.
pub const DEFAULT_STEP: f64 = 0.05;

/// Nodes `t_k = origin + k·h` for `k = k_lo ..= k_hi`, with the step maps
/// `Φ_j = Φ(t_{j+1}, t_j)` and their inverses.
#[derive(Debug, Clone)]
pub struct StepGrid {
    origin: f64,
    h: f64,
    k_lo: i64,
    nodes: Vec<f64>,
    steps: Vec<Matrix>,
    inverses: Vec<Matrix>,
}

impl StepGrid {
    pub fn new(
        op: &TransitionOperator,
        origin: f64,
        h: f64,
        k_lo: i64,
        k_hi: i64,
    ) -> Result<Self, HyperbolicityError> {
        assert!(k_hi > k_lo && h > 0.0);
        let nodes: Vec<f64> = (k_lo..=k_hi).map(|k| origin + k as f64 * h).collect();
        let pairs: Vec<(Matrix, Matrix)> = nodes
            .par_windows(2)
            .map(|w| {
                let m = op.transition_matrix(w[0], w[1])?;
                let inv = m
                    .clone()
                    .try_inverse()
                    .ok_or(HyperbolicityError::Singular { t: w[0] })?;
                Ok((m, inv))
            })
            .collect::<Result<_, HyperbolicityError>>()?;
        let (steps, inverses) = pairs.into_iter().unzip();
        Ok(StepGrid {
            origin,
            h,
            k_lo,
            nodes,
            steps,
            inverses,
        })
    }

    /// Step close to `h_max` that divides `span` evenly.
    pub fn fitted_step(span: f64, h_max: f64) -> f64 {
        let n = (span / h_max - 1e-9).ceil().max(1.0);
        span / n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// `Φ(t_{j+1}, t_j)`.
    pub fn step(&self, j: usize) -> &Matrix {
        &self.steps[j]
    }

    /// `Φ(t_j, t_{j+1})`.
    pub fn inverse(&self, j: usize) -> &Matrix {
        &self.inverses[j]
    }

    /// Grid index of `origin + k·h`.
    pub fn index_of(&self, k: i64) -> Option<usize> {
        let j = k - self.k_lo;
        (j >= 0 && (j as usize) < self.nodes.len()).then_some(j as usize)
    }

    /// Index of the node nearest to `t`, clamped to the grid.
    pub fn nearest(&self, t: f64) -> usize {
        let j = ((t - self.nodes[0]) / self.h).round();
        j.clamp(0.0, (self.nodes.len() - 1) as f64) as usize
    }

    /// Index `j` with `t_j ≤ t < t_{j+1}`, clamped to a valid panel.
    pub fn panel_of(&self, t: f64) -> usize {
        let j = ((t - self.nodes[0]) / self.h).floor();
        j.clamp(0.0, (self.nodes.len() - 2) as f64) as usize
    }
}
