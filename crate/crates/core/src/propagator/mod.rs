//! Cauchy (transition) operator of `x' = A(t) x`.
//!
//! [`TransitionOperator`] integrates the homogeneous equation with an
//! adaptive Dormand–Prince 5(4) pair. Matrices for repeated intervals are
//! cached; the cache is safe to read and fill from several threads because
//! a given interval always produces the same matrix.

pub(crate) mod dopri;
mod projector;

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrixView, DMatrixViewMut};
use thiserror::Error;

use crate::expr::{self, EvalError, Expr, ParseError, Point};
use crate::linalg::{Matrix, Vector};

pub use dopri::{DenseSegment, Tolerances};
pub(crate) use dopri::{integrate, Options};
pub use projector::{transport_projector, ProjectorPath, RESTORATION_CADENCE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropagatorError {
    #[error("step size underflow at t = {t} (stiff or blowing-up solution)")]
    StepSizeUnderflow { t: f64 },
    #[error("step limit exceeded at t = {t}")]
    TooManySteps { t: f64 },
    #[error("coefficient evaluation failed at t = {t}: {source}")]
    Coefficient { t: f64, source: EvalError },
    #[error("projector restoration diverged at t = {t} (idempotency defect {defect:e})")]
    RestorationDiverged { t: f64, defect: f64 },
    #[error("projector is not idempotent (defect {defect:e})")]
    NotIdempotent { defect: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("time {t} lies outside the trajectory [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoefficientError {
    #[error("entry ({row}, {col}): {source}")]
    Parse {
        row: usize,
        col: usize,
        source: ParseError,
    },
    #[error("entry ({row}, {col}) depends on `{var}`; coefficients may only use `t`")]
    StateDependent { row: usize, col: usize, var: String },
    #[error("expected {expected} entries, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("dimension must be at least 1")]
    Empty,
}

/// Anything that can produce the coefficient matrix `A(t)`.
pub trait LinearSystem: Send + Sync {
    fn dim(&self) -> usize;
    fn matrix_into(&self, t: f64, out: &mut Matrix) -> Result<(), EvalError>;

    fn matrix(&self, t: f64) -> Result<Matrix, EvalError> {
        let n = self.dim();
        let mut m = Matrix::zeros(n, n);
        self.matrix_into(t, &mut m)?;
        Ok(m)
    }
}

/// `n × n` matrix of expressions in `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    dim: usize,
    entries: Vec<Expr>,
}

impl CoefficientMatrix {
    /// Builds from row-major expressions; rejects state-dependent entries.
    pub fn new(dim: usize, entries: Vec<Expr>) -> Result<Self, CoefficientError> {
        if dim == 0 {
            return Err(CoefficientError::Empty);
        }
        if entries.len() != dim * dim {
            return Err(CoefficientError::Shape {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        for (k, e) in entries.iter().enumerate() {
            if let Some(var) = e.free_vars().into_iter().find(|v| v != "t") {
                return Err(CoefficientError::StateDependent {
                    row: k / dim,
                    col: k % dim,
                    var,
                });
            }
        }
        Ok(CoefficientMatrix { dim, entries })
    }

    /// Parses row-major strings, e.g. `&[&["0", "1"], &["-1", "0"]]`.
    pub fn parse<S: AsRef<str>>(rows: &[Vec<S>]) -> Result<Self, CoefficientError> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(CoefficientError::Shape {
                    expected: dim,
                    got: row.len(),
                });
            }
            for (j, s) in row.iter().enumerate() {
                entries.push(expr::parse(s.as_ref()).map_err(|source| CoefficientError::Parse {
                    row: i,
                    col: j,
                    source,
                })?);
            }
        }
        CoefficientMatrix::new(dim, entries)
    }

    /// Constant diagonal matrix.
    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let entries = (0..n * n)
            .map(|k| {
                if k / n == k % n {
                    Expr::Num(values[k / n])
                } else {
                    Expr::Num(0.0)
                }
            })
            .collect();
        CoefficientMatrix::new(n, entries).expect("constant entries")
    }

    /// Constant matrix.
    pub fn constant(m: &Matrix) -> Self {
        let n = m.nrows();
        let entries = (0..n * n).map(|k| Expr::Num(m[(k / n, k % n)])).collect();
        CoefficientMatrix::new(n, entries).expect("constant entries")
    }

    pub fn entry(&self, row: usize, col: usize) -> &Expr {
        &self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[Expr] {
        &self.entries
    }

    /// `A^h(t) = A(t + h)`.
    pub fn shifted(&self, h: f64) -> Self {
        CoefficientMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|e| e.shift_time(h)).collect(),
        }
    }

    pub fn trace_at(&self, t: f64) -> Result<f64, EvalError> {
        (0..self.dim)
            .map(|i| self.entry(i, i).eval(&Point::at(t)))
            .sum()
    }
}

impl LinearSystem for CoefficientMatrix {
    fn dim(&self) -> usize {
        self.dim
    }

    fn matrix_into(&self, t: f64, out: &mut Matrix) -> Result<(), EvalError> {
        let p = Point::at(t);
        for (k, e) in self.entries.iter().enumerate() {
            out[(k / self.dim, k % self.dim)] = e.eval(&p)?;
        }
        Ok(())
    }
}

/// Wraps a closure as a [`LinearSystem`].
pub struct FnSystem<F> {
    dim: usize,
    f: F,
}

impl<F> FnSystem<F>
where
    F: Fn(f64) -> Matrix + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnSystem { dim, f }
    }
}

impl<F> LinearSystem for FnSystem<F>
where
    F: Fn(f64) -> Matrix + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn matrix_into(&self, t: f64, out: &mut Matrix) -> Result<(), EvalError> {
        out.copy_from(&(self.f)(t));
        Ok(())
    }
}

/// Matrix-valued dense output of `Y' = A(t) Y` over one interval.
#[derive(Debug, Clone)]
pub struct MatrixTrajectory {
    rows: usize,
    cols: usize,
    from: f64,
    to: f64,
    end: Matrix,
    segments: Vec<DenseSegment>,
}

impl MatrixTrajectory {
    pub fn end(&self) -> &Matrix {
        &self.end
    }

    pub fn span(&self) -> (f64, f64) {
        (self.from, self.to)
    }

    pub fn eval(&self, t: f64) -> Result<Matrix, PropagatorError> {
        let (lo, hi) = if self.from <= self.to {
            (self.from, self.to)
        } else {
            (self.to, self.from)
        };
        if t < lo - 1e-12 || t > hi + 1e-12 {
            return Err(PropagatorError::OutOfRange { t, lo, hi });
        }
        if t == self.to {
            return Ok(self.end.clone());
        }
        let idx = self
            .segments
            .partition_point(|s| {
                let past = if s.h >= 0.0 { s.t + s.h < t } else { s.t + s.h > t };
                past
            })
            .min(self.segments.len().saturating_sub(1));
        let seg = &self.segments[idx];
        debug_assert!(seg.contains(t) || self.segments.is_empty());
        let mut out = Matrix::zeros(self.rows, self.cols);
        seg.eval(t, out.as_mut_slice());
        Ok(out)
    }
}

type CacheKey = (u64, u64);

const CACHE_LIMIT: usize = 200_000;

/// Solution operator `Φ(t, τ)` of `x' = A(t) x`.
pub struct TransitionOperator {
    system: Arc<dyn LinearSystem>,
    tol: Tolerances,
    cache: RwLock<HashMap<CacheKey, Matrix>>,
}

impl std::fmt::Debug for TransitionOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransitionOperator")
            .field("dim", &self.system.dim())
            .field("tol", &self.tol)
            .finish()
    }
}

impl TransitionOperator {
    pub fn new(system: impl LinearSystem + 'static) -> Self {
        Self::with_tolerances(system, Tolerances::default())
    }

    pub fn with_tolerances(system: impl LinearSystem + 'static, tol: Tolerances) -> Self {
        TransitionOperator {
            system: Arc::new(system),
            tol,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn from_shared(system: Arc<dyn LinearSystem>, tol: Tolerances) -> Self {
        TransitionOperator {
            system,
            tol,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tol
    }

    pub fn system(&self) -> &dyn LinearSystem {
        self.system.as_ref()
    }

    pub fn shared_system(&self) -> Arc<dyn LinearSystem> {
        Arc::clone(&self.system)
    }

    pub fn coefficient(&self, t: f64) -> Result<Matrix, PropagatorError> {
        self.system
            .matrix(t)
            .map_err(|source| PropagatorError::Coefficient { t, source })
    }

    fn rhs(&self, cols: usize) -> impl FnMut(f64, &[f64], &mut [f64]) -> Result<(), PropagatorError> + '_ {
        let n = self.dim();
        let mut a = Matrix::zeros(n, n);
        move |t, y, dy| {
            self.system
                .matrix_into(t, &mut a)
                .map_err(|source| PropagatorError::Coefficient { t, source })?;
            let y = DMatrixView::from_slice(y, n, cols);
            let mut dy = DMatrixViewMut::from_slice(dy, n, cols);
            dy.gemm(1.0, &a, &y, 0.0);
            Ok(())
        }
    }

    /// `x(to)` for `x' = A(t)x, x(from) = v`. Either direction.
    pub fn propagate(&self, from: f64, to: f64, v: &Vector) -> Result<Vector, PropagatorError> {
        if v.len() != self.dim() {
            return Err(PropagatorError::Dimension {
                expected: self.dim(),
                got: v.len(),
            });
        }
        if from == to {
            return Ok(v.clone());
        }
        let out = integrate(self.rhs(1), from, to, v.as_slice(), self.tol, Options::default())?;
        Ok(Vector::from_vec(out.y))
    }

    /// `Φ(to, from)`, cached by interval endpoints.
    pub fn transition_matrix(&self, from: f64, to: f64) -> Result<Matrix, PropagatorError> {
        let n = self.dim();
        if from == to {
            return Ok(Matrix::identity(n, n));
        }
        let key = (from.to_bits(), to.to_bits());
        if let Some(m) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(m.clone());
        }
        let m = self.evolve(from, to, &Matrix::identity(n, n))?;
        let mut cache = self.cache.write().expect("cache lock");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, m.clone());
        Ok(m)
    }

    /// `Φ(to, from) · y0` for a block of columns.
    pub fn evolve(&self, from: f64, to: f64, y0: &Matrix) -> Result<Matrix, PropagatorError> {
        let n = self.dim();
        if y0.nrows() != n {
            return Err(PropagatorError::Dimension {
                expected: n,
                got: y0.nrows(),
            });
        }
        let cols = y0.ncols();
        if from == to || cols == 0 {
            return Ok(y0.clone());
        }
        let out = integrate(self.rhs(cols), from, to, y0.as_slice(), self.tol, Options::default())?;
        Ok(Matrix::from_vec(n, cols, out.y))
    }

    /// Dense matrix trajectory of `Y' = A(t)Y, Y(from) = y0`.
    pub fn trajectory(&self, from: f64, to: f64, y0: &Matrix) -> Result<MatrixTrajectory, PropagatorError> {
        let n = self.dim();
        let cols = y0.ncols();
        let out = integrate(
            self.rhs(cols),
            from,
            to,
            y0.as_slice(),
            self.tol,
            Options {
                dense: true,
                ..Options::default()
            },
        )?;
        Ok(MatrixTrajectory {
            rows: n,
            cols,
            from,
            to,
            end: Matrix::from_vec(n, cols, out.y),
            segments: out.segments,
        })
    }

    pub fn cache_len(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }
}

/// Convenience: `x(to)` for a coefficient matrix.
pub fn propagate(
    a: &CoefficientMatrix,
    from: f64,
    to: f64,
    v: &Vector,
) -> Result<Vector, PropagatorError> {
    TransitionOperator::new(a.clone()).propagate(from, to, v)
}

/// Convenience: `Φ(to, from)` for a coefficient matrix.
pub fn transition_matrix(
    a: &CoefficientMatrix,
    from: f64,
    to: f64,
) -> Result<Matrix, PropagatorError> {
    TransitionOperator::new(a.clone()).transition_matrix(from, to)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn rotation() -> CoefficientMatrix {
        CoefficientMatrix::parse(&[vec!["0", "1"], vec!["-1", "0"]]).unwrap()
    }

    #[test]
    fn rotation_quarter_turn() {
        let x = propagate(&rotation(), 0.0, FRAC_PI_2, &Vector::from_vec(vec![1.0, 0.0])).unwrap();
        assert!((x[0] - 0.0).abs() < 1e-8);
        assert!((x[1] + 1.0).abs() < 1e-8);
    }

    #[test]
    fn identity_for_zero_interval() {
        let v = Vector::from_vec(vec![0.3, -2.0]);
        assert_eq!(propagate(&rotation(), 1.5, 1.5, &v).unwrap(), v);
        assert_eq!(
            transition_matrix(&rotation(), 2.0, 2.0).unwrap(),
            Matrix::identity(2, 2)
        );
    }

    #[test]
    fn scalar_exponential() {
        let a = CoefficientMatrix::diagonal(&[-1.0]);
        let x = propagate(&a, 0.0, 1.0, &Vector::from_vec(vec![1.0])).unwrap();
        assert!((x[0] - 0.36787944117144233).abs() < 1e-10);
    }

    #[test]
    fn diagonal_transition() {
        let m = transition_matrix(&CoefficientMatrix::diagonal(&[-1.0, 1.0]), 0.0, 1.0).unwrap();
        assert!((m[(0, 0)] / (-1.0f64).exp() - 1.0).abs() < 1e-9);
        assert!((m[(1, 1)] / 1.0f64.exp() - 1.0).abs() < 1e-9);
        assert!(m[(0, 1)].abs() < 1e-15 && m[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn cocycle_composition() {
        let op = TransitionOperator::new(rotation());
        let m21 = op.transition_matrix(1.0, 2.0).unwrap();
        let m10 = op.transition_matrix(0.0, 1.0).unwrap();
        let m20 = op.transition_matrix(0.0, 2.0).unwrap();
        assert!((m21 * m10 - m20).norm() < 1e-8);
        assert_eq!(op.cache_len(), 3);
    }

    #[test]
    fn state_dependent_coefficients_rejected() {
        let err = CoefficientMatrix::parse(&[vec!["x1"]]).unwrap_err();
        assert!(matches!(err, CoefficientError::StateDependent { .. }));
    }

    #[test]
    fn coefficient_domain_error_surfaces_time() {
        let a = CoefficientMatrix::parse(&[vec!["ln(t)"]]).unwrap();
        let err = propagate(&a, 1.0, -1.0, &Vector::from_vec(vec![1.0])).unwrap_err();
        assert!(matches!(err, PropagatorError::Coefficient { t, .. } if t <= 0.0));
    }

    #[test]
    fn dense_trajectory_matches_closed_form() {
        let op = TransitionOperator::new(rotation());
        let tr = op.trajectory(0.0, 3.0, &Matrix::identity(2, 2)).unwrap();
        for &t in &[0.0, 0.4, 1.7, 2.999, 3.0] {
            let m = tr.eval(t).unwrap();
            assert!((m[(0, 0)] - t.cos()).abs() < 1e-8, "{t}");
            assert!((m[(0, 1)] - t.sin()).abs() < 1e-8, "{t}");
        }
        assert!(tr.eval(3.5).is_err());
    }
}
