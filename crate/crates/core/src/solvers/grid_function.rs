//! Uniformly sampled vector functions.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::expr::{Expr, Point};
use crate::linalg::Vector;

use super::SolverError;

/// Samples `φ(t₀ + i·h)`, `i = 0 .. len`, of a function `ℝ → ℝⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    t0: f64,
    h: f64,
    dim: usize,
    data: Vec<f64>,
}

impl GridFunction {
    /// `data` holds `len · dim` values, sample-major.
    pub fn new(t0: f64, h: f64, dim: usize, data: Vec<f64>) -> Self {
        assert!(h > 0.0 && dim > 0 && data.len() % dim == 0 && !data.is_empty());
        GridFunction { t0, h, dim, data }
    }

    pub fn from_fn(t0: f64, h: f64, len: usize, dim: usize, mut f: impl FnMut(f64, &mut [f64])) -> Self {
        let mut data = vec![0.0; len * dim];
        for (i, chunk) in data.chunks_mut(dim).enumerate() {
            f(t0 + i as f64 * h, chunk);
        }
        GridFunction::new(t0, h, dim, data)
    }

    /// Scalar function sampled on `[a, b]` with step close to `h`.
    pub fn sample_scalar(a: f64, b: f64, h: f64, f: impl Fn(f64) -> f64) -> Self {
        let n = ((b - a) / h).round().max(1.0) as usize;
        let step = (b - a) / n as f64;
        GridFunction::from_fn(a, step, n + 1, 1, |t, out| out[0] = f(t))
    }

    pub fn zeros(t0: f64, h: f64, len: usize, dim: usize) -> Self {
        GridFunction::new(t0, h, dim, vec![0.0; len * dim])
    }

    pub(crate) fn from_vectors(t0: f64, h: f64, samples: &[Vector]) -> Self {
        let dim = samples[0].len();
        let mut data = Vec::with_capacity(samples.len() * dim);
        for s in samples {
            data.extend_from_slice(s.as_slice());
        }
        GridFunction::new(t0, h, dim, data)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn window(&self) -> (f64, f64) {
        (self.start(), self.end())
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.h
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn sample_vector(&self, i: usize) -> Vector {
        Vector::from_column_slice(self.sample(i))
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.sample(i)[k]).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Euclidean norm of sample `i`.
    pub fn norm_at(&self, i: usize) -> f64 {
        self.sample(i).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `‖φ‖_b` as the max over samples.
    pub fn sup_norm(&self) -> f64 {
        (0..self.len()).map(|i| self.norm_at(i)).fold(0.0, f64::max)
    }

    /// Sup norm over samples with `a ≤ t ≤ b`.
    pub fn sup_norm_on(&self, a: f64, b: f64) -> f64 {
        (0..self.len())
            .filter(|&i| {
                let t = self.time(i);
                t >= a - 1e-9 * self.h && t <= b + 1e-9 * self.h
            })
            .map(|i| self.norm_at(i))
            .fold(0.0, f64::max)
    }

    /// Index of the sample nearest to `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.h;
        let i = x.round();
        ((x - i).abs() < 1e-6 && i >= 0.0 && (i as usize) < self.len()).then_some(i as usize)
    }

    /// Cubic (four-point Lagrange) interpolation; `t` must lie in the
    /// window, nothing is extrapolated.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), SolverError> {
        self.eval_lagrange_into(t, 4, out)
    }

    /// Interpolation through the `points` samples nearest to `t`.
    pub fn eval_lagrange_into(&self, t: f64, points: usize, out: &mut [f64]) -> Result<(), SolverError> {
        let (a, b) = self.window();
        let slack = 1e-9 * self.h.max(1.0);
        if t < a - slack || t > b + slack {
            return Err(SolverError::OutsideWindow { t, a, b });
        }
        let n = self.len();
        let x = (t - self.t0) / self.h;
        let nearest = x.round();
        if (x - nearest).abs() < 1e-12 {
            let i = (nearest.max(0.0) as usize).min(n - 1);
            out.copy_from_slice(self.sample(i));
            return Ok(());
        }
        let p = points.clamp(1, n);
        let i0 = (x.floor() as isize - (p as isize / 2 - 1)).clamp(0, (n - p) as isize) as usize;
        out.fill(0.0);
        for m in 0..p {
            let mut w = 1.0;
            for j in 0..p {
                if j != m {
                    w *= (x - (i0 + j) as f64) / (m as f64 - j as f64);
                }
            }
            for (k, o) in out.iter_mut().enumerate() {
                *o += w * self.data[(i0 + m) * self.dim + k];
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<Vector, SolverError> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(Vector::from_vec(out))
    }

    fn same_grid(&self, other: &GridFunction) -> Result<(), SolverError> {
        let ok = self.dim == other.dim
            && self.len() == other.len()
            && (self.t0 - other.t0).abs() <= 1e-9 * self.h
            && (self.h - other.h).abs() <= 1e-12 * self.h;
        if ok {
            Ok(())
        } else {
            Err(SolverError::GridMismatch)
        }
    }

    /// `self + α·other` on a common grid.
    pub fn add_scaled(&self, alpha: f64, other: &GridFunction) -> Result<GridFunction, SolverError> {
        self.same_grid(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + alpha * b).collect();
        Ok(GridFunction::new(self.t0, self.h, self.dim, data))
    }

    /// `‖self − other‖_b` on a common grid.
    pub fn distance(&self, other: &GridFunction) -> Result<f64, SolverError> {
        Ok(self.add_scaled(-1.0, other)?.sup_norm())
    }

    pub fn scaled(&self, alpha: f64) -> GridFunction {
        GridFunction::new(self.t0, self.h, self.dim, self.data.iter().map(|v| alpha * v).collect())
    }

    /// Samples with `a ≤ t ≤ b`.
    pub fn restrict(&self, a: f64, b: f64) -> GridFunction {
        let first = (0..self.len()).find(|&i| self.time(i) >= a - 1e-9 * self.h).unwrap_or(0);
        let last = (0..self.len()).rev().find(|&i| self.time(i) <= b + 1e-9 * self.h).unwrap_or(self.len() - 1);
        let last = last.max(first);
        GridFunction::new(
            self.time(first),
            self.h,
            self.dim,
            self.data[first * self.dim..(last + 1) * self.dim].to_vec(),
        )
    }

    /// CSV with header `t,x1..xn` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "t")?;
        for k in 1..=self.dim {
            write!(w, ",x{k}")?;
        }
        writeln!(w)?;
        for i in 0..self.len() {
            write!(w, "{:.16e}", self.time(i))?;
            for v in self.sample(i) {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii")
    }
}

/// Anything usable as a forcing term `f(t)`.
pub trait Forcing: Sync {
    fn dim(&self) -> usize;
    fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), SolverError>;
}

impl Forcing for GridFunction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), SolverError> {
        GridFunction::eval_into(self, t, out)
    }
}

/// Vector of expressions in `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprForcing(pub Vec<Expr>);

impl Forcing for ExprForcing {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), SolverError> {
        let p = Point::at(t);
        for (o, e) in out.iter_mut().zip(&self.0) {
            *o = e.eval(&p).map_err(|source| SolverError::Eval { t, source })?;
        }
        Ok(())
    }
}

/// Closure forcing.
pub struct FnForcing<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64, &mut [f64]) + Sync> FnForcing<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnForcing { dim, f }
    }
}

impl<F: Fn(f64, &mut [f64]) + Sync> Forcing for FnForcing<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), SolverError> {
        (self.f)(t, out);
        Ok(())
    }
}

/// Identically zero forcing.
pub struct ZeroForcing(pub usize);

impl Forcing for ZeroForcing {
    fn dim(&self) -> usize {
        self.0
    }

    fn eval_into(&self, _t: f64, out: &mut [f64]) -> Result<(), SolverError> {
        out.fill(0.0);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_interpolation_is_exact_on_cubics() {
        let g = GridFunction::from_fn(-1.0, 0.25, 9, 1, |t, o| o[0] = t * t * t - 2.0 * t);
        for &t in &[-1.0, -0.9, -0.13, 0.4, 0.99, 1.0] {
            let v = g.eval(t).unwrap()[0];
            assert!((v - (t * t * t - 2.0 * t)).abs() < 1e-13, "{t}");
        }
        assert!(g.eval(1.5).is_err());
    }

    #[test]
    fn sizes_and_norms() {
        let g = GridFunction::sample_scalar(-10.0, 10.0, 0.05, f64::sin);
        assert_eq!(g.len(), 401);
        assert!((g.sup_norm() - 1.0).abs() < 1e-3);
        let r = g.restrict(-1.0, 1.0);
        assert_eq!(r.len(), 41);
        assert!((r.start() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let g = GridFunction::from_fn(0.0, 0.5, 2, 2, |t, o| {
            o[0] = t;
            o[1] = 1.0 / 3.0;
        });
        let csv = g.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x1,x2");
        let fields: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(fields[0].parse::<f64>().unwrap(), 0.5);
        assert_eq!(fields[2].parse::<f64>().unwrap(), 1.0 / 3.0);
    }
}
