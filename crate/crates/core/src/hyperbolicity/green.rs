//! Green kernels of the half-line dichotomy and the whole-line trichotomy.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::Serialize;

use super::dichotomy::{half_grid, DichotomyCertificate};
use super::grid::StepGrid;
use super::splitting::{Families, Half};
use super::trichotomy::{whole_grid, TrichotomyCertificate};
use super::{Constants, HyperbolicityError, Side};
use crate::linalg::{op_norm, Matrix, Vector};
use crate::propagator::{LinearSystem, TransitionOperator};
use crate::solvers::quadrature::{gl16, GL_POINTS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelMode {
    /// `[a, b]` with the projector given at `a`.
    HalfLine { a: f64, b: f64 },
    /// `[−T, T]` with four branches switching at `τ = 0`.
    WholeLine { window: f64 },
}

/// Quadrature data for one grid panel `[t_j, t_{j+1}]`.
pub(crate) struct Panel {
    pub nodes: [f64; GL_POINTS],
    pub weights: [f64; GL_POINTS],
    /// `U(t_j, τ_k)` at the quadrature nodes.
    pub z: Vec<Matrix>,
}

/// Green kernel bound to a certificate and a transition operator.
pub struct GreenKernel {
    mode: KernelMode,
    op: Arc<TransitionOperator>,
    grid: StepGrid,
    fam: Families,
    constants: Constants,
    lo: usize,
    hi: usize,
    panels: OnceLock<Vec<Panel>>,
}

impl std::fmt::Debug for GreenKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreenKernel")
            .field("mode", &self.mode)
            .field("constants", &self.constants)
            .field("nodes", &(self.hi - self.lo + 1))
            .finish()
    }
}

impl GreenKernel {
    /// Half-line kernel on the certificate's interval.
    pub fn half_line(op: Arc<TransitionOperator>, cert: &DichotomyCertificate) -> Result<Self, HyperbolicityError> {
        if !cert.is_right_half() {
            return Err(HyperbolicityError::OutOfWindow {
                t: cert.reference,
                lo: cert.interval.0,
                hi: cert.interval.0,
            });
        }
        Self::half_line_from(op, &cert.projector, cert.constants, cert.interval)
    }

    pub(crate) fn half_line_from(
        op: Arc<TransitionOperator>,
        p: &Matrix,
        constants: Constants,
        interval: (f64, f64),
    ) -> Result<Self, HyperbolicityError> {
        let hg = half_grid(&op, p, interval, true, constants.nu)?;
        Ok(GreenKernel {
            mode: KernelMode::HalfLine {
                a: interval.0,
                b: interval.1,
            },
            op,
            grid: hg.grid,
            fam: hg.fam,
            constants,
            lo: hg.lo,
            hi: hg.hi,
            panels: OnceLock::new(),
        })
    }

    /// Whole-line kernel on `[−T, T]`.
    pub fn whole_line(op: Arc<TransitionOperator>, cert: &TrichotomyCertificate) -> Result<Self, HyperbolicityError> {
        Self::whole_line_from(op, &cert.p, &cert.p_minus(), cert.constants, cert.window)
    }

    pub(crate) fn whole_line_from(
        op: Arc<TransitionOperator>,
        p_plus: &Matrix,
        p_minus: &Matrix,
        constants: Constants,
        window: f64,
    ) -> Result<Self, HyperbolicityError> {
        let wg = whole_grid(&op, p_plus, p_minus, window, constants.nu)?;
        Ok(GreenKernel {
            mode: KernelMode::WholeLine { window },
            op,
            grid: wg.grid,
            fam: wg.fam,
            constants,
            lo: wg.lo,
            hi: wg.hi,
            panels: OnceLock::new(),
        })
    }

    pub fn mode(&self) -> KernelMode {
        self.mode
    }

    pub fn constants(&self) -> Constants {
        self.constants
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn operator(&self) -> &Arc<TransitionOperator> {
        &self.op
    }

    pub fn is_whole_line(&self) -> bool {
        matches!(self.mode, KernelMode::WholeLine { .. })
    }

    /// Time span covered by the kernel.
    pub fn span(&self) -> (f64, f64) {
        (self.grid.node(self.lo), self.grid.node(self.hi))
    }

    /// Output nodes of the window.
    pub fn nodes(&self) -> &[f64] {
        &self.grid.nodes()[self.lo..=self.hi]
    }

    pub fn step(&self) -> f64 {
        self.grid.h()
    }

    /// Largest swept-vs-given subspace mismatch at the reference node.
    pub fn reference_mismatch(&self) -> f64 {
        self.fam.mismatch
    }

    /// `max ‖P(t)‖` over the window nodes.
    pub fn max_projector_norm(&self) -> f64 {
        (self.lo..=self.hi)
            .map(|j| op_norm(self.fam.fwd(j)).max(op_norm(self.fam.bwd(j))))
            .fold(0.0, f64::max)
    }

    /// Truncation horizon with `(𝒩/ν) e^{−ν T_cut} ‖f‖ ≤ tol/2`.
    pub fn tail_horizon(&self, f_norm: f64, tol: f64) -> f64 {
        let Constants { n, nu } = self.constants;
        if f_norm <= 0.0 {
            return 0.0;
        }
        ((2.0 * n * f_norm / (nu * tol)).ln() / nu).max(0.0)
    }

    /// Sub-window on which the truncated integral meets the tolerance.
    pub fn trusted_window(&self, t_cut: f64) -> Option<(f64, f64)> {
        let (lo, hi) = self.span();
        let (a, b) = match self.mode {
            KernelMode::HalfLine { .. } => (lo, hi - t_cut),
            KernelMode::WholeLine { .. } => (lo + t_cut, hi - t_cut),
        };
        (b - a > 2.0 * self.grid.h()).then_some((a, b))
    }

    /// Window size needed so that `trusted_window(t_cut)` has length `len`.
    pub fn required_window(&self, t_cut: f64, len: f64) -> f64 {
        match self.mode {
            KernelMode::HalfLine { a, .. } => a + t_cut + len,
            KernelMode::WholeLine { .. } => t_cut + 0.5 * len,
        }
    }

    /// Quadrature panels for the window, computed once.
    pub(crate) fn panels(&self) -> Result<&[Panel], HyperbolicityError> {
        if let Some(p) = self.panels.get() {
            return Ok(p);
        }
        let (x, w) = gl16();
        let n = self.dim();
        let computed: Vec<Panel> = (self.lo..self.hi)
            .into_par_iter()
            .map(|j| {
                let (a, b) = (self.grid.node(j), self.grid.node(j + 1));
                let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
                let tr = self.op.trajectory(a, b, &Matrix::identity(n, n))?;
                let mut nodes = [0.0; GL_POINTS];
                let mut weights = [0.0; GL_POINTS];
                let mut z = Vec::with_capacity(GL_POINTS);
                for k in 0..GL_POINTS {
                    nodes[k] = c + r * x[k];
                    weights[k] = r * w[k];
                    let y = tr.eval(nodes[k])?;
                    z.push(y.try_inverse().ok_or(HyperbolicityError::Singular { t: nodes[k] })?);
                }
                Ok(Panel { nodes, weights, z })
            })
            .collect::<Result<_, HyperbolicityError>>()?;
        let _ = self.panels.set(computed);
        Ok(self.panels.get().expect("set"))
    }

    /// `∫ G(t_i, τ) f(τ) dτ` over the window at every window node, from
    /// forcing values at the panel quadrature nodes (panel-major).
    pub(crate) fn convolve(&self, forcing: &[Vector]) -> Result<Vec<Vector>, HyperbolicityError> {
        let panels = self.panels()?;
        let n = self.dim();
        if forcing.len() != panels.len() * GL_POINTS {
            return Err(HyperbolicityError::Dimension {
                expected: panels.len() * GL_POINTS,
                got: forcing.len(),
            });
        }
        let z: Vec<Vector> = panels
            .par_iter()
            .enumerate()
            .map(|(j, p)| {
                let mut acc = Vector::zeros(n);
                for k in 0..GL_POINTS {
                    acc += p.weights[k] * (&p.z[k] * &forcing[j * GL_POINTS + k]);
                }
                acc
            })
            .collect();
        let (lo, hi) = (self.lo, self.hi);
        let m = hi - lo + 1;
        let mut fwd = vec![Vector::zeros(n); m];
        for j in lo..hi {
            let i = j - lo;
            let w = &fwd[i] + self.fam.fwd(j) * &z[i];
            fwd[i + 1] = self.fam.fwd(j + 1) * (self.grid.step(j) * w);
        }
        let mut bwd = vec![Vector::zeros(n); m];
        for j in (lo..hi).rev() {
            let i = j - lo;
            let jump = self.fam.bwd(j + 1) * (self.grid.step(j) * &z[i]);
            bwd[i] = self.fam.bwd(j) * (self.grid.inverse(j) * (&bwd[i + 1] - jump));
        }
        Ok(fwd.into_iter().zip(bwd).map(|(a, b)| a + b).collect())
    }

    /// `‖R x‖` with `R = P₊(0)(I − P₋(0))` on the whole line.
    pub(crate) fn center_component(&self, x: &Vector) -> Option<f64> {
        if !self.is_whole_line() {
            return None;
        }
        let z = self.fam.zero;
        let r = self.fam.proj(z, Half::Plus) * self.fam.proj_c(z, Half::Minus);
        Some((r * x).norm())
    }

    fn half_of(&self, tau: f64) -> Half {
        if self.is_whole_line() && tau < 0.0 {
            Half::Minus
        } else {
            Half::Plus
        }
    }

    /// Nearest node carrying a projector of `half`.
    fn anchor(&self, tau: f64, half: Half) -> usize {
        let j = self.grid.nearest(tau);
        let (first, last) = match half {
            Half::Plus => (self.fam.zero, self.fam.last()),
            Half::Minus => (0, self.fam.zero),
        };
        j.clamp(first, last)
    }

    /// Dichotomy projector of `half` at an arbitrary time, conjugated from
    /// the nearest node.
    pub(crate) fn projector_at(&self, s: f64, half: Half) -> Result<Matrix, HyperbolicityError> {
        let j = self.anchor(s, half);
        let p = self.fam.proj(j, half);
        let tj = self.grid.node(j);
        if tj == s {
            return Ok(p.clone());
        }
        let n = self.dim();
        let u = self.op.evolve(tj, s, &Matrix::identity(n, n))?;
        let uinv = u.clone().try_inverse().ok_or(HyperbolicityError::Singular { t: s })?;
        Ok(u * p * uinv)
    }

    fn check_time(&self, t: f64) -> Result<(), HyperbolicityError> {
        let (lo, hi) = self.span();
        if t < lo - 1e-12 || t > hi + 1e-12 {
            return Err(HyperbolicityError::OutOfWindow { t, lo, hi });
        }
        Ok(())
    }

    /// `G(t, τ) v`.
    pub fn eval(&self, t: f64, tau: f64, v: &Vector, side: Option<Side>) -> Result<Vector, HyperbolicityError> {
        let n = self.dim();
        if v.len() != n {
            return Err(HyperbolicityError::Dimension {
                expected: n,
                got: v.len(),
            });
        }
        self.check_time(t)?;
        self.check_time(tau)?;
        let forward = if t == tau {
            match side {
                Some(Side::Plus) => true,
                Some(Side::Minus) => false,
                None => return Err(HyperbolicityError::JumpPoint { t }),
            }
        } else {
            t > tau
        };
        let half = self.half_of(tau);
        let p = self.projector_at(tau, half)?;
        if forward {
            let w = &p * v;
            self.march_forward(tau, t, w)
        } else {
            let w = -(v - &p * v);
            self.march_backward(tau, t, w)
        }
    }

    /// `G(t, τ)` as a matrix.
    pub fn matrix(&self, t: f64, tau: f64, side: Option<Side>) -> Result<Matrix, HyperbolicityError> {
        let n = self.dim();
        let mut out = Matrix::zeros(n, n);
        for k in 0..n {
            let mut e = Vector::zeros(n);
            e[k] = 1.0;
            out.set_column(k, &self.eval(t, tau, &e, side)?);
        }
        Ok(out)
    }

    fn march_forward(&self, from: f64, to: f64, mut w: Vector) -> Result<Vector, HyperbolicityError> {
        if from == to {
            return Ok(w);
        }
        let mut j = self.grid.panel_of(from) + 1;
        if self.grid.node(j - 1) > from {
            j -= 1;
        }
        let mut cur = from;
        while j < self.grid.len() && self.grid.node(j) < to {
            let tj = self.grid.node(j);
            w = if j >= 1 && self.grid.node(j - 1) == cur {
                self.grid.step(j - 1) * w
            } else {
                self.op.propagate(cur, tj, &w)?
            };
            w = self.fam.fwd(j) * w;
            cur = tj;
            j += 1;
        }
        Ok(self.op.propagate(cur, to, &w)?)
    }

    fn march_backward(&self, from: f64, to: f64, mut w: Vector) -> Result<Vector, HyperbolicityError> {
        if from == to {
            return Ok(w);
        }
        let mut j = self.grid.panel_of(from);
        if self.grid.node(j) >= from && j > 0 {
            j -= 1;
        }
        let mut cur = from;
        loop {
            let tj = self.grid.node(j);
            if tj <= to || tj >= cur {
                break;
            }
            w = if self.grid.node(j + 1) == cur {
                self.grid.inverse(j) * w
            } else {
                self.op.propagate(cur, tj, &w)?
            };
            w = self.fam.bwd(j) * w;
            cur = tj;
            if j == 0 {
                break;
            }
            j -= 1;
        }
        Ok(self.op.propagate(cur, to, &w)?)
    }
}

/// `G(t, τ) v`; `side` selects the one-sided limit when `t = τ`.
pub fn green_eval(
    kernel: &GreenKernel,
    t: f64,
    tau: f64,
    v: &Vector,
    side: Option<Side>,
) -> Result<Vector, HyperbolicityError> {
    kernel.eval(t, tau, v, side)
}

/// `A(t + h)` for any system.
struct Shifted {
    inner: Arc<dyn LinearSystem>,
    h: f64,
}

impl LinearSystem for Shifted {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn matrix_into(&self, t: f64, out: &mut Matrix) -> Result<(), crate::expr::EvalError> {
        self.inner.matrix_into(t + self.h, out)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ShiftCheck {
    pub h: f64,
    pub max_residual: f64,
    pub pairs: usize,
    /// Pairs skipped because `τ` and `τ + h` fall on different branches.
    pub excluded: usize,
}

/// Rebuilds the kernel for `A^h(t) = A(t + h)` and reports
/// `max ‖G_A(t+h, τ+h) − G_{A^h}(t, τ)‖` over pairs of `times`.
pub fn green_shift_check(kernel: &GreenKernel, h: f64, times: &[f64]) -> Result<ShiftCheck, HyperbolicityError> {
    let op = kernel.operator();
    let shifted_sys: Arc<dyn LinearSystem> = Arc::new(Shifted {
        inner: op.shared_system(),
        h,
    });
    let shifted_op = Arc::new(TransitionOperator::from_shared(shifted_sys, op.tolerances()));
    let shifted = match kernel.mode {
        KernelMode::HalfLine { a, b } => {
            let p = kernel.projector_at(a + h, Half::Plus)?;
            GreenKernel::half_line_from(shifted_op, &p, kernel.constants, (a, b))?
        }
        KernelMode::WholeLine { window } => {
            let pp = kernel.projector_at(h, Half::Plus)?;
            let pm = kernel.projector_at(h, Half::Minus)?;
            GreenKernel::whole_line_from(shifted_op, &pp, &pm, kernel.constants, window)?
        }
    };
    let (lo, hi) = kernel.span();
    let (slo, shi) = shifted.span();
    let inside = |s: f64| s >= slo && s <= shi && s + h >= lo && s + h <= hi;
    let pairs: Vec<(f64, f64)> = times
        .iter()
        .flat_map(|&t| times.iter().map(move |&tau| (t, tau)))
        .filter(|&(t, tau)| t != tau && inside(t) && inside(tau))
        .collect();
    let branch_changes = |tau: f64| kernel.is_whole_line() && ((tau < 0.0) != (tau + h < 0.0));
    let excluded = pairs.iter().filter(|p| branch_changes(p.1)).count();
    let residuals: Vec<f64> = pairs
        .par_iter()
        .filter(|p| !branch_changes(p.1))
        .map(|&(t, tau)| {
            let g = kernel.matrix(t + h, tau + h, None)?;
            let gs = shifted.matrix(t, tau, None)?;
            Ok(op_norm(&(g - gs)))
        })
        .collect::<Result<_, HyperbolicityError>>()?;
    Ok(ShiftCheck {
        h,
        max_residual: residuals.iter().copied().fold(0.0, f64::max),
        pairs: residuals.len(),
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolicity::{build_trichotomy, verify_dichotomy, TrichotomyOutcome};
    use crate::propagator::CoefficientMatrix;

    fn diag(v: &[f64]) -> Matrix {
        Matrix::from_diagonal(&nalgebra::DVector::from_vec(v.to_vec()))
    }

    fn saddle_kernel() -> GreenKernel {
        let op = Arc::new(TransitionOperator::new(CoefficientMatrix::diagonal(&[-1.0, 1.0])));
        let cert = verify_dichotomy(&op, &diag(&[1.0, 0.0]), (0.0, 30.0), Constants::new(1.0, 1.0)).unwrap();
        GreenKernel::half_line(op, &cert).unwrap()
    }

    #[test]
    fn saddle_kernel_values() {
        let k = saddle_kernel();
        let e1 = Vector::from_vec(vec![1.0, 0.0]);
        let e2 = Vector::from_vec(vec![0.0, 1.0]);
        let g = k.eval(1.0, 0.0, &e1, None).unwrap();
        assert!((g[0] - (-1.0f64).exp()).abs() < 1e-9 && g[1].abs() < 1e-12);
        let g = k.eval(0.0, 1.0, &e2, None).unwrap();
        assert!((g[1] + (-1.0f64).exp()).abs() < 1e-9 && g[0].abs() < 1e-12);
        let g = k.eval(7.3, 2.1, &e1, None).unwrap();
        assert!((g[0] - (-5.2f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn jump_is_identity() {
        let k = saddle_kernel();
        let plus = k.matrix(3.3, 3.3, Some(Side::Plus)).unwrap();
        let minus = k.matrix(3.3, 3.3, Some(Side::Minus)).unwrap();
        assert!((plus - minus - Matrix::identity(2, 2)).amax() < 1e-9);
        assert!(matches!(k.eval(1.0, 1.0, &Vector::zeros(2), None), Err(HyperbolicityError::JumpPoint { .. })));
    }

    #[test]
    fn center_branch() {
        let a = CoefficientMatrix::parse(&[
            vec!["-1", "0", "0"],
            vec!["0", "1", "0"],
            vec!["0", "0", "-tanh(t)"],
        ])
        .unwrap();
        let op = Arc::new(TransitionOperator::new(a));
        let TrichotomyOutcome::Certified(c) = build_trichotomy(&op, 30.0).unwrap() else {
            panic!()
        };
        let k = GreenKernel::whole_line(op, &c).unwrap();
        let e3 = Vector::from_vec(vec![0.0, 0.0, 1.0]);
        let g = k.eval(2.0, 1.0, &e3, None).unwrap();
        let want = 1.0f64.cosh() / 2.0f64.cosh();
        assert!((g[2] - want).abs() < 1e-6, "{g}");
        assert!(g[0].abs() < 1e-6 && g[1].abs() < 1e-6);
        // τ < 0 < t: the center is excluded
        let g = k.eval(1.0, -1.0, &e3, None).unwrap();
        assert!(g.norm() < 1e-6, "{g}");
        // t < τ ≤ 0: Q contains the center
        let g = k.eval(-2.0, -1.0, &e3, None).unwrap();
        assert!((g[2] + 1.0f64.cosh() / 2.0f64.cosh()).abs() < 1e-6, "{g}");
    }

    #[test]
    fn autonomous_shift() {
        let k = saddle_kernel();
        let times = [2.0, 3.5, 5.1, 8.0];
        let r = green_shift_check(&k, 1.0, &times).unwrap();
        assert!(r.max_residual <= 1e-8, "{r:?}");
        let r0 = green_shift_check(&k, 0.0, &times).unwrap();
        assert!(r0.max_residual <= 1e-12, "{r0:?}");
    }
}
