//! Node projectors built from subspace sweeps.
//!
//! The subspace that is unique on a half-line (stable on the right, the
//! one decaying towards `-∞` on the left) is obtained by sweeping an
//! arbitrary complement in the direction in which it is attracting. The
//! free complementary subspace is transported from the reference node in
//! its own dominant direction. Each step is re-orthonormalised, so no long
//! products of step maps are ever formed.

use super::grid::StepGrid;
use super::HyperbolicityError;
use crate::linalg::{
    kernel_basis, orthogonal_complement, orthogonal_projector, orthonormalize,
    projector_from_subspaces, range_basis, Matrix,
};

/// Tolerance on the reference-node mismatch before falling back to direct
/// transport of the given subspace.
pub(crate) const MISMATCH_TOL: f64 = 1e-6;

/// Which half-line family a node projector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Half {
    Minus,
    Plus,
}

/// Bases for nodes `from ..= to` (increasing), swept forward.
pub(crate) fn sweep_forward(grid: &StepGrid, from: usize, to: usize, basis: &Matrix) -> Vec<Matrix> {
    let mut out = Vec::with_capacity(to + 1 - from);
    let mut b = orthonormalize(basis);
    out.push(b.clone());
    for j in from..to {
        if b.ncols() > 0 {
            b = orthonormalize(&(grid.step(j) * &b));
        }
        out.push(b.clone());
    }
    out
}

/// Bases for nodes `to ..= from` (returned in increasing index order),
/// swept backward from `from`.
pub(crate) fn sweep_backward(grid: &StepGrid, from: usize, to: usize, basis: &Matrix) -> Vec<Matrix> {
    let mut out = Vec::with_capacity(from + 1 - to);
    let mut b = orthonormalize(basis);
    out.push(b.clone());
    for j in (to..from).rev() {
        if b.ncols() > 0 {
            b = orthonormalize(&(grid.inverse(j) * &b));
        }
        out.push(b.clone());
    }
    out.reverse();
    out
}

/// `‖(I − Π_ref) V‖` for orthonormal `V`; zero when the spans agree.
fn subspace_mismatch(reference: &Matrix, v: &Matrix) -> f64 {
    if v.ncols() == 0 {
        return 0.0;
    }
    let n = v.nrows();
    let pi = orthogonal_projector(reference);
    crate::linalg::op_norm(&((Matrix::identity(n, n) - pi) * v))
}

fn assemble(grid: &StepGrid, offset: usize, ranges: &[Matrix], kernels: &[Matrix]) -> Result<Vec<Matrix>, HyperbolicityError> {
    ranges
        .iter()
        .zip(kernels)
        .enumerate()
        .map(|(i, (r, k))| {
            projector_from_subspaces(r, k).ok_or(HyperbolicityError::Splitting {
                t: grid.node(offset + i),
            })
        })
        .collect()
}

/// Dichotomy projectors at the grid nodes.
///
/// `minus` covers nodes `0 ..= zero`, `plus` covers `zero ..= last`. A pure
/// right half-line has `minus` empty; a pure left half-line has a single
/// `plus` entry equal to the last `minus` entry.
#[derive(Debug, Clone)]
pub(crate) struct Families {
    pub zero: usize,
    pub minus: Vec<Matrix>,
    pub plus: Vec<Matrix>,
    minus_c: Vec<Matrix>,
    plus_c: Vec<Matrix>,
    /// Largest mismatch between a swept subspace and the reference one.
    pub mismatch: f64,
    /// Set when a given projector was not the canonical one and its range
    /// (or kernel) had to be transported directly.
    #[cfg_attr(not(test), allow(dead_code))]
    pub transported: bool,
}

fn complements(ps: &[Matrix]) -> Vec<Matrix> {
    ps.iter()
        .map(|p| Matrix::identity(p.nrows(), p.ncols()) - p)
        .collect()
}

impl Families {
    fn new(zero: usize, minus: Vec<Matrix>, plus: Vec<Matrix>, mismatch: f64, transported: bool) -> Self {
        Families {
            zero,
            minus_c: complements(&minus),
            plus_c: complements(&plus),
            minus,
            plus,
            mismatch,
            transported,
        }
    }

    /// Reference projector `p` at node `zero`; covers `zero ..= grid end`.
    fn right_half(grid: &StepGrid, zero: usize, p: &Matrix) -> Result<(Vec<Matrix>, f64, bool), HyperbolicityError> {
        let last = grid.len() - 1;
        let n = p.nrows();
        let range0 = range_basis(p);
        let kernel0 = kernel_basis(p);
        let kernels = sweep_forward(grid, zero, last, &kernel0);
        let start = orthogonal_complement(&kernels[last - zero]);
        let mut ranges = sweep_backward(grid, last, zero, &start);
        let mismatch = subspace_mismatch(&range0, &ranges[0]);
        let transported = mismatch > MISMATCH_TOL;
        if transported {
            ranges = sweep_forward(grid, zero, last, &range0);
        }
        let mut ps = assemble(grid, zero, &ranges, &kernels)?;
        ps[0] = p.clone();
        debug_assert_eq!(ps[0].nrows(), n);
        Ok((ps, mismatch, transported))
    }

    /// Reference projector `p` at node `zero`; covers `0 ..= zero`.
    fn left_half(grid: &StepGrid, zero: usize, p: &Matrix) -> Result<(Vec<Matrix>, f64, bool), HyperbolicityError> {
        let range0 = range_basis(p);
        let kernel0 = kernel_basis(p);
        let ranges = sweep_backward(grid, zero, 0, &range0);
        let start = orthogonal_complement(&ranges[0]);
        let mut kernels = sweep_forward(grid, 0, zero, &start);
        let mismatch = subspace_mismatch(&kernel0, &kernels[zero]);
        let transported = mismatch > MISMATCH_TOL;
        if transported {
            kernels = sweep_backward(grid, zero, 0, &kernel0);
        }
        let mut ps = assemble(grid, 0, &ranges, &kernels)?;
        ps[zero] = p.clone();
        Ok((ps, mismatch, transported))
    }

    /// Right half-line with reference at node `zero` (usually 0).
    pub fn dichotomy_right(grid: &StepGrid, zero: usize, p: &Matrix) -> Result<Self, HyperbolicityError> {
        let (plus, mismatch, tr) = Self::right_half(grid, zero, p)?;
        Ok(Self::new(zero, Vec::new(), plus, mismatch, tr))
    }

    /// Left half-line with reference at node `zero` (its right end).
    pub fn dichotomy_left(grid: &StepGrid, zero: usize, p: &Matrix) -> Result<Self, HyperbolicityError> {
        let (minus, mismatch, tr) = Self::left_half(grid, zero, p)?;
        let plus = vec![minus[zero].clone()];
        Ok(Self::new(zero, minus, plus, mismatch, tr))
    }

    /// Whole line: `P₋` on the left of `zero`, `P₊` on the right.
    pub fn trichotomy(grid: &StepGrid, zero: usize, p_plus: &Matrix, p_minus: &Matrix) -> Result<Self, HyperbolicityError> {
        let (plus, m1, t1) = Self::right_half(grid, zero, p_plus)?;
        let (minus, m2, t2) = Self::left_half(grid, zero, p_minus)?;
        Ok(Self::new(zero, minus, plus, m1.max(m2), t1 || t2))
    }

    pub fn last(&self) -> usize {
        self.zero + self.plus.len() - 1
    }

    /// Half used at node `j` when marching forward from it.
    pub fn forward_half(&self, j: usize) -> Half {
        if self.minus.is_empty() || j >= self.zero {
            Half::Plus
        } else {
            Half::Minus
        }
    }

    /// Half used at node `j` when marching backward from it.
    pub fn backward_half(&self, j: usize) -> Half {
        if self.minus.is_empty() || j > self.zero {
            Half::Plus
        } else {
            Half::Minus
        }
    }

    /// Dichotomy projector of the given half at node `j`.
    pub fn proj(&self, j: usize, half: Half) -> &Matrix {
        match half {
            Half::Plus => &self.plus[j - self.zero],
            Half::Minus => &self.minus[j],
        }
    }

    /// Complement `I − proj(j, half)`.
    pub fn proj_c(&self, j: usize, half: Half) -> &Matrix {
        match half {
            Half::Plus => &self.plus_c[j - self.zero],
            Half::Minus => &self.minus_c[j],
        }
    }

    /// Forward-branch projector at node `j`.
    pub fn fwd(&self, j: usize) -> &Matrix {
        self.proj(j, self.forward_half(j))
    }

    /// Backward-branch projector at node `j`.
    pub fn bwd(&self, j: usize) -> &Matrix {
        self.proj_c(j, self.backward_half(j))
    }

    /// Whether node `j` carries a projector of the given half.
    pub fn has(&self, j: usize, half: Half) -> bool {
        match half {
            Half::Plus => j >= self.zero && j <= self.last(),
            Half::Minus => j < self.minus.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::{CoefficientMatrix, TransitionOperator};

    #[test]
    fn diagonal_families_are_constant() {
        let op = TransitionOperator::new(CoefficientMatrix::diagonal(&[-1.0, 1.0]));
        let grid = StepGrid::new(&op, 0.0, 0.1, -100, 100).unwrap();
        let p = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.0]));
        let fam = Families::trichotomy(&grid, 100, &p, &p).unwrap();
        for j in 0..grid.len() {
            assert!((fam.fwd(j) - &p).norm() < 1e-10);
        }
        assert!(fam.mismatch < 1e-10);
        assert!(!fam.transported);
    }
}
