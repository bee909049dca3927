//! Whole-line trichotomy certificates assembled from two half-line dichotomies.

use serde::{Deserialize, Serialize};

use super::dichotomy::{certify_dichotomy, certify_left_dichotomy, evaluate, DichotomyCertificate, WorstPair};
use super::estimate::{fit_constants, pair_samples, strides, Branch, HalfTag};
use super::grid::{StepGrid, DEFAULT_STEP};
use super::splitting::Families;
use super::{estimate_stable_projector, sweep_margin, Constants, HyperbolicityError, DECAY_SLACK};
use crate::linalg::{idempotency_defect, op_norm, orthogonal_projector, spectral_basis, Matrix};
use crate::propagator::TransitionOperator;

/// Cosine above which two principal directions count as shared.
const CENTER_COSINE: f64 = 1.0 - 1e-6;
/// Largest compatibility residual accepted.
pub const COMPATIBILITY_TOL: f64 = 1e-6;
/// Tolerance on the projector identities of a supplied certificate.
pub const ALGEBRA_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrichotomyReport {
    /// `max(‖P₊P₋ − P₋‖, ‖P₋P₊ − P₋‖)`.
    pub compatibility_residual: f64,
    /// `‖PQ − QP‖`.
    pub commutator: f64,
    /// `‖P + Q − PQ − I‖`.
    pub identity_residual: f64,
    /// `max_{i≠j} ‖PᵢPⱼ‖`.
    pub orthogonality: f64,
    /// `‖P₁ + P₂ + P₃ − I‖`.
    pub partition_residual: f64,
    /// Largest relative decay violation per branch, in the order
    /// `P (0≤τ≤t)`, `I−P (t≤τ, τ≥0)`, `Q (t≤τ≤0)`, `I−Q (τ≤t, τ≤0)`.
    pub branch_violations: [f64; 4],
    pub max_violation: f64,
    pub worst: Option<WorstPair>,
    pub pairs: usize,
    pub center_dim: usize,
    /// `max ‖P(t)‖` over the node projectors (boundedness of the family).
    pub max_projector_norm: f64,
    pub reference_mismatch: f64,
    pub window: f64,
}

/// Exponential trichotomy on `[−T, T]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrichotomyCertificate {
    pub window: f64,
    #[serde(rename = "P", with = "crate::linalg::rows")]
    pub p: Matrix,
    #[serde(rename = "Q", with = "crate::linalg::rows")]
    pub q: Matrix,
    #[serde(rename = "P1", with = "crate::linalg::rows")]
    pub p1: Matrix,
    #[serde(rename = "P2", with = "crate::linalg::rows")]
    pub p2: Matrix,
    #[serde(rename = "P3", with = "crate::linalg::rows")]
    pub p3: Matrix,
    #[serde(rename = "R", with = "crate::linalg::rows")]
    pub r: Matrix,
    pub constants: Constants,
    pub report: TrichotomyReport,
}

impl TrichotomyCertificate {
    /// Right half-line projector `P₊ = P`.
    pub fn p_plus(&self) -> &Matrix {
        &self.p
    }

    /// Left half-line projector `P₋ = I − Q`.
    pub fn p_minus(&self) -> Matrix {
        let n = self.q.nrows();
        Matrix::identity(n, n) - &self.q
    }

    /// Builds and verifies a certificate from supplied `P`, `Q`. With
    /// `constants = None` they are fitted.
    pub fn from_projectors(
        op: &TransitionOperator,
        p: &Matrix,
        q: &Matrix,
        constants: Option<Constants>,
        window: f64,
    ) -> Result<Self, HyperbolicityError> {
        let n = op.dim();
        for m in [p, q] {
            if m.nrows() != n || m.ncols() != n {
                return Err(HyperbolicityError::Dimension {
                    expected: n,
                    got: m.nrows(),
                });
            }
            let defect = idempotency_defect(m);
            if defect > ALGEBRA_TOL {
                return Err(HyperbolicityError::NotIdempotent { defect });
            }
        }
        let id = Matrix::identity(n, n);
        let commutator = op_norm(&(p * q - q * p));
        if commutator > ALGEBRA_TOL {
            return Err(HyperbolicityError::Algebra {
                what: "PQ = QP",
                residual: commutator,
            });
        }
        let identity = op_norm(&(p + q - p * q - &id));
        if identity > ALGEBRA_TOL {
            return Err(HyperbolicityError::Algebra {
                what: "P + Q - PQ = I",
                residual: identity,
            });
        }
        let p1 = &id - q;
        let p2 = &id - p;
        let p3 = p + q - &id;
        let compat = compatibility(p, &p1);
        assemble(op, [p1, p2, p3], 0, compat, constants, window)
    }
}

/// Both half-line certificates and the failed compatibility check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IncompatibilityReport {
    pub window: f64,
    pub plus: DichotomyCertificate,
    pub minus: DichotomyCertificate,
    #[serde(with = "crate::linalg::rows")]
    pub p_plus: Matrix,
    #[serde(with = "crate::linalg::rows")]
    pub p_minus: Matrix,
    pub compatibility_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrichotomyOutcome {
    Certified(TrichotomyCertificate),
    Incompatible(IncompatibilityReport),
}

fn compatibility(p_plus: &Matrix, p_minus: &Matrix) -> f64 {
    op_norm(&(p_plus * p_minus - p_minus)).max(op_norm(&(p_minus * p_plus - p_minus)))
}

/// Splits `ℝⁿ` into `E₁ ⊕ E₂ ⊕ C` from the stable subspace on the right
/// (`vp`) and the subspace decaying to the left (`vq`), where `C` is their
/// intersection. Returns the three projectors, or `None` when the two
/// subspaces do not span the whole space.
fn decompose(vp: &Matrix, vq: &Matrix) -> Option<([Matrix; 3], usize)> {
    let n = vp.nrows();
    let (kp, kq) = (vp.ncols(), vq.ncols());
    if kp + kq < n {
        return None;
    }
    let center = if kp == 0 || kq == 0 {
        Matrix::zeros(n, 0)
    } else {
        let svd = (vp.transpose() * vq).svd(true, false);
        let u = svd.u.expect("left vectors");
        let idx: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] >= CENTER_COSINE)
            .collect();
        let mut c = Matrix::zeros(n, idx.len());
        for (col, &i) in idx.iter().enumerate() {
            c.set_column(col, &(vp * u.column(i)));
        }
        c
    };
    let nc = center.ncols();
    if kp + kq - nc != n {
        return None;
    }
    let cc = orthogonal_projector(&center);
    let e1 = spectral_basis(&(orthogonal_projector(vp) - &cc), kp - nc);
    let e2 = spectral_basis(&(orthogonal_projector(vq) - &cc), kq - nc);
    let mut m = Matrix::zeros(n, n);
    m.columns_mut(0, kp - nc).copy_from(&e1);
    m.columns_mut(kp - nc, kq - nc).copy_from(&e2);
    m.columns_mut(kp + kq - 2 * nc, nc).copy_from(&center);
    let smin = m.clone().svd(false, false).singular_values.min();
    if smin < 1e-8 {
        return None;
    }
    let inv = m.clone().try_inverse()?;
    let block = |start: usize, len: usize| -> Matrix {
        if len == 0 {
            Matrix::zeros(n, n)
        } else {
            m.columns(start, len) * inv.rows(start, len)
        }
    };
    Some((
        [block(0, kp - nc), block(kp - nc, kq - nc), block(kp + kq - 2 * nc, nc)],
        nc,
    ))
}

pub(crate) struct WholeGrid {
    pub grid: StepGrid,
    pub fam: Families,
    pub lo: usize,
    pub hi: usize,
}

/// Symmetric grid on `[−T−Δ, T+Δ]` with node 0 and the two families.
pub(crate) fn whole_grid(
    op: &TransitionOperator,
    p_plus: &Matrix,
    p_minus: &Matrix,
    window: f64,
    nu_hint: f64,
) -> Result<WholeGrid, HyperbolicityError> {
    let h = StepGrid::fitted_step(window, DEFAULT_STEP);
    let steps = (window / h).round() as i64;
    let ext = (sweep_margin(nu_hint) / h).ceil() as i64;
    let grid = StepGrid::new(op, 0.0, h, -(steps + ext), steps + ext)?;
    let zero = (steps + ext) as usize;
    let fam = Families::trichotomy(&grid, zero, p_plus, p_minus)?;
    Ok(WholeGrid {
        grid,
        fam,
        lo: ext as usize,
        hi: (2 * steps + ext) as usize,
    })
}

fn branch_slot(b: Branch) -> usize {
    match b {
        Branch::Forward(HalfTag::Plus) => 0,
        Branch::Backward(HalfTag::Plus) => 1,
        Branch::Backward(HalfTag::Minus) => 2,
        Branch::Forward(HalfTag::Minus) => 3,
    }
}

fn assemble(
    op: &TransitionOperator,
    [p1, p2, p3]: [Matrix; 3],
    center_dim: usize,
    compatibility_residual: f64,
    constants: Option<Constants>,
    window: f64,
) -> Result<TrichotomyCertificate, HyperbolicityError> {
    let n = op.dim();
    let id = Matrix::identity(n, n);
    let p = &p1 + &p3;
    let q = &p2 + &p3;
    let r = &p * &q;
    let nu_hint = constants.map_or(1.0, |c| c.nu);
    let wg = whole_grid(op, &p, &p1, window, nu_hint)?;
    let (ts, tt) = strides(wg.hi - wg.lo + 1);
    let samples = pair_samples(&wg.grid, &wg.fam, wg.lo, wg.hi, ts, tt);
    let constants = match constants {
        Some(c) => c,
        None => fit_constants(&samples, wg.grid.h())?.constants,
    };
    let (max_violation, worst) = evaluate(&samples, &wg.grid, constants, true);
    let mut branch_violations = [f64::NEG_INFINITY; 4];
    for s in &samples {
        let d = (wg.grid.node(s.t) - wg.grid.node(s.tau)).abs();
        let v = s.norm / constants.bound(d) - 1.0;
        let slot = &mut branch_violations[branch_slot(s.branch)];
        *slot = slot.max(v);
    }
    let ps = [&p1, &p2, &p3];
    let mut orthogonality = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                orthogonality = orthogonality.max(op_norm(&(ps[i] * ps[j])));
            }
        }
    }
    let max_projector_norm = (wg.lo..=wg.hi)
        .step_by(ts)
        .flat_map(|j| [op_norm(wg.fam.fwd(j)), op_norm(wg.fam.bwd(j))])
        .fold(0.0, f64::max);
    let report = TrichotomyReport {
        compatibility_residual,
        commutator: op_norm(&(&p * &q - &q * &p)),
        identity_residual: op_norm(&(&p + &q - &p * &q - &id)),
        orthogonality,
        partition_residual: op_norm(&(&p1 + &p2 + &p3 - &id)),
        branch_violations,
        max_violation,
        worst,
        pairs: samples.len(),
        center_dim,
        max_projector_norm,
        reference_mismatch: wg.fam.mismatch,
        window,
    };
    if max_violation > DECAY_SLACK {
        let dr = super::VerificationReport {
            max_violation,
            worst: report.worst.clone(),
            pairs: report.pairs,
            interval: (-window, window),
            max_projector_norm,
            reference_mismatch: report.reference_mismatch,
        };
        return Err(HyperbolicityError::DecayViolated(Box::new(dr)));
    }
    Ok(TrichotomyCertificate {
        window,
        p,
        q,
        p1,
        p2,
        p3,
        r,
        constants,
        report,
    })
}

/// Estimates dichotomies on `[0, T]` and `[−T, 0]` and, if their projectors
/// are compatible, assembles the trichotomy on `[−T, T]`.
pub fn build_trichotomy(
    op: &TransitionOperator,
    window: f64,
) -> Result<TrichotomyOutcome, HyperbolicityError> {
    let n = op.dim();
    let plus = estimate_stable_projector(op, 0.0, window)?;
    let minus = estimate_stable_projector(op, 0.0, -window)?;
    let id = Matrix::identity(n, n);
    if let Some((parts, nc)) = decompose(&plus.basis, &minus.basis) {
        let p_plus = &parts[0] + &parts[2];
        let residual = compatibility(&p_plus, &parts[0]);
        if residual <= COMPATIBILITY_TOL {
            return assemble(op, parts, nc, residual, None, window).map(TrichotomyOutcome::Certified);
        }
    }
    let p_plus = plus.projector.clone();
    let p_minus = &id - &minus.projector;
    let residual = compatibility(&p_plus, &p_minus);
    let plus_cert = certify_dichotomy(op, (0.0, window))?;
    let minus_cert = certify_left_dichotomy(op, (-window, 0.0))?;
    Ok(TrichotomyOutcome::Incompatible(IncompatibilityReport {
        window,
        plus: plus_cert,
        minus: minus_cert,
        p_plus,
        p_minus,
        compatibility_residual: residual,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::CoefficientMatrix;

    fn diag(v: &[f64]) -> Matrix {
        Matrix::from_diagonal(&nalgebra::DVector::from_vec(v.to_vec()))
    }

    fn tanh_system() -> TransitionOperator {
        let a = CoefficientMatrix::parse(&[
            vec!["-1", "0", "0"],
            vec!["0", "1", "0"],
            vec!["0", "0", "-tanh(t)"],
        ])
        .unwrap();
        TransitionOperator::new(a)
    }

    #[test]
    fn center_direction_recovered() {
        let op = tanh_system();
        let TrichotomyOutcome::Certified(c) = build_trichotomy(&op, 30.0).unwrap() else {
            panic!("expected trichotomy");
        };
        assert!((&c.p - diag(&[1.0, 0.0, 1.0])).amax() < 1e-4);
        assert!((&c.q - diag(&[0.0, 1.0, 1.0])).amax() < 1e-4);
        assert!((&c.p3 - diag(&[0.0, 0.0, 1.0])).amax() < 1e-4);
        let r = &c.report;
        for v in [r.commutator, r.identity_residual, r.orthogonality, r.partition_residual] {
            assert!(v <= 1e-9, "{r:?}");
        }
        assert_eq!(r.center_dim, 1);
    }

    #[test]
    fn arctan_is_incompatible() {
        let op = TransitionOperator::new(CoefficientMatrix::parse(&[vec!["atan(t)"]]).unwrap());
        let TrichotomyOutcome::Incompatible(rep) = build_trichotomy(&op, 50.0).unwrap() else {
            panic!("expected incompatibility");
        };
        assert!(rep.p_plus[(0, 0)].abs() < 1e-12);
        assert!((rep.p_minus[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((rep.compatibility_residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn saddle_is_degenerate_trichotomy() {
        let op = TransitionOperator::new(CoefficientMatrix::diagonal(&[-1.0, 1.0]));
        let TrichotomyOutcome::Certified(c) = build_trichotomy(&op, 20.0).unwrap() else {
            panic!("expected trichotomy");
        };
        assert!(c.p3.amax() < 1e-9);
        assert!((&c.q - (Matrix::identity(2, 2) - &c.p)).amax() < 1e-9);
    }

    #[test]
    fn supplied_projectors() {
        let op = TransitionOperator::new(CoefficientMatrix::diagonal(&[-1.0]));
        let one = Matrix::identity(1, 1);
        let zero = Matrix::zeros(1, 1);
        let c = TrichotomyCertificate::from_projectors(&op, &one, &zero, Some(Constants::new(1.0, 1.0)), 20.0).unwrap();
        assert!(c.report.max_violation <= 1e-6);
        let err = TrichotomyCertificate::from_projectors(&op, &zero, &zero, None, 20.0).unwrap_err();
        assert!(matches!(err, HyperbolicityError::Algebra { .. }));
    }
}
