//! Picard iteration for `x' = A(t)x + f(t) + F(t, x)` around the linear
//! bounded solution `φ₀ = 𝔾f`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid_function::{Forcing, GridFunction};
use super::linear::{green_integral, ode_residual, trusted_or_error};
use super::SolverError;
use crate::expr::{parse, Expr, Point};
use crate::hyperbolicity::{Constants, GreenKernel};

const VALIDATION_SEED: u64 = 0x11f5_c3a7;
const VALIDATION_SAMPLES: usize = 4000;
const VALIDATION_RADIUS: f64 = 10.0;

/// Sampled evidence behind a declared Lipschitz constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzValidation {
    pub samples: usize,
    pub radius: f64,
    pub window: (f64, f64),
    /// Largest `|F(t,x) − F(t,y)| / |x − y|` observed.
    pub max_ratio: f64,
    pub max_ratio_at: f64,
    /// Largest `|F(t, 0)|` observed.
    pub origin_value: f64,
}

/// Nonlinearity `F(t, x)` with a declared global Lipschitz constant in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzSpec {
    exprs: Vec<Expr>,
    lipschitz: f64,
    validation: Option<LipschitzValidation>,
}

impl LipschitzSpec {
    pub fn new(exprs: Vec<Expr>, lipschitz: f64) -> Result<Self, SolverError> {
        if exprs.is_empty() {
            return Err(SolverError::Nonlinearity("no components".into()));
        }
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(SolverError::Nonlinearity(format!(
                "Lipschitz constant must be positive and finite, got {lipschitz}"
            )));
        }
        let n = exprs.len();
        for e in &exprs {
            let k = e.max_state_index();
            if k > n {
                return Err(SolverError::Nonlinearity(format!("x{k} referenced in a {n}-dimensional problem")));
            }
        }
        Ok(LipschitzSpec {
            exprs,
            lipschitz,
            validation: None,
        })
    }

    pub fn parse<S: AsRef<str>>(sources: &[S], lipschitz: f64) -> Result<Self, SolverError> {
        let exprs = sources
            .iter()
            .map(|s| parse(s.as_ref()).map_err(|e| SolverError::Nonlinearity(format!("`{}`: {e}", s.as_ref()))))
            .collect::<Result<_, _>>()?;
        Self::new(exprs, lipschitz)
    }

    pub fn dim(&self) -> usize {
        self.exprs.len()
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn exprs(&self) -> &[Expr] {
        &self.exprs
    }

    pub fn validation(&self) -> Option<&LipschitzValidation> {
        self.validation.as_ref()
    }

    pub fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), SolverError> {
        let p = Point::new(t, x);
        for (o, e) in out.iter_mut().zip(&self.exprs) {
            *o = e.eval(&p).map_err(|source| SolverError::Eval { t, source })?;
        }
        Ok(())
    }

    /// `εF` with constant `|ε|L`.
    pub fn scaled(&self, eps: f64) -> LipschitzSpec {
        LipschitzSpec {
            exprs: self.exprs.iter().map(|e| e.scaled(eps)).collect(),
            lipschitz: eps.abs() * self.lipschitz,
            validation: self.validation.clone().map(|mut v| {
                v.max_ratio *= eps.abs();
                v.origin_value *= eps.abs();
                v
            }),
        }
    }

    /// Samples ratios on `window × ball(radius)` and checks
    /// `max ratio ≤ L(1 + 1e−3)` and `F(t, 0) = 0` within `1e−12`.
    pub fn validate(&mut self, window: (f64, f64), radius: f64, samples: usize) -> Result<&LipschitzValidation, SolverError> {
        let n = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED);
        let mut fx = vec![0.0; n];
        let mut fy = vec![0.0; n];
        let zero = vec![0.0; n];
        let mut v = LipschitzValidation {
            samples,
            radius,
            window,
            max_ratio: 0.0,
            max_ratio_at: window.0,
            origin_value: 0.0,
        };
        for _ in 0..samples {
            let t = rng.random_range(window.0..=window.1);
            self.eval_into(t, &zero, &mut fx)?;
            let o = fx.iter().map(|a| a * a).sum::<f64>().sqrt();
            if o > 1e-12 {
                return Err(SolverError::NonzeroAtOrigin { t, value: o });
            }
            v.origin_value = v.origin_value.max(o);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-radius..=radius)).collect();
            let scale = 10f64.powf(rng.random_range(-4.0..=radius.log10().max(-3.0)));
            let y: Vec<f64> = x.iter().map(|xi| xi + scale * rng.random_range(-1.0..=1.0)).collect();
            let d = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if d == 0.0 {
                continue;
            }
            self.eval_into(t, &x, &mut fx)?;
            self.eval_into(t, &y, &mut fy)?;
            let df = fx.iter().zip(&fy).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let ratio = df / d;
            if ratio > v.max_ratio {
                v.max_ratio = ratio;
                v.max_ratio_at = t;
            }
        }
        if v.max_ratio > self.lipschitz * (1.0 + 1e-3) {
            return Err(SolverError::LipschitzViolated {
                declared: self.lipschitz,
                sampled: v.max_ratio,
                t: v.max_ratio_at,
            });
        }
        self.validation = Some(v);
        Ok(self.validation.as_ref().expect("set"))
    }

    /// [`validate`](Self::validate) with default sampling on `window`.
    pub fn validated(mut self, window: (f64, f64)) -> Result<Self, SolverError> {
        self.validate(window, VALIDATION_RADIUS, VALIDATION_SAMPLES)?;
        Ok(self)
    }

    /// Constant taken from sampling: `L = 1.001 · max ratio`.
    pub fn estimated(exprs: Vec<Expr>, window: (f64, f64)) -> Result<Self, SolverError> {
        let mut spec = Self::new(exprs, f64::MAX)?;
        let sampled = spec.validate(window, VALIDATION_RADIUS, VALIDATION_SAMPLES)?.max_ratio;
        if sampled == 0.0 {
            return Err(SolverError::Nonlinearity("sampled Lipschitz ratio is zero".into()));
        }
        spec.lipschitz = sampled * (1.0 + 1e-3);
        Ok(spec)
    }

    fn is_zero(&self) -> bool {
        self.lipschitz == 0.0
    }
}

/// `τ ↦ F(τ, s(τ))` for a sampled `s`.
struct Composed<'a> {
    spec: &'a LipschitzSpec,
    s: &'a GridFunction,
}

impl Forcing for Composed<'_> {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), SolverError> {
        let mut x = vec![0.0; self.spec.dim()];
        self.s.eval_into(t, &mut x)?;
        self.spec.eval_into(t, &x, out)
    }
}

#[derive(Debug, Clone)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Starting `ψ₀`; zero when absent. Interpolated onto the kernel grid.
    pub initial: Option<GridFunction>,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            tol: 1e-7,
            max_iter: 200,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardReport {
    pub iterations: usize,
    /// `‖ψ_{k+1} − ψ_k‖_b / ‖ψ_k − ψ_{k−1}‖_b`.
    pub ratios: Vec<f64>,
    pub steps: Vec<f64>,
    pub final_step: f64,
    /// `max |φ' − Aφ − f − F(·, φ)|` on the trusted grid.
    pub final_residual: f64,
    pub constants: Constants,
    pub lipschitz: f64,
    pub f_norm: f64,
    /// `2𝒩L/ν`.
    pub alpha: f64,
    /// `4𝒩²L‖f‖/(ν(ν − 2𝒩L))`.
    pub r: f64,
    /// Measured `‖φ − φ₀‖_b` on the trusted window.
    pub deviation: f64,
    pub trusted: (f64, f64),
    pub t_cut: f64,
    pub tol: f64,
    pub center_residual: Option<f64>,
    pub lipschitz_validation: Option<LipschitzValidation>,
}

impl PicardReport {
    /// `‖φ − φ₀‖ ≤ r(1 + 1e−3)` and every ratio `≤ α + 0.05`.
    pub fn invariants_hold(&self) -> bool {
        self.deviation <= self.r * (1.0 + 1e-3) && self.ratios.iter().all(|&q| q <= self.alpha + 0.05)
    }
}

#[derive(Debug, Clone)]
pub struct PicardSolution {
    /// `φ = φ₀ + ψ̄` on the trusted window.
    pub solution: GridFunction,
    pub phi0: GridFunction,
    /// `φ` on the whole kernel window.
    pub full: GridFunction,
    pub report: PicardReport,
}

pub(crate) fn contraction(constants: Constants, lipschitz: f64) -> Result<(f64, f64), SolverError> {
    let Constants { n, nu } = constants;
    let alpha = 2.0 * n * lipschitz / nu;
    if alpha >= 1.0 {
        return Err(SolverError::ContractionViolated {
            alpha,
            limit: nu / (2.0 * n),
        });
    }
    Ok((alpha, n / nu))
}

/// Horizon beyond which the truncated fixed point is within `tol/2`.
///
/// A truncation defect decays into the window at the reduced rate
/// `μ = ν √((1 − α)/(1 + α))`, for which the linearised feedback
/// `𝒩L ∫ e^{−ν|t−τ|} e^{−μ|τ|} dτ` stays below `(1 + α)/2` of the defect.
pub(crate) fn nonlinear_tail(constants: Constants, alpha: f64, g_norm: f64, tol: f64) -> f64 {
    let Constants { n, nu } = constants;
    if g_norm <= 0.0 {
        return 0.0;
    }
    let mu = nu * ((1.0 - alpha) / (1.0 + alpha)).sqrt();
    let c = n / nu * g_norm * 2.0 / (1.0 - alpha);
    ((2.0 * c / tol).ln() / mu).max(0.0)
}

/// Linear part `φ₀ = 𝔾f` on the full window with `‖f‖_b`.
pub(crate) fn linear_part(kernel: &GreenKernel, f: &dyn Forcing) -> Result<(GridFunction, f64), SolverError> {
    green_integral(kernel, f)
}

pub(crate) fn iterate(
    kernel: &GreenKernel,
    f: &dyn Forcing,
    phi0: &GridFunction,
    f_norm: f64,
    spec: &LipschitzSpec,
    opts: &PicardOptions,
) -> Result<PicardSolution, SolverError> {
    let n = kernel.dim();
    if spec.dim() != n {
        return Err(SolverError::Dimension {
            expected: n,
            got: spec.dim(),
        });
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(SolverError::Invalid("tolerance must be positive and max_iter at least 1".into()));
    }
    let constants = kernel.constants();
    let (alpha, _) = contraction(constants, spec.lipschitz())?;
    let mut psi = match &opts.initial {
        None => GridFunction::zeros(phi0.start(), phi0.step(), phi0.len(), n),
        Some(g) => {
            if g.dim() != n {
                return Err(SolverError::Dimension { expected: n, got: g.dim() });
            }
            let mut data = Vec::with_capacity(phi0.len() * n);
            let mut buf = vec![0.0; n];
            for i in 0..phi0.len() {
                g.eval_into(phi0.time(i), &mut buf)?;
                data.extend_from_slice(&buf);
            }
            GridFunction::new(phi0.start(), phi0.step(), n, data)
        }
    };
    let stop = opts.tol * (1.0 - alpha);
    let mut steps = Vec::new();
    let mut ratios = Vec::new();
    let mut forcing_norm: f64 = 0.0;
    let mut converged = false;
    while steps.len() < opts.max_iter {
        let next = if spec.is_zero() {
            GridFunction::zeros(phi0.start(), phi0.step(), phi0.len(), n)
        } else {
            let s = phi0.add_scaled(1.0, &psi)?;
            let (g, g_norm) = green_integral(kernel, &Composed { spec, s: &s })?;
            forcing_norm = g_norm;
            g
        };
        let step = next.distance(&psi)?;
        if let Some(&prev) = steps.last() {
            if prev > 0.0 {
                ratios.push(step / prev);
            }
        }
        steps.push(step);
        psi = next;
        if step <= stop {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SolverError::NotConverged {
            iterations: steps.len(),
            last_ratio: ratios.last().copied().unwrap_or(f64::NAN),
            last_step: steps.last().copied().unwrap_or(f64::NAN),
        });
    }
    let t_cut = nonlinear_tail(constants, alpha, f_norm.max(forcing_norm), opts.tol);
    let trusted = trusted_or_error(kernel, t_cut)?;
    let full = phi0.add_scaled(1.0, &psi)?;
    let rhs = |t: f64, x: &[f64], out: &mut [f64]| {
        f.eval_into(t, out)?;
        let mut nl = vec![0.0; n];
        spec.eval_into(t, x, &mut nl)?;
        for (o, v) in out.iter_mut().zip(nl) {
            *o += v;
        }
        Ok(())
    };
    let (final_residual, at) = ode_residual(kernel.operator(), &full, &rhs, trusted)?;
    let bound = 10.0 * opts.tol;
    if final_residual > bound {
        return Err(SolverError::Residual {
            residual: final_residual,
            t: at,
            bound,
        });
    }
    let center_residual = full.index_of(0.0).and_then(|i| kernel.center_component(&full.sample_vector(i)));
    let Constants { n: nn, nu } = constants;
    let l = spec.lipschitz();
    let r = 4.0 * nn * nn * l * f_norm / (nu * (nu - 2.0 * nn * l));
    let deviation = psi.sup_norm_on(trusted.0, trusted.1);
    let report = PicardReport {
        iterations: steps.len(),
        ratios,
        final_step: *steps.last().expect("at least one iteration"),
        steps,
        final_residual,
        constants,
        lipschitz: l,
        f_norm,
        alpha,
        r,
        deviation,
        trusted,
        t_cut,
        tol: opts.tol,
        center_residual,
        lipschitz_validation: spec.validation().cloned(),
    };
    Ok(PicardSolution {
        solution: full.restrict(trusted.0, trusted.1),
        phi0: phi0.restrict(trusted.0, trusted.1),
        full,
        report,
    })
}

/// Picard iteration from `ψ₀ ≡ 0`.
pub fn picard_solve(
    kernel: &GreenKernel,
    f: &dyn Forcing,
    spec: &LipschitzSpec,
    tol: f64,
    max_iter: usize,
) -> Result<PicardSolution, SolverError> {
    picard_solve_from(
        kernel,
        f,
        spec,
        &PicardOptions {
            tol,
            max_iter,
            initial: None,
        },
    )
}

/// Picard iteration with explicit options.
pub fn picard_solve_from(
    kernel: &GreenKernel,
    f: &dyn Forcing,
    spec: &LipschitzSpec,
    opts: &PicardOptions,
) -> Result<PicardSolution, SolverError> {
    contraction(kernel.constants(), spec.lipschitz())?;
    let (phi0, f_norm) = linear_part(kernel, f)?;
    iterate(kernel, f, &phi0, f_norm, spec, opts)
}
