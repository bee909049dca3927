use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use super::problem::{Mode, Problem};
use super::{CliError, Command, EXIT_NEGATIVE, EXIT_OK};
use crate::expr::Point;
use crate::hyperbolicity::{
    build_trichotomy, certify_dichotomy, certify_left_dichotomy, estimate_constants, verify_dichotomy,
    GreenKernel, HyperbolicityError, TrichotomyCertificate, TrichotomyOutcome,
};
use crate::linalg::matrix_from_rows;
use crate::propagator::TransitionOperator;
use crate::rap::{
    almost_period_scan, lagrange_report, solution_rap_audit, AuditInput, ScanOptions, Tail, DEFAULT_SCHEDULE,
};
use crate::solvers::{
    epsilon_continuation, example_c1_probe, picard_solve, solve_linear_bounded, GridFunction, LipschitzSpec,
};

/// Command-line overrides of the problem file.
#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub out: PathBuf,
    pub window: Option<f64>,
    pub tol: Option<f64>,
    pub eps: Option<Vec<f64>>,
    pub tau_range: Option<(f64, f64, f64)>,
    pub side: Option<Tail>,
    pub certificate: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Process exit code.
    pub code: i32,
    pub summary: String,
    pub artifacts: Vec<PathBuf>,
}

const DEFAULT_CONTINUATION: [f64; 4] = [0.4, 0.2, 0.1, 0.05];
const DEFAULT_RAP_EPS: [f64; 2] = [0.1, 0.01];

struct Out {
    dir: PathBuf,
    artifacts: Vec<PathBuf>,
}

impl Out {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Out {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.artifacts.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let body = serde_json::to_string_pretty(value).expect("reports serialize");
        self.text(name, &(body + "\n"))
    }

    fn csv(&mut self, name: &str, g: &GridFunction) -> Result<(), CliError> {
        self.text(name, &g.to_csv())
    }

    fn finish(self, code: i32, summary: String) -> RunOutcome {
        RunOutcome {
            code,
            summary,
            artifacts: self.artifacts,
        }
    }
}

struct Setup<'p> {
    problem: &'p Problem,
    op: Arc<TransitionOperator>,
    window: f64,
    tol: f64,
}

fn negative(h: &HyperbolicityError) -> bool {
    matches!(
        h,
        HyperbolicityError::NoDichotomy { .. } | HyperbolicityError::NonHyperbolic { .. } | HyperbolicityError::DecayViolated(_)
    )
}

enum Built {
    Kernel(GreenKernel, Value),
    /// The check ran and failed.
    Refused(String, Value),
}

fn certificate(setup: &Setup, flags: &Flags) -> Result<Option<super::CertificateSpec>, CliError> {
    match &flags.certificate {
        Some(path) => Ok(Some(super::load_certificate(path)?)),
        None => Ok(setup.problem.spec.certificate.clone()),
    }
}

fn build_kernel(setup: &Setup, flags: &Flags) -> Result<Built, CliError> {
    let op = &setup.op;
    let t = setup.window;
    let cert = certificate(setup, flags)?;
    match setup.problem.spec.mode {
        Mode::WholeLine => {
            let tri = match &cert {
                Some(c) => {
                    let q = c.q.as_ref().ok_or_else(|| CliError::Problem {
                        pointer: "/certificate/Q".into(),
                        message: "whole-line certificates need Q".into(),
                    })?;
                    TrichotomyCertificate::from_projectors(op, &matrix_from_rows(&c.p), &matrix_from_rows(q), c.constants(), t)
                }
                None => match build_trichotomy(op, t) {
                    Ok(TrichotomyOutcome::Certified(c)) => Ok(c),
                    Ok(TrichotomyOutcome::Incompatible(r)) => {
                        let msg = format!(
                            "no trichotomy: dichotomy on both half-lines, projections incompatible (residual {:.3e})",
                            r.compatibility_residual
                        );
                        let report = serde_json::to_value(TrichotomyOutcome::Incompatible(r)).expect("serializes");
                        return Ok(Built::Refused(msg, report));
                    }
                    Err(e) => Err(e),
                },
            };
            match tri {
                Ok(c) => {
                    let v = serde_json::to_value(&c).expect("serializes");
                    Ok(Built::Kernel(GreenKernel::whole_line(op.clone(), &c)?, v))
                }
                Err(e) if negative(&e) => Ok(Built::Refused(format!("no trichotomy: {e}"), json!({"status": "failed", "error": e.to_string()}))),
                Err(e) => Err(e.into()),
            }
        }
        Mode::HalfLine => {
            let dc = match &cert {
                Some(c) => {
                    let p = matrix_from_rows(&c.p);
                    let constants = match c.constants() {
                        Some(k) => Ok(k),
                        None => estimate_constants(op, &p, (0.0, t)).map(|f| f.constants),
                    };
                    constants.and_then(|k| verify_dichotomy(op, &p, (0.0, t), k))
                }
                None => certify_dichotomy(op, (0.0, t)),
            };
            match dc {
                Ok(c) => {
                    let v = serde_json::to_value(&c).expect("serializes");
                    Ok(Built::Kernel(GreenKernel::half_line(op.clone(), &c)?, v))
                }
                Err(e) if negative(&e) => Ok(Built::Refused(format!("no dichotomy: {e}"), json!({"status": "failed", "error": e.to_string()}))),
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn lipschitz_spec(problem: &Problem, span: (f64, f64)) -> Result<Option<LipschitzSpec>, CliError> {
    let Some(exprs) = &problem.nonlinearity else {
        return Ok(None);
    };
    let spec = match problem.spec.lipschitz {
        Some(l) => {
            let s = LipschitzSpec::new(exprs.clone(), l)?;
            if problem.spec.validate_lipschitz {
                s.validated(span)?
            } else {
                s
            }
        }
        None => LipschitzSpec::estimated(exprs.clone(), span)?,
    };
    Ok(Some(spec))
}

/// Bounded solution: linear when the problem has no `F`, Picard otherwise.
fn solve(setup: &Setup, kernel: &GreenKernel) -> Result<(GridFunction, Value, String), CliError> {
    let p = setup.problem;
    match lipschitz_spec(p, kernel.span())? {
        None => {
            let s = solve_linear_bounded(kernel, &p.f, setup.tol)?;
            let r = &s.report;
            let line = format!(
                "bounded solution on [{:.3}, {:.3}]: sup |phi| = {:.6e} <= bound {:.6e}, residual {:.3e}\n",
                r.trusted.0, r.trusted.1, r.sup_norm, r.norm_bound, r.residual
            );
            Ok((s.solution, serde_json::to_value(&s.report).expect("serializes"), line))
        }
        Some(spec) => {
            let s = picard_solve(kernel, &p.f, &spec, setup.tol, p.spec.tolerances.max_iter)?;
            let r = &s.report;
            let line = format!(
                "picard converged in {} iterations: alpha = {:.6}, deviation {:.6e} <= r = {:.6e}\n",
                r.iterations, r.alpha, r.deviation, r.r
            );
            Ok((s.solution, serde_json::to_value(&s.report).expect("serializes"), line))
        }
    }
}

fn scan_options(setup: &Setup, flags: &Flags) -> ScanOptions {
    let rap = setup.problem.spec.rap.clone().unwrap_or_default();
    let (a, b, step) = flags
        .tau_range
        .or(rap.tau_range.map(|r| (r[0], r[1], r[2])))
        .unwrap_or((0.5, 10.0, 0.5));
    let side = flags.side.or(rap.side).unwrap_or(match setup.problem.spec.mode {
        Mode::WholeLine => Tail::Both,
        Mode::HalfLine => Tail::Plus,
    });
    let mut schedule = rap.schedule.unwrap_or_else(|| DEFAULT_SCHEDULE.to_vec());
    if schedule.is_empty() {
        schedule = DEFAULT_SCHEDULE.to_vec();
    }
    ScanOptions::new((a, b), step).with_schedule(&schedule).with_side(side)
}

fn rap_eps(setup: &Setup, flags: &Flags) -> Vec<f64> {
    flags
        .eps
        .clone()
        .or_else(|| setup.problem.spec.rap.as_ref().and_then(|r| r.eps.clone()))
        .unwrap_or_else(|| DEFAULT_RAP_EPS.to_vec())
}

/// `A` (row-major), `f` and the slices `F(·, e_k)` on the grid of `φ`.
fn audit_inputs(problem: &Problem, phi: &GridFunction) -> Result<Vec<AuditInput>, CliError> {
    let n = problem.dim();
    let (t0, h, len) = (phi.start(), phi.step(), phi.len());
    let mut err: Option<CliError> = None;
    let mut record = |e: CliError| {
        if err.is_none() {
            err = Some(e);
        }
    };
    let mut inputs = Vec::new();
    let a = GridFunction::from_fn(t0, h, len, n * n, |t, out| {
        for (k, e) in problem.a.entries().iter().enumerate() {
            match e.eval(&Point::at(t)) {
                Ok(v) => out[k] = v,
                Err(source) => record(crate::solvers::SolverError::Eval { t, source }.into()),
            }
        }
    });
    inputs.push(AuditInput::new("A", a));
    let f = GridFunction::from_fn(t0, h, len, n, |t, out| {
        for (k, e) in problem.f.0.iter().enumerate() {
            match e.eval(&Point::at(t)) {
                Ok(v) => out[k] = v,
                Err(source) => record(crate::solvers::SolverError::Eval { t, source }.into()),
            }
        }
    });
    inputs.push(AuditInput::new("f", f));
    if let Some(fs) = &problem.nonlinearity {
        for k in 0..n {
            let mut x = vec![0.0; n];
            x[k] = 1.0;
            let g = GridFunction::from_fn(t0, h, len, n, |t, out| {
                for (i, e) in fs.iter().enumerate() {
                    match e.eval(&Point::new(t, &x)) {
                        Ok(v) => out[i] = v,
                        Err(source) => record(crate::solvers::SolverError::Eval { t, source }.into()),
                    }
                }
            });
            inputs.push(AuditInput::new(format!("F(t, e{})", k + 1), g));
        }
    }
    match err {
        Some(e) => Err(e),
        None => Ok(inputs),
    }
}

/// Runs one command on a compiled problem.
pub fn run(command: Command, problem: &Problem, flags: &Flags) -> Result<RunOutcome, CliError> {
    let window = flags.window.unwrap_or(problem.spec.window);
    if !(window > 0.0 && window.is_finite()) {
        return Err(CliError::Usage(format!("--window must be positive, got {window}")));
    }
    let tol = flags.tol.unwrap_or(problem.spec.tolerances.tol);
    if !(tol > 0.0) {
        return Err(CliError::Usage(format!("--tol must be positive, got {tol}")));
    }
    let setup = Setup {
        problem,
        op: Arc::new(TransitionOperator::with_tolerances(problem.a.clone(), problem.tolerances())),
        window,
        tol,
    };
    let mut out = Out::new(&flags.out)?;
    let mut summary = String::new();
    let name = problem.spec.name.clone().unwrap_or_else(|| "problem".into());

    match command {
        Command::CheckDichotomy => {
            let right = certify_dichotomy(&setup.op, (0.0, window));
            let left = match problem.spec.mode {
                Mode::WholeLine => Some(certify_left_dichotomy(&setup.op, (-window, 0.0))),
                Mode::HalfLine => None,
            };
            let mut report = json!({"problem": name});
            let mut ok = true;
            let sides = std::iter::once(("right", right)).chain(left.map(|l| ("left", l)));
            for (label, res) in sides {
                match res {
                    Ok(c) => {
                        let _ = writeln!(
                            summary,
                            "{label} half-line [{}, {}]: dichotomy with N = {:.6}, nu = {:.6}, rank P = {}",
                            c.interval.0,
                            c.interval.1,
                            c.constants.n,
                            c.constants.nu,
                            crate::linalg::projector_rank(&c.projector)
                        );
                        report[label] = serde_json::to_value(&c).expect("serializes");
                    }
                    Err(e) if negative(&e) => {
                        ok = false;
                        let _ = writeln!(summary, "{label} half-line: no dichotomy: {e}");
                        report[label] = json!({"status": "failed", "error": e.to_string()});
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            out.json("dichotomy.json", &report)?;
            Ok(out.finish(if ok { EXIT_OK } else { EXIT_NEGATIVE }, summary))
        }
        Command::CheckTrichotomy => match build_kernel(&setup, flags)? {
            Built::Kernel(k, cert) => {
                let c = k.constants();
                let _ = writeln!(
                    summary,
                    "{} certified on window {window}: N = {:.6}, nu = {:.6}, max |P(t)| = {:.4}",
                    if k.is_whole_line() { "trichotomy" } else { "dichotomy" },
                    c.n,
                    c.nu,
                    k.max_projector_norm()
                );
                out.json("certificate.json", &cert)?;
                Ok(out.finish(EXIT_OK, summary))
            }
            Built::Refused(msg, report) => {
                let _ = writeln!(summary, "{msg}");
                out.json("certificate.json", &report)?;
                Ok(out.finish(EXIT_NEGATIVE, summary))
            }
        },
        Command::SolveLinear | Command::SolveSemilinear => {
            let kernel = match build_kernel(&setup, flags)? {
                Built::Kernel(k, _) => k,
                Built::Refused(msg, report) => {
                    out.json("report.json", &report)?;
                    return Ok(out.finish(EXIT_NEGATIVE, msg + "\n"));
                }
            };
            if command == Command::SolveLinear {
                let s = solve_linear_bounded(&kernel, &problem.f, tol)?;
                let r = &s.report;
                let _ = writeln!(
                    summary,
                    "bounded solution on [{:.3}, {:.3}]: sup |phi| = {:.6e} <= bound {:.6e}, residual {:.3e}",
                    r.trusted.0, r.trusted.1, r.sup_norm, r.norm_bound, r.residual
                );
                out.csv("sol.csv", &s.solution)?;
                out.json("report.json", &s.report)?;
            } else {
                let spec = lipschitz_spec(problem, kernel.span())?.ok_or_else(|| CliError::Problem {
                    pointer: "/F".into(),
                    message: "solve-semilinear needs a nonlinearity F".into(),
                })?;
                let s = picard_solve(&kernel, &problem.f, &spec, tol, problem.spec.tolerances.max_iter)?;
                let r = &s.report;
                let _ = writeln!(
                    summary,
                    "picard converged in {} iterations: alpha = {:.6}, deviation {:.6e} <= r = {:.6e}",
                    r.iterations, r.alpha, r.deviation, r.r
                );
                out.csv("sol.csv", &s.solution)?;
                out.csv("phi0.csv", &s.phi0)?;
                out.json("report.json", &s.report)?;
            }
            Ok(out.finish(EXIT_OK, summary))
        }
        Command::ContinueEpsilon => {
            let kernel = match build_kernel(&setup, flags)? {
                Built::Kernel(k, _) => k,
                Built::Refused(msg, report) => {
                    out.json("continuation.json", &report)?;
                    return Ok(out.finish(EXIT_NEGATIVE, msg + "\n"));
                }
            };
            let spec = lipschitz_spec(problem, kernel.span())?.ok_or_else(|| CliError::Problem {
                pointer: "/F".into(),
                message: "continue-epsilon needs a nonlinearity F".into(),
            })?;
            let eps = flags
                .eps
                .clone()
                .or_else(|| problem.spec.eps.clone())
                .unwrap_or_else(|| DEFAULT_CONTINUATION.to_vec());
            let rep = epsilon_continuation(&kernel, &problem.f, &spec, &eps, tol)?;
            for (k, s) in rep.steps.iter().enumerate() {
                let _ = writeln!(
                    summary,
                    "eps = {:<8} deviation {:.6e} <= bound {:.6e} ({} iterations)",
                    s.eps, s.deviation, s.bound, s.iterations
                );
                out.csv(&format!("sol_eps_{k}.csv"), &s.solution)?;
            }
            let _ = writeln!(summary, "monotone: {}, within bounds: {}", rep.monotone, rep.within_bounds);
            out.json("continuation.json", &rep)?;
            let ok = rep.monotone && rep.within_bounds;
            Ok(out.finish(if ok { EXIT_OK } else { EXIT_NEGATIVE }, summary))
        }
        Command::ProbeC1 => {
            let eps = flags
                .eps
                .as_ref()
                .and_then(|e| e.first().copied())
                .or_else(|| problem.spec.parameters.get("eps").copied())
                .unwrap_or(1.0);
            let probe = example_c1_probe(eps, window)?;
            let _ = writeln!(
                summary,
                "q(-2) = {:.6} (closed form {:.6}), cross-check error {:.3e}",
                probe.q_minus2, probe.q_minus2_closed, probe.cross_check_error
            );
            for row in &probe.sup_table {
                let _ = writeln!(
                    summary,
                    "T = {:<6} sup |q| = {:.6e} at t = {:.2}{}",
                    row.window,
                    row.sup,
                    row.sup_at,
                    row.growth_rate.map(|g| format!(", growth rate {g:.4}")).unwrap_or_default()
                );
            }
            out.csv("q.csv", &probe.q)?;
            out.json("probe.json", &probe)?;
            Ok(out.finish(EXIT_OK, summary))
        }
        Command::RapScan | Command::Audit => {
            let kernel = match build_kernel(&setup, flags)? {
                Built::Kernel(k, _) => k,
                Built::Refused(msg, report) => {
                    let file = if command == Command::Audit { "audit.json" } else { "rap.json" };
                    out.json(file, &report)?;
                    return Ok(out.finish(EXIT_NEGATIVE, msg + "\n"));
                }
            };
            let (phi, _, line) = solve(&setup, &kernel)?;
            summary.push_str(&line);
            let opts = scan_options(&setup, flags);
            let eps = rap_eps(&setup, flags);
            if command == Command::RapScan {
                let mut reports = Vec::new();
                for (k, &e) in eps.iter().enumerate() {
                    let rep = almost_period_scan(&phi, e, &opts)?;
                    let _ = writeln!(
                        summary,
                        "eps = {e}: {} of {} shifts accepted, inclusion length {}, relatively dense: {} (horizon {})",
                        rep.accepted.len(),
                        rep.entries.len(),
                        rep.inclusion_length.map(|l| format!("{l:.3}")).unwrap_or_else(|| "-".into()),
                        rep.relatively_dense,
                        rep.horizon
                    );
                    let mut buf = Vec::new();
                    rep.write_csv(&mut buf).expect("in-memory write");
                    out.text(&format!("residuals_eps{k}.csv"), &String::from_utf8(buf).expect("utf-8"))?;
                    reports.push(rep);
                }
                let lag = lagrange_report(&phi);
                let _ = writeln!(
                    summary,
                    "lagrange stable: {} (sup {:.6e}, inner sup {:.6e}, continuity ratio {:.3})",
                    lag.lagrange_stable, lag.sup_norm, lag.inner_sup, lag.continuity_ratio
                );
                out.csv("sol.csv", &phi)?;
                out.json("rap.json", &reports)?;
                out.json("lagrange.json", &lag)?;
                Ok(out.finish(EXIT_OK, summary))
            } else {
                let inputs = audit_inputs(problem, &phi)?;
                let rep = solution_rap_audit(&phi, &inputs, &eps, &opts)?;
                for row in &rep.rows {
                    let _ = writeln!(
                        summary,
                        "eps = {}: {} common input shifts, solution accepts {}, inherited: {}",
                        row.eps,
                        row.common.len(),
                        row.solution_accepted.len(),
                        row.inherited
                    );
                }
                out.json("audit.json", &rep)?;
                Ok(out.finish(if rep.all_inherited { EXIT_OK } else { EXIT_NEGATIVE }, summary))
            }
        }
    }
}
