//! End-to-end acceptance checks. Runs without the libtest harness so that
//! each check prints one PASS/FAIL line in the normal test output.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trichotomy::cli::{load_problem, run, Command, Flags, Problem};
use trichotomy::hyperbolicity::{
    build_trichotomy, Constants, GreenKernel, Side, TrichotomyCertificate, TrichotomyOutcome,
};
use trichotomy::linalg::{op_norm, Matrix};
use trichotomy::propagator::{CoefficientMatrix, TransitionOperator};
use trichotomy::rap::{remote_period_residual, solution_rap_audit, AuditInput, ScanOptions, Tail};
use trichotomy::solvers::{
    epsilon_continuation, example_c1_probe, picard_solve, picard_solve_from, solve_linear_bounded, FnForcing,
    GridFunction, LipschitzSpec, PicardOptions,
};

type Outcome = Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn certified(p: &Problem) -> Result<(TrichotomyCertificate, GreenKernel), String> {
    let op = Arc::new(TransitionOperator::with_tolerances(p.a.clone(), p.tolerances()));
    match build_trichotomy(&op, p.spec.window).map_err(|e| e.to_string())? {
        TrichotomyOutcome::Certified(c) => {
            let k = GreenKernel::whole_line(op, &c).map_err(|e| e.to_string())?;
            Ok((c, k))
        }
        TrichotomyOutcome::Incompatible(_) => Err("projections incompatible".into()),
    }
}

fn scalar_kernel(window: f64) -> GreenKernel {
    let op = Arc::new(TransitionOperator::new(CoefficientMatrix::diagonal(&[-1.0])));
    let cert = TrichotomyCertificate::from_projectors(
        &op,
        &Matrix::identity(1, 1),
        &Matrix::zeros(1, 1),
        Some(Constants::new(1.0, 1.0)),
        window,
    )
    .unwrap();
    GreenKernel::whole_line(op, &cert).unwrap()
}

fn half_forcing() -> FnForcing<impl Fn(f64, &mut [f64]) + Sync> {
    FnForcing::new(1, |_t: f64, out: &mut [f64]| out[0] = 0.5)
}

fn ensure(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn jump_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = 0.0f64;
    let mut count = 0;
    for name in ["diag_cos.json", "trichotomy_tanh.json", "rotation_conjugated.json"] {
        let p = load_problem(fixture(name)).map_err(|e| e.to_string())?;
        let (_, k) = certified(&p)?;
        let id = Matrix::identity(p.dim(), p.dim());
        let (a, b) = (-p.spec.window, p.spec.window);
        for _ in 0..20 {
            let tau = rng.random_range(a..b);
            let plus = k.matrix(tau, tau, Some(Side::Plus)).map_err(|e| e.to_string())?;
            let minus = k.matrix(tau, tau, Some(Side::Minus)).map_err(|e| e.to_string())?;
            worst = worst.max(op_norm(&(plus - minus - &id)));
            count += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(
        worst <= 1e-6 && secs < 10.0,
        format!("max |G(tau+,tau) - G(tau-,tau) - I| = {worst:.2e} over {count} shifts in {secs:.2}s"),
    )
}

fn linear_closed_form() -> Outcome {
    let start = Instant::now();
    let p = load_problem(fixture("diag_cos.json")).map_err(|e| e.to_string())?;
    let (_, k) = certified(&p)?;
    let sol = solve_linear_bounded(&k, &p.f, p.spec.tolerances.tol).map_err(|e| e.to_string())?;
    let phi = &sol.full;
    let mut err = 0.0f64;
    for i in 0..phi.len() {
        let t = phi.time(i);
        if !(-10.0..=10.0).contains(&t) {
            continue;
        }
        let x = phi.sample(i);
        err = err
            .max((x[0] - 0.5 * (t.cos() + t.sin())).abs())
            .max((x[1] - 0.5 * (t.sin() - t.cos())).abs());
    }
    let x0 = phi.eval(0.0).map_err(|e| e.to_string())?;
    let e0 = (x0[0] - 0.5).abs().max((x0[1] + 0.5).abs());
    let secs = start.elapsed().as_secs_f64();
    ensure(
        err <= 1e-6 && e0 <= 1e-6 && secs < 5.0 && sol.report.trusted.0 <= -10.0 && sol.report.trusted.1 >= 10.0,
        format!(
            "max error on [-10, 10] = {err:.2e}, phi(0) = ({:.8}, {:.8}), {secs:.2}s",
            x0[0], x0[1]
        ),
    )
}

const LINEAR_FIXTURES: [&str; 4] = ["diag_cos.json", "trichotomy_tanh.json", "rotation_conjugated.json", "atan_forced.json"];

fn operator_bound() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for name in LINEAR_FIXTURES {
        let p = load_problem(fixture(name)).map_err(|e| e.to_string())?;
        let (c, k) = certified(&p)?;
        let s = solve_linear_bounded(&k, &p.f, p.spec.tolerances.tol).map_err(|e| e.to_string())?;
        let bound = 2.0 * c.constants.n / c.constants.nu * s.report.f_norm;
        ok &= s.report.sup_norm <= bound * (1.0 + 1e-6);
        lines.push(format!("{name} {:.4} <= {:.4}", s.report.sup_norm, bound));
    }
    ensure(ok, lines.join(", "))
}

fn ode_residuals() -> Outcome {
    let mut worst = 0.0f64;
    let mut n = 0;
    for name in LINEAR_FIXTURES {
        let p = load_problem(fixture(name)).map_err(|e| e.to_string())?;
        let (_, k) = certified(&p)?;
        let s = solve_linear_bounded(&k, &p.f, p.spec.tolerances.tol).map_err(|e| e.to_string())?;
        worst = worst.max(s.report.residual);
        n += 1;
    }
    let k = scalar_kernel(40.0);
    let spec = LipschitzSpec::parse(&["0.1*sin(x1)"], 0.1).unwrap();
    let s = picard_solve(&k, &half_forcing(), &spec, 1e-7, 200).map_err(|e| e.to_string())?;
    worst = worst.max(s.report.final_residual);
    n += 1;
    ensure(worst <= 1e-5, format!("max |phi' - A phi - f - F(phi)| = {worst:.2e} over {n} solutions"))
}

fn trichotomy_recovery() -> Outcome {
    let p = load_problem(fixture("trichotomy_tanh.json")).map_err(|e| e.to_string())?;
    let (c, _) = certified(&p)?;
    let dp = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.0, 1.0]));
    let dq = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 1.0, 1.0]));
    let ep = (&c.p - dp).abs().max();
    let eq = (&c.q - dq).abs().max();
    let r = &c.report;
    let ids = r.commutator.max(r.identity_residual).max(r.orthogonality);
    ensure(
        ep <= 1e-4 && eq <= 1e-4 && ids <= 1e-9,
        format!("|P - diag(1,0,1)| = {ep:.2e}, |Q - diag(0,1,1)| = {eq:.2e}, identities {ids:.2e}"),
    )
}

fn arctan_counterexample() -> Outcome {
    let p = load_problem(fixture("arctan.json")).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let flags = Flags {
        out: dir.path().to_path_buf(),
        ..Flags::default()
    };
    let out = run(Command::CheckTrichotomy, &p, &flags).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(dir.path().join("certificate.json")).map_err(|e| e.to_string())?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let pp = v["p_plus"][0][0].as_f64().unwrap_or(f64::NAN);
    let pm = v["p_minus"][0][0].as_f64().unwrap_or(f64::NAN);
    let res = v["compatibility_residual"].as_f64().unwrap_or(f64::NAN);
    let (ip, im) = (&v["plus"]["interval"], &v["minus"]["interval"]);
    ensure(
        out.code == 2
            && out.summary.contains("dichotomy on both half-lines, projections incompatible")
            && pp.abs() < 1e-6
            && (pm - 1.0).abs() < 1e-6
            && (res - 1.0).abs() < 1e-6
            && *ip == serde_json::json!([0.0, 50.0])
            && *im == serde_json::json!([-50.0, 0.0]),
        format!("exit {}, P+ = {pp:.3e} on {ip}, P- = {pm:.6} on {im}, residual {res:.6}", out.code),
    )
}

fn bisect(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if g(a) * g(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

fn picard_contraction() -> Outcome {
    let k = scalar_kernel(40.0);
    let f = half_forcing();
    let spec = LipschitzSpec::parse(&["0.1*sin(x1)"], 0.1).unwrap();
    let a = picard_solve(&k, &f, &spec, 1e-7, 200).map_err(|e| e.to_string())?;
    let (t0, h, len) = (a.full.start(), a.full.step(), a.full.len());
    let start = GridFunction::from_fn(t0, h, len, 1, |t, out| out[0] = 2.0 * (0.7 * t).cos() - 1.0);
    let opts = PicardOptions {
        tol: 1e-7,
        max_iter: 200,
        initial: Some(start),
    };
    let b = picard_solve_from(&k, &f, &spec, &opts).map_err(|e| e.to_string())?;
    let root = bisect(|x| -x + 0.5 + 0.1 * x.sin(), 0.0, 1.0);
    let fp = a.solution.sup_norm_on(-1e9, 1e9);
    let fp_err = a.solution.data().iter().map(|x| (x - root).abs()).fold(0.0, f64::max);
    let max_ratio = a.report.ratios.iter().chain(&b.report.ratios).copied().fold(0.0, f64::max);
    let agree = a.solution.distance(&b.solution).map_err(|e| e.to_string())?;
    let r = &a.report;
    ensure(
        max_ratio <= 0.25
            && fp_err <= 1e-5
            && (r.deviation - 0.0525).abs() <= 1e-3
            && r.deviation <= r.r
            && (r.alpha - 0.2).abs() < 1e-12
            && (r.r - 0.25).abs() < 1e-12
            && agree <= 1e-6,
        format!(
            "max ratio {max_ratio:.4}, fixed point {fp:.6} (root {root:.6}, error {fp_err:.1e}), |phi - phi0| = {:.5} <= r = {:.3}, two starts differ by {agree:.1e}",
            r.deviation, r.r
        ),
    )
}

fn continuation() -> Outcome {
    let k = scalar_kernel(80.0);
    let spec = LipschitzSpec::parse(&["sin(x1)"], 1.0).unwrap();
    let eps = [0.4, 0.2, 0.1, 0.05];
    let rep = epsilon_continuation(&k, &half_forcing(), &spec, &eps, 1e-7).map_err(|e| e.to_string())?;
    let devs: Vec<f64> = rep.steps.iter().map(|s| s.deviation).collect();
    let decreasing = devs.windows(2).all(|w| w[1] < w[0]);
    let (n, nu, l, f_norm) = (1.0, 1.0, 1.0, 0.5);
    let bounded = rep
        .steps
        .iter()
        .all(|s| s.deviation <= 4.0 * s.eps.abs() * n * n * l * f_norm / (nu * (nu - 2.0 * n * l * s.eps.abs())));
    ensure(decreasing && bounded, format!("deviations {devs:.5?}"))
}

fn c1_probe() -> Outcome {
    let p = example_c1_probe(1.0, 20.0).map_err(|e| e.to_string())?;
    // q(-2) = (2 ∫_{-∞}^{-2} e^{2(s+2)} e^{s} ds)^{-1/2} with the integral done by hand.
    let oracle = (2.0 / 3.0 * (-2.0f64).exp()).powf(-0.5);
    let table: Vec<f64> = p.sup_table.iter().map(|r| r.window).collect();
    ensure(
        p.cross_check_error <= 1e-5
            && (p.q_minus2 - 3.3292).abs() <= 1e-3
            && (p.q_minus2 - oracle).abs() <= 1e-9
            && table.starts_with(&[5.0, 10.0, 20.0]),
        format!(
            "cross-check {:.2e} on [-5, 5], q(-2) = {:.6} (oracle {oracle:.6}), sup table T = {table:?}",
            p.cross_check_error, p.q_minus2
        ),
    )
}

fn rap_diagnostics() -> Outcome {
    let sine = GridFunction::sample_scalar(-60.0, 60.0, 0.01, f64::sin);
    let atan = GridFunction::sample_scalar(-60.0, 60.0, 0.01, f64::atan);
    let rs = remote_period_residual(&sine, 2.0 * std::f64::consts::PI, 10.0, Tail::Both).map_err(|e| e.to_string())?;
    let ra = remote_period_residual(&atan, 1.0, 10.0, Tail::Both).map_err(|e| e.to_string())?;

    let p = load_problem(fixture("atan_forced.json")).map_err(|e| e.to_string())?;
    let (_, k) = certified(&p)?;
    let s = solve_linear_bounded(&k, &p.f, p.spec.tolerances.tol).map_err(|e| e.to_string())?;
    let phi = &s.solution;
    let f = GridFunction::from_fn(phi.start(), phi.step(), phi.len(), 2, |t, out| {
        out[0] = t.atan();
        out[1] = t.atan();
    });
    let opts = ScanOptions::new((0.5, 5.0), 0.5).with_schedule(&[5.0, 10.0, 20.0, 40.0]);
    let audit = solution_rap_audit(phi, &[AuditInput::new("f", f)], &[0.05], &opts).map_err(|e| e.to_string())?;
    let row = &audit.rows[0];
    ensure(
        rs <= 1e-9 && (ra - 0.01099).abs() <= 1e-4 && row.solution_fraction == 1.0 && audit.all_inherited,
        format!(
            "sin 2pi residual {rs:.1e}, atan residual {ra:.5}, audit accepts {}/{} shifts for the solution",
            row.solution_accepted.len(),
            opts.taus().len()
        ),
    )
}

fn main() {
    let checks: [(&str, fn() -> Outcome); 10] = [
        ("Green jump identity", jump_identity),
        ("linear solve vs closed form", linear_closed_form),
        ("operator bound", operator_bound),
        ("ODE residual", ode_residuals),
        ("trichotomy recovery", trichotomy_recovery),
        ("arctan counterexample", arctan_counterexample),
        ("Picard contraction", picard_contraction),
        ("epsilon continuation", continuation),
        ("C1 probe", c1_probe),
        ("RAP diagnostics", rap_diagnostics),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        match check() {
            Ok(d) => println!("criterion {:>2} PASS {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {d}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
