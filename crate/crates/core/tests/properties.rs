use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use trichotomy::cli::{parse_spec, ProblemSpec, ToleranceSpec};
use trichotomy::expr::{parse, BinOp, Constant, Expr, Func, Point, Var};
use trichotomy::hyperbolicity::{build_trichotomy, Constants, GreenKernel, TrichotomyCertificate, TrichotomyOutcome};
use trichotomy::linalg::{idempotency_defect, op_norm, projector_from_subspaces, Matrix};
use trichotomy::propagator::{CoefficientMatrix, TransitionOperator};
use trichotomy::rap::{bebutov_distance, remote_period_residual, Tail};
use trichotomy::solvers::{
    picard_solve, picard_solve_from, solve_linear_bounded, FnForcing, GridFunction, LipschitzSpec, PicardOptions,
};

fn saddle() -> &'static GreenKernel {
    static K: OnceLock<GreenKernel> = OnceLock::new();
    K.get_or_init(|| {
        let op = Arc::new(TransitionOperator::new(CoefficientMatrix::diagonal(&[-1.0, 1.0])));
        let TrichotomyOutcome::Certified(c) = build_trichotomy(&op, 30.0).unwrap() else {
            panic!("saddle is hyperbolic")
        };
        GreenKernel::whole_line(op, &c).unwrap()
    })
}

fn rotated() -> &'static GreenKernel {
    static K: OnceLock<GreenKernel> = OnceLock::new();
    K.get_or_init(|| {
        let a = CoefficientMatrix::parse(&[vec!["-cos(t)", "-sin(t) - 0.5"], vec!["0.5 - sin(t)", "cos(t)"]]).unwrap();
        let op = Arc::new(TransitionOperator::new(a));
        let TrichotomyOutcome::Certified(c) = build_trichotomy(&op, 25.0).unwrap() else {
            panic!("conjugated saddle is hyperbolic")
        };
        GreenKernel::whole_line(op, &c).unwrap()
    })
}

fn scalar() -> &'static GreenKernel {
    static K: OnceLock<GreenKernel> = OnceLock::new();
    K.get_or_init(|| {
        let op = Arc::new(TransitionOperator::new(CoefficientMatrix::diagonal(&[-1.0])));
        let c = TrichotomyCertificate::from_projectors(
            &op,
            &Matrix::identity(1, 1),
            &Matrix::zeros(1, 1),
            Some(Constants::new(1.0, 1.0)),
            40.0,
        )
        .unwrap();
        GreenKernel::whole_line(op, &c).unwrap()
    })
}

fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0u32..1000).prop_map(|k| Expr::Num(k as f64 / 8.0)),
        Just(Expr::Var(Var::T)),
        (0usize..3).prop_map(|i| Expr::Var(Var::X(i))),
        Just(Expr::Const(Constant::Pi)),
        Just(Expr::Const(Constant::E)),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (
                prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow]),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, a, b)| Expr::Binary(op, Box::new(a), Box::new(b))),
            (
                prop::sample::select(vec![
                    Func::Sin,
                    Func::Cos,
                    Func::Tan,
                    Func::Atan,
                    Func::Exp,
                    Func::Ln,
                    Func::Sqrt,
                    Func::Abs,
                    Func::Tanh,
                    Func::Cosh,
                    Func::Sinh,
                    Func::Sign
                ]),
                inner
            )
                .prop_map(|(f, a)| Expr::Call(f, Box::new(a))),
        ]
    })
}

fn same_value(a: Result<f64, impl std::fmt::Debug>, b: Result<f64, impl std::fmt::Debug>) -> bool {
    match (a, b) {
        (Ok(x), Ok(y)) => x == y || (x.is_nan() && y.is_nan()),
        (Err(_), Err(_)) => true,
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn expr_display_round_trips(e in expr_strategy(), t in -3.0f64..3.0, x in prop::array::uniform3(-2.0f64..2.0)) {
        let text = e.to_string();
        let back = parse(&text).unwrap();
        prop_assert_eq!(back.to_string(), text);
        let p = Point::new(t, &x);
        prop_assert!(same_value(e.eval(&p), back.eval(&p)));
    }

    #[test]
    fn projector_from_subspaces_is_oblique_projector(
        entries in prop::collection::vec(-1.0f64..1.0, 9),
        k in 0usize..=3,
    ) {
        let m = Matrix::from_column_slice(3, 3, &entries) + Matrix::identity(3, 3) * 2.0;
        let range = m.columns(0, k).into_owned();
        let kernel = m.columns(k, 3 - k).into_owned();
        let p = projector_from_subspaces(&range, &kernel).unwrap();
        prop_assert!(idempotency_defect(&p) < 1e-10);
        prop_assert!((&p * &range - &range).abs().max() < 1e-10);
        prop_assert!((&p * &kernel).abs().max() < 1e-10);
        let q = Matrix::identity(3, 3) - &p;
        prop_assert!((&p * &q).abs().max() < 1e-10);
    }

    #[test]
    fn bebutov_is_a_metric(
        a in prop::array::uniform3(-1.0f64..1.0),
        w in prop::array::uniform3(0.2f64..2.0),
    ) {
        let make = |amp: f64, om: f64| GridFunction::sample_scalar(-20.0, 20.0, 0.05, move |t| amp * (om * t).sin());
        let f = make(a[0], w[0]);
        let g = make(a[1], w[1]);
        let h = make(a[2], w[2]);
        let d = |x: &GridFunction, y: &GridFunction| bebutov_distance(x, y, None).unwrap();
        prop_assert!(d(&f, &f) == 0.0);
        prop_assert!((d(&f, &g) - d(&g, &f)).abs() < 1e-15);
        prop_assert!(d(&f, &h) <= d(&f, &g) + d(&g, &h) + 1e-12);
        let sup = f.distance(&g).unwrap();
        prop_assert!(d(&f, &g) <= sup.min(1.0 / 0.1));
    }

    #[test]
    fn remote_residual_triangle_in_tau(
        a in -2.0f64..2.0,
        k1 in 1usize..60,
        k2 in 1usize..60,
        horizon in 3.0f64..12.0,
    ) {
        let h = 0.05;
        let phi = GridFunction::sample_scalar(-40.0, 40.0, h, move |t| a * t.sin() + (0.3 * t).atan() + (2f64.sqrt() * t).cos());
        let (t1, t2) = (k1 as f64 * h, k2 as f64 * h);
        let r = |tau: f64, th: f64| remote_period_residual(&phi, tau, th, Tail::Plus).unwrap();
        prop_assert!(r(t1 + t2, horizon) <= r(t1, horizon) + r(t2, horizon - t1) + 1e-12);
    }

    #[test]
    fn remote_residual_is_subadditive(
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        tau in 0.1f64..3.0,
        horizon in 0.0f64..10.0,
    ) {
        let f = GridFunction::sample_scalar(-40.0, 40.0, 0.05, move |t| a * t.sin() + (0.3 * t).atan());
        let g = GridFunction::sample_scalar(-40.0, 40.0, 0.05, move |t| b * (1.7 * t).cos());
        let sum = f.add_scaled(1.0, &g).unwrap();
        let r = |x: &GridFunction| remote_period_residual(x, tau, horizon, Tail::Both).unwrap();
        prop_assert!(r(&sum) <= r(&f) + r(&g) + 1e-9);
        prop_assert!((r(&f.scaled(3.0)) - 3.0 * r(&f)).abs() <= 1e-9 * (1.0 + r(&f)));
    }

    #[test]
    fn spec_json_round_trips(
        dim in 1usize..=3,
        coeff in prop::collection::vec(-4i32..=4, 9),
        window in 4u32..200,
        tol_exp in 5i32..10,
        eps in prop::option::of(prop::collection::vec(1u32..16, 0..4)),
    ) {
        let a = (0..dim)
            .map(|i| (0..dim).map(|j| format!("{}*sin(t) + {}", coeff[i * 3 + j], j)).collect())
            .collect();
        let spec = ProblemSpec {
            name: Some("p".into()),
            description: None,
            dim,
            a,
            f: (0..dim).map(|i| format!("cos({i}*t)")).collect(),
            nonlinearity: None,
            lipschitz: None,
            validate_lipschitz: false,
            parameters: Default::default(),
            mode: Default::default(),
            certificate: None,
            window: window as f64 / 4.0,
            tolerances: ToleranceSpec { tol: 10f64.powi(-tol_exp), ..Default::default() },
            eps: eps.map(|v| v.into_iter().map(|k| k as f64 / 32.0).collect()),
            rap: None,
        };
        let back = parse_spec(&spec.to_json()).unwrap();
        prop_assert_eq!(&back, &spec);
        prop_assert!(back.compile().is_ok());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn liouville_and_inversion(a in -1.0f64..1.0, b in -1.0f64..1.0, d in -1.0f64..1.0, s in -3.0f64..3.0, t in -3.0f64..3.0) {
        let m = CoefficientMatrix::parse(&[
            vec![format!("{a} + sin(t)"), format!("{b}*cos(t)")],
            vec![format!("{b}"), format!("{d}")],
        ])
        .unwrap();
        let op = TransitionOperator::new(m);
        let phi = op.transition_matrix(s, t).unwrap();
        let trace_integral = (a + d) * (t - s) - (t.cos() - s.cos());
        let det = phi.determinant();
        prop_assert!((det / trace_integral.exp() - 1.0).abs() < 1e-7, "{} vs {}", det, trace_integral.exp());
        let back = op.transition_matrix(t, s).unwrap();
        prop_assert!((back * &phi - Matrix::identity(2, 2)).abs().max() < 1e-7);
    }

    #[test]
    fn green_linear_in_forcing(
        c in prop::array::uniform4(-1.0f64..1.0),
        w in 0.2f64..2.0,
        alpha in -2.0f64..2.0,
        beta in -2.0f64..2.0,
    ) {
        let k = saddle();
        let f1 = FnForcing::new(2, move |t: f64, out: &mut [f64]| {
            out[0] = c[0] * (w * t).cos();
            out[1] = c[1];
        });
        let f2 = FnForcing::new(2, move |t: f64, out: &mut [f64]| {
            out[0] = c[2];
            out[1] = c[3] * (t / (1.0 + t * t));
        });
        let f3 = FnForcing::new(2, move |t: f64, out: &mut [f64]| {
            out[0] = alpha * c[0] * (w * t).cos() + beta * c[2];
            out[1] = alpha * c[1] + beta * c[3] * (t / (1.0 + t * t));
        });
        let tol = 1e-7;
        let g1 = solve_linear_bounded(k, &f1, tol).unwrap().full;
        let g2 = solve_linear_bounded(k, &f2, tol).unwrap().full;
        let g3 = solve_linear_bounded(k, &f3, tol).unwrap().full;
        let combo = g1.scaled(alpha).add_scaled(beta, &g2).unwrap();
        prop_assert!(combo.distance(&g3).unwrap() < 1e-10);
    }

    #[test]
    fn green_decay_bound(t in -20.0f64..20.0, tau in -20.0f64..20.0) {
        prop_assume!((t - tau).abs() > 1e-6);
        let k = rotated();
        let g = k.matrix(t, tau, None).unwrap();
        prop_assert!(op_norm(&g) <= k.constants().bound(t - tau) * (1.0 + 1e-6));
    }

    #[test]
    fn picard_limit_is_unique(c in -5.0f64..5.0, a in -5.0f64..5.0, w in 0.1f64..3.0) {
        let k = scalar();
        let f = FnForcing::new(1, |_t: f64, out: &mut [f64]| out[0] = 0.5);
        let spec = LipschitzSpec::parse(&["0.1*sin(x1)"], 0.1).unwrap();
        let base = picard_solve(k, &f, &spec, 1e-7, 200).unwrap();
        let full = &base.full;
        let init = GridFunction::from_fn(full.start(), full.step(), full.len(), 1, |t, out| out[0] = c + a * (w * t).sin());
        let opts = PicardOptions { tol: 1e-7, max_iter: 200, initial: Some(init) };
        let other = picard_solve_from(k, &f, &spec, &opts).unwrap();
        prop_assert!(other.solution.distance(&base.solution).unwrap() < 1e-6);
        prop_assert!(other.report.ratios.iter().all(|&r| r <= 0.2 + 1e-9 || r.is_nan()));
    }
}
