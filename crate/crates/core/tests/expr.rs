use fracosc::expr::{Bindings, Expr, ExprError, Func, Var};
use proptest::prelude::*;

fn at(e: &Expr, t: f64) -> f64 {
    e.eval_at(Var::T, t).unwrap()
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (-3.0f64..3.0).prop_map(Expr::num),
        Just(Expr::var(Var::T)),
        (1u32..4).prop_map(|n| Expr::var(Var::T).powf(n as f64)),
    ]
}

/// Polynomial / trig / exp trees in `t`. Exponentials are fed through a
/// sine so they stay bounded on the test interval.
fn tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            inner.clone().prop_map(|a| Expr::call(Func::Sin, a)),
            inner.clone().prop_map(|a| Expr::call(Func::Cos, a)),
            inner
                .clone()
                .prop_map(|a| Expr::call(Func::Exp, Expr::call(Func::Sin, a))),
            inner.prop_map(|a| -a),
        ]
    })
}

/// Fourth-order central difference with step `rel * t`.
fn fd(e: &Expr, t: f64, rel: f64) -> f64 {
    let h = rel * t;
    (at(e, t - 2.0 * h) - 8.0 * at(e, t - h) + 8.0 * at(e, t + h) - at(e, t + 2.0 * h))
        / (12.0 * h)
}

#[test]
fn coefficient_expressions() {
    let p = Expr::parse("1/sqrt(t)", &[Var::T]).unwrap();
    for t in [0.5, 1.0, 4.0, 1e4] {
        assert!((at(&p, t) - t.powf(-0.5)).abs() <= 1e-15 * t.powf(-0.5));
    }
    assert!(Expr::parse("0", &[Var::T]).unwrap().is_zero());

    let r = Expr::parse("t^(2/3)/(1+cos(t)^2)", &[Var::T]).unwrap();
    assert_eq!(at(&r, 0.0), 0.0);
    let e = Expr::parse("exp(2*t)*sqrt(t)", &[Var::T]).unwrap();
    assert!((at(&e, 1.0) - 7.38905609893065).abs() < 1e-12);
    assert_eq!(at(&Expr::parse("sin(ln(t))", &[Var::T]).unwrap(), 1.0), 0.0);
}

#[test]
fn cbrt_form_matches_real_power_on_grid() {
    let g = Expr::parse("v*(1+(3/4)*cbrt(v)^5)", &[Var::V]).unwrap();
    for i in 0..100 {
        let v = -2.0 + 4.0 * i as f64 / 99.0;
        // independent real power: sign(v) |v|^(5/3)
        let direct = v * (1.0 + 0.75 * v.signum() * v.abs().powf(5.0 / 3.0));
        let got = g.eval_at(Var::V, v).unwrap();
        assert!((got - direct).abs() <= 1e-13 * (1.0 + direct.abs()), "v = {v}");
    }
    let at_m08 = g.eval_at(Var::V, -0.8).unwrap();
    assert!((at_m08 - (-0.8 * (1.0 - 0.75 * 0.8f64.powf(5.0 / 3.0)))).abs() < 1e-14);
}

#[test]
fn derivative_examples() {
    let d = Expr::parse("t^2", &[Var::T]).unwrap().diff(Var::T);
    for t in [0.5, 1.0, 3.0, 17.0] {
        assert!((at(&d, t) - 2.0 * t).abs() < 1e-12);
    }
    let rho = Expr::parse("16/0.2579", &[Var::T]).unwrap().diff(Var::T);
    assert_eq!(at(&rho, 3.0), 0.0);

    let e = Expr::parse("1/(t^(7/2)*exp(2*t))", &[Var::T]).unwrap();
    let h = 1e-6;
    let fd = (at(&e, 2.0 + h) - at(&e, 2.0 - h)) / (2.0 * h);
    let sym = at(&e.diff(Var::T), 2.0);
    assert!((sym - fd).abs() <= 1e-6 * fd.abs(), "{sym} vs {fd}");
    // closed form: -(7/2 t^-1 + 2) e(t)
    let exact = -(3.5 / 2.0 + 2.0) * at(&e, 2.0);
    assert!((sym - exact).abs() <= 1e-13 * exact.abs());
}

#[test]
fn slot_variables_are_enforced() {
    for (text, name) in [("u", "u"), ("t + v", "v"), ("sin(w*t)", "w")] {
        match Expr::parse(text, &[Var::T]) {
            Err(ExprError::UnknownIdentifier { name: got, .. }) => assert_eq!(got, name),
            other => panic!("{text}: {other:?}"),
        }
    }
    assert!(Expr::parse("sqrt(1-u^2)", &[Var::U]).is_ok());
    assert!(Expr::parse("foo(t)", &[Var::T]).is_err());
}

#[test]
fn negative_base_with_irrational_exponent_is_a_domain_error() {
    let e = Expr::parse("t^0.7", &[Var::T]).unwrap();
    assert!(matches!(e.eval_at(Var::T, -1.0), Err(ExprError::Domain { .. })));
    let e = Expr::parse("t^(1/2)", &[Var::T]).unwrap();
    assert!(matches!(e.eval_at(Var::T, -1.0), Err(ExprError::Domain { .. })));
    let e = Expr::parse("ln(t)", &[Var::T]).unwrap();
    assert!(e.eval_at(Var::T, 0.0).is_err());
}

#[test]
fn unbound_variable() {
    let e = Expr::parse("u*t", &[Var::T, Var::U]).unwrap();
    assert_eq!(e.eval(&Bindings::new().with(Var::T, 1.0)), Err(ExprError::Unbound(Var::U)));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn symbolic_derivative_matches_finite_differences(e in tree(), t in 0.5f64..20.0) {
        let f0 = at(&e, t);
        let sym = at(&e.diff(Var::T), t);
        prop_assume!(f0.is_finite() && sym.is_finite() && f0.abs() < 1e8);
        let scale = sym.abs().max(f0.abs()).max(1.0);
        // skip trees that oscillate too fast for the stencil to resolve
        let d2 = e.diff(Var::T).diff(Var::T).eval_at(Var::T, t).unwrap_or(f64::INFINITY);
        prop_assume!(d2.abs() * 1e-3 * t < 1e-1 * scale);
        let coarse = fd(&e, t, 1e-3);
        let fine = fd(&e, t, 5e-4);
        prop_assume!((coarse - fine).abs() < 1e-5 * scale);
        prop_assert!((sym - fine).abs() <= 1e-5 * scale, "{e}: {sym} vs {fine}");
    }

    #[test]
    fn render_parse_round_trip(e in tree(), t in 0.5f64..20.0) {
        let back = Expr::parse_any(&e.to_string()).unwrap();
        let (a, b) = (e.eval_at(Var::T, t), back.eval_at(Var::T, t));
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()),
                "{e} -> {back}: {a} vs {b}"),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn evaluation_is_deterministic(e in tree(), t in 0.5f64..20.0) {
        let a = e.eval_at(Var::T, t).map(f64::to_bits);
        let b = e.clone().eval_at(Var::T, t).map(f64::to_bits);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn real_root_power_rule(x in -50.0f64..50.0, k in -6i64..7, q in 0u64..4) {
        let q = 2 * q + 1;
        let e = Expr::var(Var::U).ratpow(k, q);
        prop_assume!(x != 0.0 || k >= 0);
        let got = e.eval_at(Var::U, x).unwrap();
        let sign = if k % 2 == 0 { 1.0 } else { x.signum() };
        let want = sign * x.abs().powf(k as f64 / q as f64);
        prop_assert!((got - want).abs() <= 1e-13 * want.abs().max(1e-300), "{x}^({k}/{q}): {got} vs {want}");

        let parsed = Expr::parse(&format!("u^({k}/{q})"), &[Var::U]).unwrap();
        let via_text = parsed.eval_at(Var::U, x).unwrap();
        prop_assert!((via_text - want).abs() <= 1e-13 * want.abs().max(1e-300));
    }
}
