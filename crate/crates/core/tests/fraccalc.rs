use fracosc::exec::Executor;
use fracosc::expr::{Expr, Var};
use fracosc::fraccalc::{
    check_properties, check_properties_with, default_eps_sequence, frac_deriv, frac_deriv_limit,
    frac_integral, Alpha, ExprFunction, FnScalar, FracError,
};
use proptest::prelude::*;

fn f(text: &str) -> ExprFunction {
    ExprFunction::of_t(Expr::parse(text, &[Var::T]).unwrap())
}

fn a(x: f64) -> Alpha {
    Alpha::new(x).unwrap()
}

fn close(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs().max(1e-300)
}

#[test]
fn alpha_range() {
    for bad in [0.0, -0.5, 1.5, f64::NAN] {
        assert!(Alpha::new(bad).is_err(), "{bad}");
    }
    assert!(Alpha::new(1.0).is_ok());
}

#[test]
fn derivative_examples() {
    assert!(close(frac_deriv(&f("t^2"), 4.0, a(0.5)).unwrap(), 16.0, 1e-14));
    assert_eq!(frac_deriv(&f("7"), 3.0, a(0.3)).unwrap(), 0.0);
    assert!(close(frac_deriv(&f("sin(ln(t))"), 1.0, a(0.5)).unwrap(), 1.0, 1e-14));
    // power rule with a negative exponent
    let got = frac_deriv(&f("t^(-2)"), 1.5, a(0.25)).unwrap();
    assert!(close(got, -2.0 * 1.5f64.powf(-2.25), 1e-13));
    assert!(matches!(
        frac_deriv(&f("t"), 0.0, a(0.5)),
        Err(FracError::NonPositiveTime(_))
    ));
}

#[test]
fn limit_definition_examples() {
    let t3 = f("t^3");
    let got = frac_deriv_limit(&t3, 1.0, a(0.5), &default_eps_sequence(1.0, a(0.5))).unwrap();
    assert!(close(got, 3.0, 1e-6), "{got}");
    let c = f("4.5");
    for t in [0.7, 3.0, 40.0] {
        let got = frac_deriv_limit(&c, t, a(0.5), &default_eps_sequence(t, a(0.5))).unwrap();
        assert_eq!(got, 0.0);
    }
    // cross-operator oracle: the rescaling identity for exp at t = 2
    let e = f("exp(t)");
    let al = a(1.0 / 3.0);
    let want = 2f64.powf(2.0 / 3.0) * 2f64.exp();
    let lim = frac_deriv_limit(&e, 2.0, al, &default_eps_sequence(2.0, al)).unwrap();
    assert!(close(lim, want, 1e-4), "{lim} vs {want}");
    assert!(close(frac_deriv(&e, 2.0, al).unwrap(), want, 1e-12));

    assert!(matches!(
        frac_deriv_limit(&e, 2.0, al, &[1e-3, 2e-3]),
        Err(FracError::EpsSequence)
    ));
}

#[test]
fn integral_examples() {
    let al = a(0.5);
    // f = x^(1-α) makes the integrand identically one
    let got = frac_integral(&f("t^(1/2)"), 1.0, 5.0, al).unwrap();
    assert!(close(got, 4.0, 1e-10));
    // ∫_0^9 x^(-1/2) dx = 2√9, endpoint singularity included
    let got = frac_integral(&f("1"), 0.0, 9.0, al).unwrap();
    assert!(close(got, 6.0, 1e-8), "{got}");
    assert!(frac_integral(&f("1"), 2.0, 1.0, al).is_err());
}

#[test]
fn derivative_inverts_integral() {
    let al = a(0.7);
    let cos = f("cos(t)");
    let anti = FnScalar(|t: f64| {
        frac_integral(&cos, 1.0, t, al).map_err(|e| match e {
            FracError::Eval(e) => e,
            other => panic!("{other}"),
        })
    });
    let got = frac_deriv(&anti, 3.0, al).unwrap();
    assert!(close(got, 3f64.cos(), 1e-6), "{got} vs {}", 3f64.cos());
}

#[test]
fn product_rule_example() {
    let al = a(0.5);
    let (ff, g) = (f("t^2"), f("sin(t)"));
    let fg = f("t^2*sin(t)");
    let t = 2.0;
    let lhs = frac_deriv(&fg, t, al).unwrap();
    let rhs = t * t * frac_deriv(&g, t, al).unwrap() + t.sin() * frac_deriv(&ff, t, al).unwrap();
    assert!(close(lhs, rhs, 1e-6));
    // independent closed form: t^(1/2)(2t sin t + t² cos t)
    let exact = t.sqrt() * (2.0 * t * t.sin() + t * t * t.cos());
    assert!(close(lhs, exact, 1e-13));
}

#[test]
fn composition_rule_against_composed_expression() {
    // D^α (f∘g)(t) = f'(g(t)) D^α g(t), with f = sin, g = t^2 + 1
    let al = a(0.4);
    let composed = f("sin(t^2+1)");
    let g = f("t^2+1");
    for t in [0.5, 1.3, 7.0, 33.0] {
        let lhs = frac_deriv(&composed, t, al).unwrap();
        let rhs = (t * t + 1.0).cos() * frac_deriv(&g, t, al).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0), "t = {t}");
    }
}

#[test]
fn property_suite_holds_for_each_alpha() {
    let samples: Vec<f64> = (0..50).map(|i| 0.5 * 100f64.powf(i as f64 / 49.0)).collect();
    for al in [0.25, 0.5, 0.9, 1.0] {
        let report = check_properties(a(al), &samples);
        for p in &report.properties {
            assert!(p.holds(1e-6), "α = {al}: {p:?}");
        }
        if al == 1.0 {
            let classical = report
                .properties
                .iter()
                .find(|p| p.name.contains("classical"))
                .expect("classical property");
            assert!(classical.max_rel_error <= 1e-8, "{classical:?}");
        }
    }
}

#[test]
fn property_suite_is_seeded_and_executor_independent() {
    let samples = [0.5, 2.0, 9.0, 50.0];
    let seq = check_properties_with(a(0.5), &samples, 7, Executor::Sequential);
    let par = check_properties_with(a(0.5), &samples, 7, Executor::Parallel);
    assert_eq!(seq, par);
    let other = check_properties_with(a(0.5), &samples, 8, Executor::Sequential);
    assert_eq!(other.seed, 8);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn classical_derivative_at_alpha_one(t in 0.5f64..50.0, c in -3.0f64..3.0) {
        let e = Expr::parse(&format!("sin({c}*t) + t^3"), &[Var::T]).unwrap();
        let got = frac_deriv(&ExprFunction::of_t(e), t, a(1.0)).unwrap();
        let want = c * (c * t).cos() + 3.0 * t * t;
        prop_assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0));
    }

    #[test]
    fn linearity(t in 0.5f64..50.0, al in 0.05f64..1.0, x in -5.0f64..5.0, y in -5.0f64..5.0) {
        let (ff, g) = (f("ln(t)*t"), f("cos(t)"));
        let sum = ExprFunction::of_t(Expr::parse(&format!("({x})*ln(t)*t + ({y})*cos(t)"), &[Var::T]).unwrap());
        let lhs = frac_deriv(&sum, t, a(al)).unwrap();
        let rhs = x * frac_deriv(&ff, t, a(al)).unwrap() + y * frac_deriv(&g, t, a(al)).unwrap();
        let scale = (x * frac_deriv(&ff, t, a(al)).unwrap()).abs() + (y * frac_deriv(&g, t, a(al)).unwrap()).abs();
        prop_assert!((lhs - rhs).abs() <= 1e-8 * scale.max(1e-12));
    }

    #[test]
    fn limit_agrees_with_rescaling(t in 0.5f64..50.0, al in 0.1f64..1.0, k in 0usize..4) {
        let text = ["t^2", "ln(t)", "sin(t)", "exp(t/10)"][k];
        let func = f(text);
        let exact = frac_deriv(&func, t, a(al)).unwrap();
        let lim = frac_deriv_limit(&func, t, a(al), &default_eps_sequence(t, a(al))).unwrap();
        prop_assert!((lim - exact).abs() <= 1e-4 * exact.abs().max(1e-3), "{text} at {t}: {lim} vs {exact}");
    }
}
