use fracosc::dde::{
    classify, classify_case, residual, solve, third_order_form, CaseClass, ClosedForm,
    ComponentVerdict, History, SpecText, SystemSpec, SystemVerdict,
};
use fracosc::expr::{Expr, Var};
use proptest::prelude::*;
use std::f64::consts::PI;

fn spec(
    alpha: f64,
    pqr: [&str; 3],
    fgh: [&str; 3],
    sigma: &str,
    tau: &str,
    t0: f64,
) -> SystemSpec {
    SystemSpec::from_text(&SpecText {
        alpha,
        p: pqr[0].into(),
        q: pqr[1].into(),
        r: pqr[2].into(),
        f: fgh[0].into(),
        g: fgh[1].into(),
        h: fgh[2].into(),
        sigma: sigma.into(),
        tau: tau.into(),
        k: 1.0,
        l: 1.0,
        l_prime: 1.0,
        m_prime: 1.0,
        t0,
        anchor: None,
        f_clamp: None,
    })
    .unwrap()
}

fn periodic() -> (SystemSpec, History) {
    let s = spec(
        1.0 / 3.0,
        ["t^(2/3)/(1+(3/4)*cbrt(cos(t))^5)", "t^(2/3)", "t^(2/3)/(1+cos(t)^2)"],
        ["u*(1+u^2)", "v*(1+(3/4)*cbrt(v)^5)", "w"],
        "t-2*pi",
        "t-3*pi/2",
        10.0,
    );
    let h = History::parse("sin(t)", "cos(t)", "sin(t)", 10.0 - 2.0 * PI).unwrap();
    (s, h)
}

fn exponential(p: &str) -> (SystemSpec, History) {
    let s = spec(
        0.5,
        [p, "exp(-2*t)*sqrt(t)", "sqrt(e*t)"],
        ["u", "v", "w"],
        "t-1",
        "t-1/2",
        2.0,
    );
    let h = History::parse("exp(t)", "exp(-t)", "exp(t)", 1.0).unwrap();
    (s, h)
}

fn max_error(traj: &fracosc::dde::Trajectory, t: f64) -> f64 {
    let y = traj.eval(t).unwrap();
    let want = [t.sin(), t.cos(), t.sin()];
    (0..3).map(|c| (y[c] - want[c]).abs()).fold(0.0, f64::max)
}

#[test]
fn periodic_solution_is_tracked_to_fourth_order() {
    let (s, h) = periodic();
    let coarse = solve(&s, &h, 60.0, 1e-2).unwrap();
    let fine = solve(&s, &h, 60.0, 5e-3).unwrap();
    let e1 = max_error(&coarse, 60.0);
    let e2 = max_error(&fine, 60.0);
    assert!(e1 < 1e-4, "{e1}");
    let order = (e1 / e2).log2();
    assert!((3.5..=4.5).contains(&order), "observed order {order}");
}

#[test]
fn zero_length_run_returns_history_endpoint() {
    let (s, h) = periodic();
    let traj = solve(&s, &h, 10.0, 1e-2).unwrap();
    assert_eq!(traj.times(), &[10.0]);
    assert_eq!(traj.eval(10.0).unwrap(), h.eval(10.0).unwrap());
}

#[test]
fn history_consistency_and_determinism() {
    let (s, h) = periodic();
    let a = solve(&s, &h, 20.0, 1e-2).unwrap();
    let b = solve(&s, &h, 20.0, 1e-2).unwrap();
    assert_eq!(a.states(), b.states());
    assert_eq!(a.states()[0], h.eval(10.0).unwrap());
    assert_eq!(a.eval(8.0).unwrap(), h.eval(8.0).unwrap());
    assert!(a.eval(3.0).is_err());
    // continuity of the dense output at nodes
    for i in 1..a.times().len() - 1 {
        let t = a.times()[i];
        let left = a.eval(t - 1e-13).unwrap();
        let at = a.states()[i];
        for c in 0..3 {
            assert!((left[c] - at[c]).abs() < 1e-12);
        }
    }
}

#[test]
fn corrected_exponential_system_matches_closed_form() {
    let (s, h) = exponential("exp(2*t-1)*sqrt(t)");
    let traj = solve(&s, &h, 7.0, 1e-3).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..=50 {
        let t = 2.0 + 5.0 * i as f64 / 50.0;
        let y = traj.eval(t).unwrap();
        let want = [t.exp(), (-t).exp(), t.exp()];
        for c in 0..3 {
            worst = worst.max((y[c] - want[c]).abs() / want[c]);
        }
    }
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn residuals_of_closed_forms() {
    let (s, _) = periodic();
    let cand = [
        Expr::parse("sin(t)", &[Var::T]).unwrap(),
        Expr::parse("cos(t)", &[Var::T]).unwrap(),
        Expr::parse("sin(t)", &[Var::T]).unwrap(),
    ];
    let grid: Vec<f64> = (0..400).map(|i| 10.0 + 140.0 * i as f64 / 399.0).collect();
    let r = residual(&s, &cand, &grid).unwrap();
    assert!(r.iter().all(|x| *x <= 1e-8), "{r:?}");

    let (s, _) = exponential("exp(2*t)*sqrt(t)");
    let cand = [
        Expr::parse("exp(t)", &[Var::T]).unwrap(),
        Expr::parse("exp(-t)", &[Var::T]).unwrap(),
        Expr::parse("exp(t)", &[Var::T]).unwrap(),
    ];
    let series = fracosc::dde::residual_series(&s, &cand, &[1.5, 3.0, 6.0]).unwrap();
    for (t, r) in [1.5f64, 3.0, 6.0].iter().zip(&series) {
        let want = (std::f64::consts::E - 1.0) * t.sqrt() * t.exp();
        // sign: D^α u - p g = sqrt(t) e^t - sqrt(t) e^(t+1)
        assert!((r[0] + want).abs() <= 1e-6 * want, "{} vs {want}", r[0]);
        assert!(r[1].abs() <= 1e-8 * t.exp() && r[2].abs() <= 1e-8 * t.exp());
    }

    let zero = [Expr::num(0.0), Expr::num(0.0), Expr::num(0.0)];
    assert_eq!(residual(&s, &zero, &[2.0, 3.0]).unwrap(), [0.0; 3]);
}

#[test]
fn oscillation_of_simulated_trajectories() {
    let (s, h) = periodic();
    let traj = solve(&s, &h, 10.0 + 40.0 * PI, 1e-2).unwrap();
    let class = classify(&traj, (10.0, 10.0 + 40.0 * PI), 10).unwrap();
    assert_eq!(class.verdict, SystemVerdict::Oscillatory);
    for c in &class.components {
        assert!(c.crossings.len() >= 10);
    }
    let (s, h) = exponential("exp(2*t-1)*sqrt(t)");
    let traj = solve(&s, &h, 12.0, 1e-3).unwrap();
    let class = classify(&traj, (2.0, 12.0), 10).unwrap();
    assert_eq!(class.verdict, SystemVerdict::Nonoscillatory);
    for c in &class.components {
        assert!(c.crossings.is_empty());
        assert_eq!(c.verdict, ComponentVerdict::NonoscillatoryPositive);
    }
}

#[test]
fn crossings_are_located_precisely() {
    let cf = ClosedForm::new(
        [
            Expr::parse("sin(t)", &[Var::T]).unwrap(),
            Expr::parse("cos(t)", &[Var::T]).unwrap(),
            Expr::num(2.0),
        ],
        1.0,
        30.0,
    );
    let class = classify(&cf, (1.0, 30.0), 3).unwrap();
    let zs = &class.components[0].crossings;
    assert_eq!(zs.len(), 9);
    for (i, z) in zs.iter().enumerate() {
        assert!((z - (i + 1) as f64 * PI).abs() < 1e-9);
    }
    assert_eq!(class.components[2].verdict, ComponentVerdict::NonoscillatoryPositive);
    assert_eq!(class.verdict, SystemVerdict::Nonoscillatory);
}

#[test]
fn case_classification() {
    // the exponential system has a D u = e^(1-t), which decreases: not Case I
    let (s, h) = exponential("exp(2*t-1)*sqrt(t)");
    let traj = solve(&s, &h, 8.0, 1e-3).unwrap();
    assert_eq!(
        classify_case(&traj, &s, (3.0, 8.0)).unwrap(),
        CaseClass::Mixed { first_violation: 3.0 }
    );
    let grow = spec(0.5, ["1", "1", "1"], ["u", "v", "w"], "t", "t", 1.0);
    let cf = ClosedForm::new(
        [Expr::parse("exp(t)", &[Var::T]).unwrap(), Expr::num(1.0), Expr::num(1.0)],
        1.0,
        20.0,
    );
    assert_eq!(classify_case(&cf, &grow, (1.0, 20.0)).unwrap(), CaseClass::CaseI);

    // u = 1/t, a = 1: D u = -t^(-1-α) < 0 and D(a D u) = (1+α) t^(-1-2α) > 0
    let decay = spec(0.5, ["1", "1", "1"], ["u", "v", "w"], "t", "t", 1.0);
    let cf = ClosedForm::new(
        [Expr::parse("1/t", &[Var::T]).unwrap(), Expr::num(1.0), Expr::num(1.0)],
        1.0,
        50.0,
    );
    assert_eq!(classify_case(&cf, &decay, (1.0, 50.0)).unwrap(), CaseClass::CaseII);

    let cf = ClosedForm::new(
        [Expr::parse("sin(t)", &[Var::T]).unwrap(), Expr::num(1.0), Expr::num(1.0)],
        1.0,
        50.0,
    );
    assert!(classify_case(&cf, &decay, (1.0, 50.0)).is_err());

    let cf = ClosedForm::new(
        [Expr::parse("2+sin(t)", &[Var::T]).unwrap(), Expr::num(1.0), Expr::num(1.0)],
        1.0,
        50.0,
    );
    assert!(matches!(
        classify_case(&cf, &decay, (1.0, 50.0)).unwrap(),
        CaseClass::Mixed { .. }
    ));
}

#[test]
fn third_order_form_vanishes_without_forcing() {
    // r = 0 so c = 0; u = t^2 with α = 1 and p = q = 1 gives a u' = 2t, b (a u')' = 2, derivative 0
    let s = spec(1.0, ["1", "1", "1"], ["u", "v", "w"], "t", "t", 1.0);
    let mut s0 = s.clone();
    s0.r = Expr::num(0.0);
    let cf = ClosedForm::new(
        [Expr::parse("t^2", &[Var::T]).unwrap(), Expr::num(0.0), Expr::num(0.0)],
        1.0,
        10.0,
    );
    let vals = third_order_form(&cf, &s0, &[2.0, 5.0, 9.0]).unwrap();
    assert!(vals.iter().all(|v| v.abs() < 1e-9), "{vals:?}");
}

#[test]
fn third_order_form_along_exponential_solution() {
    let (s, h) = exponential("exp(2*t-1)*sqrt(t)");
    let traj = solve(&s, &h, 8.0, 1e-3).unwrap();
    let grid: Vec<f64> = (0..40).map(|i| 3.0 + 4.5 * i as f64 / 39.0).collect();
    let vals = third_order_form(&traj, &s, &grid).unwrap();
    // relative to the size of the forcing term c f(u)
    for (t, v) in grid.iter().zip(&vals) {
        let scale = (std::f64::consts::E * t).sqrt() * (t - 1.5).exp();
        assert!(*v <= 1e-4 * scale, "t = {t}: {v}");
    }
}

#[test]
fn classification_ignores_positive_scaling() {
    let base = [
        Expr::parse("sin(t)*exp(-t/50)", &[Var::T]).unwrap(),
        Expr::parse("cos(3*t)", &[Var::T]).unwrap(),
        Expr::parse("1+t", &[Var::T]).unwrap(),
    ];
    let a = classify(&ClosedForm::new(base.clone(), 0.5, 40.0), (0.5, 40.0), 5).unwrap();
    for k in [1e-6, 3.0, 1e8] {
        let scaled = base.clone().map(|e| k * e);
        let b = classify(&ClosedForm::new(scaled, 0.5, 40.0), (0.5, 40.0), 5).unwrap();
        assert_eq!(a.verdict, b.verdict);
        for c in 0..3 {
            assert_eq!(a.components[c].verdict, b.components[c].verdict);
            assert_eq!(a.components[c].crossings.len(), b.components[c].crossings.len());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // linear systems without delay: positive solutions keep the sign pattern of the corresponding case
    #[test]
    fn positive_solutions_respect_third_order_inequality(
        alpha in 0.3f64..1.0,
        pc in 0.5f64..2.0,
        qc in 0.5f64..2.0,
        rc in 0.1f64..1.0,
    ) {
        let s = spec(
            alpha,
            [&format!("{pc}"), &format!("{qc}"), &format!("{rc}")],
            ["u", "v", "w"],
            "t",
            "t",
            1.0,
        );
        let h = History::parse("1", "-1", "1", 1.0).unwrap();
        let traj = solve(&s, &h, 4.0, 1e-3).unwrap();
        let grid: Vec<f64> = (0..20).map(|i| 1.2 + 2.6 * i as f64 / 19.0).collect();
        let vals = third_order_form(&traj, &s, &grid).unwrap();
        for v in vals {
            prop_assert!(v.abs() <= 1e-4, "{}", v);
        }
    }
}
