use fracosc::dde::{classify, solve};
use fracosc::expr::Var;
use fracosc::scenarios::{load, load_named, verify, ScenarioId, VerifyOptions};

#[test]
fn load_populates_constants() {
    let s1 = load(ScenarioId::Example1);
    assert_eq!(s1.spec.alpha.value(), 0.5);
    assert_eq!(s1.spec.k, 0.2579);
    let (c1, c2) = (2f64.ln().cos(), 2f64.ln().sin());
    assert!((s1.spec.l_prime - (c1 + c2)).abs() < 1e-15);
    assert!((s1.spec.m_prime - (c1 - c2)).abs() < 1e-15);
    assert_eq!(s1.rho.as_number(), Some(16.0 / 0.2579));

    let s2 = load(ScenarioId::Example2);
    for t in [0.3, 2.0, 11.0] {
        let got: Vec<f64> = s2.reference.iter().map(|e| e.eval_at(Var::T, t).unwrap()).collect();
        assert_eq!(got, vec![t.sin(), t.cos(), t.sin()]);
    }
    assert_eq!(s2.spec.k, 1.0);
    assert_eq!(s2.spec.l_prime, 1.0);
    assert_eq!(s2.spec.m_prime, 1.0);

    let s3 = load(ScenarioId::Example3Corrected);
    for t in [2.0f64, 5.0] {
        let p = s3.spec.p.eval_at(Var::T, t).unwrap();
        assert!((p - (2.0 * t - 1.0).exp() * t.sqrt()).abs() < 1e-12 * p);
        let rho = s3.rho.eval_at(Var::T, t).unwrap();
        assert!((rho - t.powf(-3.5) * (-2.0 * t).exp()).abs() < 1e-15 * rho.max(1e-300));
    }
}

#[test]
fn unknown_names_are_rejected() {
    assert!(load_named("example4").is_err());
    for id in ScenarioId::ALL {
        assert_eq!(load_named(id.name()).unwrap().id, id);
    }
}

#[test]
fn example1_residual_grid_is_restricted() {
    let sc = load(ScenarioId::Example1);
    let grid = sc.residual_grid();
    assert!(!grid.is_empty());
    assert!(grid.iter().all(|t| (t / 2.0).ln().cos() >= 0.1));
}

#[test]
fn corrected_exponential_scenario_verifies() {
    let rep = verify(&load(ScenarioId::Example3Corrected), &VerifyOptions::default());
    assert!(rep.passed(), "{}", rep.table());
}

#[test]
fn uncorrected_exponential_scenario_has_the_known_residual() {
    let rep = verify(&load(ScenarioId::Example3), &VerifyOptions::default());
    assert!(rep.check("residual u").unwrap().pass, "{}", rep.table());
    assert!(rep.check("Thm3.1").unwrap().pass);
    assert!(rep.check("A4").unwrap().pass);
}

#[test]
fn periodic_scenario_verifies() {
    let rep = verify(&load(ScenarioId::Example2), &VerifyOptions::default());
    assert!(rep.passed(), "{}", rep.table());
}

#[test]
fn example1_reports_criteria_and_residuals() {
    let rep = verify(&load(ScenarioId::Example1), &VerifyOptions::default());
    for name in ["residual u", "residual v", "residual w", "Thm3.1"] {
        assert!(rep.check(name).unwrap().pass, "{}", rep.table());
    }
}

#[test]
fn golden_verdicts_are_stable_under_dt_and_horizons() {
    for id in [ScenarioId::Example2, ScenarioId::Example3Corrected] {
        let sc = load(id);
        let mut verdicts = Vec::new();
        for dt in [1e-2, 5e-3] {
            let traj = solve(&sc.spec, &sc.history, sc.sim_window.1, dt).unwrap();
            verdicts.push(classify(&traj, sc.sim_window, sc.min_crossings).unwrap().verdict);
        }
        assert_eq!(verdicts[0], verdicts[1], "{id}");
        assert_eq!(verdicts[0], sc.expected.oscillation);
    }
    let sc = load(ScenarioId::Example3Corrected);
    for hs in [[1e2, 1e3, 1e4, 1e5], [1e3, 1e4, 1e5, 1e6]] {
        let opts = VerifyOptions {
            horizons: hs,
            ..VerifyOptions::default()
        };
        let rep = verify(&sc, &opts);
        assert!(rep.check("Thm3.1").unwrap().pass && rep.check("A4").unwrap().pass);
    }
}
