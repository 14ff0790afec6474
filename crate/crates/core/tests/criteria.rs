use fracosc::criteria::{
    check_a4, check_lemma33, check_thm31, check_thm32, check_thm33, check_thm35, delta_refinement,
    riccati_from_samples, CriterionId, CriterionReport, KernelPreset, KernelSpec, NestedOutcome,
    NestedTail, RiccatiOptions, Thm35Variant, Verdict,
};
use fracosc::dde::{SpecText, SystemSpec};
use fracosc::expr::{Expr, Var};
use fracosc::quad::{integrate, ProbeOptions};
use fracosc::scenarios::{load, ScenarioId};

const HORIZONS: [f64; 4] = [1e2, 1e3, 1e4, 1e5];

fn opts() -> ProbeOptions {
    ProbeOptions::default()
}

fn simple(alpha: f64, p: &str, r: &str) -> SystemSpec {
    SystemSpec::from_text(&SpecText {
        alpha,
        p: p.into(),
        q: "1".into(),
        r: r.into(),
        f: "u".into(),
        g: "v".into(),
        h: "w".into(),
        sigma: "t".into(),
        tau: "t".into(),
        k: 1.0,
        l: 1.0,
        l_prime: 1.0,
        m_prime: 1.0,
        t0: 1.0,
        anchor: None,
        f_clamp: None,
    })
    .unwrap()
}

#[test]
fn theorem31_golden_verdicts() {
    for (id, want) in [
        (ScenarioId::Example1, Verdict::Satisfied),
        (ScenarioId::Example2, Verdict::Satisfied),
        (ScenarioId::Example3, Verdict::NotSatisfied),
        (ScenarioId::Example3Corrected, Verdict::NotSatisfied),
    ] {
        let sc = load(id);
        let rep = check_thm31(&sc.spec, &sc.rho, &HORIZONS, &opts()).unwrap();
        assert_eq!(rep.verdict, want, "{id}: {rep:?}");
    }
}

#[test]
fn a4_fails_for_the_exponential_example() {
    let sc = load(ScenarioId::Example3Corrected);
    let rep = check_a4(&sc.spec, &HORIZONS, &opts()).unwrap();
    assert_eq!(rep.verdict, Verdict::NotSatisfied);
    // ∫ s^(α-1)/b = ∫ e^(-2s) converges
    let first = &rep.conditions[0];
    assert_eq!(first.verdict, Verdict::NotSatisfied);
}

#[test]
fn vanishing_c_is_not_satisfied() {
    let s = simple(0.5, "1", "0");
    let rep = check_thm31(&s, &Expr::num(1.0), &HORIZONS, &opts()).unwrap();
    assert_eq!(rep.verdict, Verdict::NotSatisfied);
}

#[test]
fn verdict_ignores_constant_rho_scale_and_anchor_shift() {
    let sc = load(ScenarioId::Example1);
    let base = check_thm31(&sc.spec, &sc.rho, &HORIZONS, &opts()).unwrap().verdict;
    let scaled = check_thm31(&sc.spec, &(5.0 * sc.rho.clone()), &HORIZONS, &opts()).unwrap();
    assert_eq!(scaled.verdict, base);
    let mut shifted = sc.spec.clone();
    shifted.anchor = 2.0 * sc.spec.t0;
    let rep = check_thm31(&shifted, &sc.rho, &HORIZONS, &opts()).unwrap();
    assert_eq!(rep.verdict, base);
}

#[test]
fn rho_must_be_positive() {
    let sc = load(ScenarioId::Example1);
    let err = check_thm31(&sc.spec, &Expr::num(-1.0), &HORIZONS, &opts());
    assert!(err.is_err());
}

#[test]
fn kernel_class_checks() {
    let rho = Expr::num(1.0);
    assert!(KernelSpec::parse("1", &rho).unwrap().validate(10.0, 1e4).is_err());
    KernelSpec::preset(KernelPreset::Square, &rho).validate(10.0, 1e4).unwrap();
    // ρ below f64 range but positive
    let tiny = Expr::parse("t^(-7/2)*exp(-2*t)", &[Var::T]).unwrap();
    KernelSpec::preset(KernelPreset::Square, &tiny).validate(2.0, 2e3).unwrap();
}

#[test]
fn averaged_criteria_on_examples() {
    let sc = load(ScenarioId::Example1);
    let k = KernelSpec::preset(KernelPreset::Square, &sc.rho);
    let r2 = check_thm32(&sc.spec, &k, &[], &opts()).unwrap();
    assert_eq!(r2.verdict, Verdict::Satisfied, "{r2:?}");
    let r3 = check_thm33(&sc.spec, &k, &[], &opts()).unwrap();
    assert_eq!(r3.verdict, Verdict::Satisfied, "{r3:?}");

    let sc = load(ScenarioId::Example3Corrected);
    let k = KernelSpec::preset(KernelPreset::Square, &sc.rho);
    assert_eq!(check_thm32(&sc.spec, &k, &[], &opts()).unwrap().verdict, Verdict::NotSatisfied);
    assert_eq!(check_thm33(&sc.spec, &k, &[], &opts()).unwrap().verdict, Verdict::NotSatisfied);
}

#[test]
fn delta_refinement_recovers_a_bounded_integral() {
    // ∫_1^t (s - 1/(t-s+1)) ds without the 1/H singularity
    let t = 50.0;
    let pos = |s: f64| Ok(s);
    let neg = |s: f64| Ok(1.0 / (t - s + 1.0));
    let r = delta_refinement(&pos, &neg, 1.0, t).unwrap();
    let want = 0.5 * (t * t - 1.0) - t.ln();
    assert!(r.converged);
    assert!((r.limit - want).abs() < 1e-6 * want, "{} vs {want}", r.limit);
}

#[test]
fn delta_refinement_flags_a_log_singularity() {
    let t = 50.0;
    let pos = |_s: f64| Ok(0.0);
    let neg = |s: f64| Ok(1.0 / (t - s));
    let r = delta_refinement(&pos, &neg, 1.0, t).unwrap();
    assert!(!r.converged);
    assert!(!r.raw_cauchy);
}

#[test]
fn nested_tails_match_closed_form() {
    // s^(α-1) c = s^-3.5: J(μ) = μ^-2.5 / 2.5, M(η) = η^-1.5 / 3.75
    let s = simple(0.5, "1", "t^(-3)");
    let NestedOutcome::Ready(tails) = NestedTail::build(&s, 1.0, 1e4, &opts()).unwrap() else {
        panic!("middle integral should converge");
    };
    for eta in [1.0f64, 3.7, 120.0, 5e3, 3e4] {
        let want = eta.powf(-1.5) / 3.75;
        let got = tails.middle_at(eta);
        assert!(((got - want) / want).abs() < 1e-6, "M({eta}) = {got}, want {want}");
    }
    // brute-force nested quadrature at one point
    let eta = 2.0f64;
    let inner = |mu: f64| Ok(integrate(&|s: f64| Ok(s.powf(-3.5)), mu, 1e3 * mu, 1e-12).unwrap());
    let brute = integrate(&inner, eta, 1e3 * eta, 1e-10).unwrap();
    assert!(((tails.middle_at(eta) - brute) / brute).abs() < 1e-4);
}

#[test]
fn lemma33_verdicts() {
    let rep = check_lemma33(&simple(0.5, "1", "t^(-3)"), &HORIZONS, &opts()).unwrap();
    assert_eq!(rep.verdict, Verdict::NotSatisfied, "{rep:?}");
    // s^-2.1 inside: J ~ μ^-1.1, M ~ η^-0.1, outer η^-0.6 diverges
    let rep = check_lemma33(&simple(0.5, "1", "t^(-1.6)"), &HORIZONS, &opts()).unwrap();
    assert_eq!(rep.verdict, Verdict::Satisfied, "{rep:?}");
    assert_eq!(rep.conditions.len(), 2);
}

#[test]
fn theorem35_delay_variant() {
    let sc = load(ScenarioId::Example1);
    let rep = check_thm35(&sc.spec, None, &[], Thm35Variant::Delay, &opts()).unwrap();
    assert_eq!(rep.verdict, Verdict::Satisfied, "{rep:?}");
    assert!(check_thm35(&sc.spec, None, &[], Thm35Variant::State, &opts()).is_err());
}

#[test]
fn riccati_constants_on_synthetic_series() {
    let sc = load(ScenarioId::Example3Corrected);
    for c in [0.1, 0.5, 0.9] {
        let w: Vec<(f64, f64)> = (0..200).map(|i| 4.0 + 0.05 * i as f64).map(|t| (t, c / t)).collect();
        let r = riccati_from_samples(&sc.spec, &w, &RiccatiOptions::default()).unwrap();
        assert!((r.d_lower.value - c).abs() < 1e-6, "{:?}", r.d_lower);
        assert!((r.d_upper.value - c).abs() < 1e-6, "{:?}", r.d_upper);
        assert!(r.unit_bounds);
    }
}

#[test]
fn criterion_ids_parse() {
    for id in CriterionId::ALL {
        assert_eq!(id.name().parse::<CriterionId>().unwrap(), id);
    }
    assert_eq!("3.1".parse::<CriterionId>().unwrap(), CriterionId::Thm31);
    assert_eq!("lem3.3".parse::<CriterionId>().unwrap(), CriterionId::Lem33);
    assert!("3.9".parse::<CriterionId>().is_err());
}

#[test]
fn reports_round_trip_through_json() {
    let sc = load(ScenarioId::Example3Corrected);
    let mut reps = vec![
        check_a4(&sc.spec, &HORIZONS, &opts()).unwrap(),
        check_thm31(&sc.spec, &sc.rho, &HORIZONS, &opts()).unwrap(),
    ];
    let k = KernelSpec::preset(KernelPreset::Square, &sc.rho);
    reps.push(check_thm33(&sc.spec, &k, &[], &opts()).unwrap());
    let text = serde_json::to_string_pretty(&reps).unwrap();
    let back: Vec<CriterionReport> = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&back).unwrap(), text);
}
