//! The three worked examples as ready-made systems with closed-form
//! solutions and expected verdicts.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::{check_a4, check_thm31, Verdict};
use crate::dde::{classify, residual_series, solve, History, SpecText, SystemSpec, SystemVerdict};
use crate::expr::{Expr, Var};
use crate::quad::ProbeOptions;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario '{0}' (expected example1, example2, example3 or example3-corrected)")]
    Unknown(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioId {
    Example1,
    Example2,
    Example3,
    Example3Corrected,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 4] = [
        ScenarioId::Example1,
        ScenarioId::Example2,
        ScenarioId::Example3,
        ScenarioId::Example3Corrected,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::Example1 => "example1",
            ScenarioId::Example2 => "example2",
            ScenarioId::Example3 => "example3",
            ScenarioId::Example3Corrected => "example3-corrected",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioId {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| ScenarioError::Unknown(s.to_string()))
    }
}

/// Residual grid points are kept only where `expr(t) >= min`.
#[derive(Clone, Debug, PartialEq)]
pub struct Restriction {
    pub expr: Expr,
    pub min: f64,
}

impl Restriction {
    pub fn admits(&self, t: f64) -> bool {
        self.expr.eval_at(Var::T, t).is_ok_and(|v| v >= self.min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expected {
    pub oscillation: SystemVerdict,
    pub thm31: Verdict,
    pub a4: Option<Verdict>,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub id: ScenarioId,
    pub spec: SystemSpec,
    pub history: History,
    pub reference: [Expr; 3],
    pub restriction: Option<Restriction>,
    pub residual_window: (f64, f64),
    pub residual_points: usize,
    pub residual_tol: f64,
    /// Known nonzero residual of an equation (absolute value, in `t`),
    /// checked to relative `1e-6` instead of `residual_tol`.
    pub known_residual: [Option<Expr>; 3],
    pub rho: Expr,
    pub sim_window: (f64, f64),
    pub min_crossings: usize,
    pub expected: Expected,
}

fn parse(text: &str) -> Expr {
    Expr::parse(text, &[Var::T]).expect("built-in expression")
}

fn spec_text(alpha: f64, pqr: [&str; 3], fgh: [&str; 3], delays: [&str; 2], t0: f64) -> SpecText {
    SpecText {
        alpha,
        p: pqr[0].into(),
        q: pqr[1].into(),
        r: pqr[2].into(),
        f: fgh[0].into(),
        g: fgh[1].into(),
        h: fgh[2].into(),
        sigma: delays[0].into(),
        tau: delays[1].into(),
        k: 1.0,
        l: 1.0,
        l_prime: 1.0,
        m_prime: 1.0,
        t0,
        anchor: None,
        f_clamp: None,
    }
}

/// Builds the scenario `id`.
pub fn load(id: ScenarioId) -> Scenario {
    match id {
        ScenarioId::Example1 => example1(),
        ScenarioId::Example2 => example2(),
        ScenarioId::Example3 => example3(false),
        ScenarioId::Example3Corrected => example3(true),
    }
}

/// [`load`] by name.
pub fn load_named(name: &str) -> Result<Scenario, ScenarioError> {
    Ok(load(name.parse()?))
}

fn example1() -> Scenario {
    let (c1, c2) = (2f64.ln().cos(), 2f64.ln().sin());
    let t0 = 10.0;
    let mut text = spec_text(
        0.5,
        ["t^(-1/2)"; 3],
        ["cos(ln(4))*sqrt(1-u^2) - sin(ln(4))*u", "v", "w"],
        ["t/2", "t/2"],
        t0,
    );
    text.k = 0.2579;
    text.l = 0.5;
    text.l_prime = c1 + c2;
    text.m_prime = c1 - c2;
    text.f_clamp = Some(1.0 - 1e-12);
    let spec = SystemSpec::from_text(&text).expect("example1 spec");
    let reference = [
        parse("sin(ln(t))"),
        parse("cos(ln(2))*cos(ln(t)) - sin(ln(2))*sin(ln(t))"),
        parse("cos(ln(2))*sin(ln(t)) + sin(ln(2))*cos(ln(t))"),
    ];
    let [u, v, w] = reference.clone();
    Scenario {
        id: ScenarioId::Example1,
        history: History::new(u, v, w, t0 / 2.0),
        rho: Expr::num(16.0 / spec.k),
        spec,
        reference,
        restriction: Some(Restriction {
            expr: parse("cos(ln(t/2))"),
            min: 0.1,
        }),
        // cos(ln(t/2)) >= 0.1 holds on [0.47, 8.6] and [246, 4.7e3].
        residual_window: (1.0, 5000.0),
        residual_points: 500,
        residual_tol: 1e-6,
        known_residual: [None, None, None],
        sim_window: (t0, t0 + 40.0 * PI),
        min_crossings: 10,
        expected: Expected {
            oscillation: SystemVerdict::Oscillatory,
            thm31: Verdict::Satisfied,
            a4: None,
        },
    }
}

fn example2() -> Scenario {
    let t0 = 10.0;
    let text = spec_text(
        1.0 / 3.0,
        ["t^(2/3)/(1+(3/4)*cos(t)^(5/3))", "t^(2/3)", "t^(2/3)/(1+cos(t)^2)"],
        ["u*(1+u^2)", "v*(1+(3/4)*v^(5/3))", "w"],
        ["t-2*pi", "t-3*pi/2"],
        t0,
    );
    let spec = SystemSpec::from_text(&text).expect("example2 spec");
    let reference = [parse("sin(t)"), parse("cos(t)"), parse("sin(t)")];
    let [u, v, w] = reference.clone();
    Scenario {
        id: ScenarioId::Example2,
        history: History::new(u, v, w, t0 - 2.0 * PI),
        rho: Expr::num(1.0),
        spec,
        reference,
        restriction: None,
        residual_window: (10.0, 150.0),
        residual_points: 500,
        residual_tol: 1e-8,
        known_residual: [None, None, None],
        sim_window: (t0, t0 + 40.0 * PI),
        min_crossings: 10,
        expected: Expected {
            oscillation: SystemVerdict::Oscillatory,
            thm31: Verdict::Satisfied,
            a4: None,
        },
    }
}

fn example3(corrected: bool) -> Scenario {
    let t0 = 2.0;
    let p = if corrected {
        "exp(2*t-1)*sqrt(t)"
    } else {
        "exp(2*t)*sqrt(t)"
    };
    let text = spec_text(
        0.5,
        [p, "exp(-2*t)*sqrt(t)", "sqrt(e*t)"],
        ["u", "v", "w"],
        ["t-1", "t-1/2"],
        t0,
    );
    let spec = SystemSpec::from_text(&text).expect("example3 spec");
    let reference = [parse("exp(t)"), parse("exp(-t)"), parse("exp(t)")];
    let [u, v, w] = reference.clone();
    let known = if corrected {
        None
    } else {
        Some(parse("(e-1)*sqrt(t)*exp(t)"))
    };
    Scenario {
        id: if corrected {
            ScenarioId::Example3Corrected
        } else {
            ScenarioId::Example3
        },
        history: History::new(u, v, w, t0 - 1.0),
        rho: parse("t^(-7/2)*exp(-2*t)"),
        spec,
        reference,
        restriction: None,
        residual_window: (2.0, 10.0),
        residual_points: 500,
        residual_tol: 1e-8,
        known_residual: [known, None, None],
        sim_window: (t0, t0 + 40.0 * PI),
        min_crossings: 10,
        expected: Expected {
            oscillation: SystemVerdict::Nonoscillatory,
            thm31: Verdict::NotSatisfied,
            a4: Some(Verdict::NotSatisfied),
        },
    }
}

impl Scenario {
    /// Residual grid: geometric when the window spans more than two
    /// decades, uniform otherwise, filtered by the restriction.
    pub fn residual_grid(&self) -> Vec<f64> {
        let (lo, hi) = self.residual_window;
        let n = self.residual_points.max(2);
        let grid: Vec<f64> = if hi / lo > 100.0 {
            crate::criteria::geometric_grid(lo, hi, n)
        } else {
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        };
        match &self.restriction {
            Some(r) => grid.into_iter().filter(|&t| r.admits(t)).collect(),
            None => grid,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub dt: f64,
    pub horizons: [f64; 4],
    pub probe: ProbeOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            dt: 1e-2,
            horizons: [1e2, 1e3, 1e4, 1e5],
            probe: ProbeOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub id: ScenarioId,
    pub checks: Vec<Check>,
    /// Informational lines that are not pass/fail.
    pub notes: Vec<String>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Plain-text pass/fail table.
    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut out = format!("scenario {}\n", self.id);
        for c in &self.checks {
            out.push_str(&format!(
                "  {} {:width$}  expected {}, observed {}\n",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.expected,
                c.observed,
            ));
        }
        for n in &self.notes {
            out.push_str(&format!("  note: {n}\n"));
        }
        out
    }
}

fn push(checks: &mut Vec<Check>, name: &str, expected: String, observed: String, pass: bool) {
    checks.push(Check {
        name: name.into(),
        expected,
        observed,
        pass,
    });
}

/// Runs residuals, simulation, classification and the (A4) / Theorem 3.1
/// checks, comparing each against the scenario's expectations.
pub fn verify(sc: &Scenario, opts: &VerifyOptions) -> ScenarioReport {
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    verify_residuals(sc, &mut checks);

    let (lo, hi) = sc.sim_window;
    match solve(&sc.spec, &sc.history, hi, opts.dt) {
        Ok(traj) => {
            if traj.clamp_activations() > 0 {
                notes.push(format!(
                    "f argument clamped {} times during simulation",
                    traj.clamp_activations()
                ));
            }
            if let Some(t) = traj.truncated() {
                notes.push(format!("simulation stopped early at t = {t}"));
            }
            match classify(&traj, (lo, hi), sc.min_crossings) {
                Ok(class) => {
                    let counts: Vec<usize> =
                        class.components.iter().map(|c| c.crossings.len()).collect();
                    push(
                        &mut checks,
                        "oscillation",
                        format!("{:?}", sc.expected.oscillation),
                        format!("{:?} (sign changes {counts:?})", class.verdict),
                        class.verdict == sc.expected.oscillation,
                    );
                }
                Err(e) => push(
                    &mut checks,
                    "oscillation",
                    format!("{:?}", sc.expected.oscillation),
                    format!("error: {e}"),
                    false,
                ),
            }
        }
        Err(e) => push(
            &mut checks,
            "oscillation",
            format!("{:?}", sc.expected.oscillation),
            format!("solver error: {e}"),
            false,
        ),
    }

    match check_a4(&sc.spec, &opts.horizons, &opts.probe) {
        Ok(rep) => match sc.expected.a4 {
            Some(want) => push(
                &mut checks,
                "A4",
                format!("{want:?}"),
                format!("{:?}", rep.verdict),
                rep.verdict == want,
            ),
            None => notes.push(format!("A4: {:?}", rep.verdict)),
        },
        Err(e) => push(&mut checks, "A4", "report".into(), format!("error: {e}"), false),
    }

    match check_thm31(&sc.spec, &sc.rho, &opts.horizons, &opts.probe) {
        Ok(rep) => push(
            &mut checks,
            "Thm3.1",
            format!("{:?}", sc.expected.thm31),
            format!("{:?}", rep.verdict),
            rep.verdict == sc.expected.thm31,
        ),
        Err(e) => push(
            &mut checks,
            "Thm3.1",
            format!("{:?}", sc.expected.thm31),
            format!("error: {e}"),
            false,
        ),
    }

    ScenarioReport {
        id: sc.id,
        checks,
        notes,
    }
}

fn verify_residuals(sc: &Scenario, checks: &mut Vec<Check>) {
    let grid = sc.residual_grid();
    let names = ["residual u", "residual v", "residual w"];
    if grid.is_empty() {
        for name in names {
            push(checks, name, "nonempty grid".into(), "restricted grid is empty".into(), false);
        }
        return;
    }
    let series = match residual_series(&sc.spec, &sc.reference, &grid) {
        Ok(s) => s,
        Err(e) => {
            for name in names {
                push(checks, name, "finite".into(), format!("error: {e}"), false);
            }
            return;
        }
    };
    for (i, name) in names.into_iter().enumerate() {
        match &sc.known_residual[i] {
            None => {
                let worst = series.iter().map(|r| r[i].abs()).fold(0.0, f64::max);
                push(
                    checks,
                    name,
                    format!("<= {:e}", sc.residual_tol),
                    format!("{worst:.3e} on {} points", grid.len()),
                    worst <= sc.residual_tol,
                );
            }
            Some(known) => {
                let mut worst = 0.0f64;
                for (r, &t) in series.iter().zip(&grid) {
                    let want = known.eval_at(Var::T, t).unwrap_or(f64::NAN);
                    worst = worst.max(((r[i].abs() - want) / want).abs());
                }
                push(
                    checks,
                    name,
                    format!("|residual| = {known} within rel 1e-6"),
                    format!("max rel deviation {worst:.3e}"),
                    worst <= 1e-6,
                );
            }
        }
    }
}
