//! Numerical evaluation of the oscillation criteria for the delay system.
//!
//! Every "`= ∞`" condition is decided by [`probe_improper_with`]; limsup and
//! liminf conditions by [`tail_constant_from_samples`]. Each check returns
//! a [`CriterionReport`] carrying the sub-condition verdicts and the partial
//! values behind them.

mod kernel;
mod lemma;
mod riccati;
mod theorems;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dde::{DdeError, StateFn, SystemSpec};
use crate::expr::{Bindings, Expr, ExprError, Var};
use crate::quad::{
    probe_improper_with, tail_constant_from_samples, DivergenceVerdict, ProbeOptions,
    TailConstant,
};

pub use kernel::{KernelPreset, KernelSpec};
pub use lemma::{check_lemma33, NestedOutcome, NestedTail};
pub use riccati::{check_thm34, riccati_diagnostics, riccati_from_samples, RiccatiOptions, RiccatiSeries};
pub use theorems::{
    check_a4, check_thm31, check_thm32, check_thm33, check_thm35, delta_refinement,
    DeltaRefinement, Thm35Variant, DELTA_FRACTIONS, DELTA_TOL,
};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum CriteriaError {
    #[error(transparent)]
    Spec(#[from] DdeError),
    #[error("invalid kernel: {0}")]
    Kernel(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("evaluation failed: {0}")]
    Eval(#[from] ExprError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CriterionId {
    A4,
    #[serde(rename = "Thm3.1")]
    Thm31,
    #[serde(rename = "Thm3.2")]
    Thm32,
    #[serde(rename = "Thm3.3")]
    Thm33,
    #[serde(rename = "Thm3.4")]
    Thm34,
    #[serde(rename = "Lem3.3")]
    Lem33,
    #[serde(rename = "Thm3.5")]
    Thm35,
}

impl CriterionId {
    pub const ALL: [CriterionId; 7] = [
        CriterionId::A4,
        CriterionId::Thm31,
        CriterionId::Thm32,
        CriterionId::Thm33,
        CriterionId::Thm34,
        CriterionId::Lem33,
        CriterionId::Thm35,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CriterionId::A4 => "A4",
            CriterionId::Thm31 => "Thm3.1",
            CriterionId::Thm32 => "Thm3.2",
            CriterionId::Thm33 => "Thm3.3",
            CriterionId::Thm34 => "Thm3.4",
            CriterionId::Lem33 => "Lem3.3",
            CriterionId::Thm35 => "Thm3.5",
        }
    }

    /// Conclusion stated when the criterion is satisfied.
    pub fn conclusion(self) -> &'static str {
        match self {
            CriterionId::A4 => "assumption (A4) holds",
            CriterionId::Thm31 | CriterionId::Thm32 | CriterionId::Thm33 => {
                "every solution of the system is oscillatory"
            }
            CriterionId::Thm34 => "the Case I inequalities hold along the trajectory",
            CriterionId::Lem33 => "Case II solutions satisfy lim u(t) = 0",
            CriterionId::Thm35 => "u(t) is oscillatory or lim u(t) = 0",
        }
    }
}

impl fmt::Display for CriterionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CriterionId {
    type Err = String;

    /// Accepts `A4`, `3.1`, `thm3.1`, `Thm3.1`, `lem3.3`, `L3.3`.
    fn from_str(s: &str) -> Result<Self, String> {
        let k = s.trim().to_ascii_lowercase();
        Ok(match k.as_str() {
            "a4" => CriterionId::A4,
            "3.1" | "thm3.1" => CriterionId::Thm31,
            "3.2" | "thm3.2" => CriterionId::Thm32,
            "3.3" | "thm3.3" => CriterionId::Thm33,
            "3.4" | "thm3.4" => CriterionId::Thm34,
            "lem3.3" | "l3.3" | "lemma3.3" => CriterionId::Lem33,
            "3.5" | "thm3.5" => CriterionId::Thm35,
            _ => {
                return Err(format!(
                    "unknown criterion `{s}` (expected one of A4, 3.1, 3.2, 3.3, 3.4, lem3.3, 3.5)"
                ))
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Satisfied,
    NotSatisfied,
    Inconclusive,
}

impl Verdict {
    /// Satisfied only if every part is; any inconclusive part wins first.
    pub fn all(parts: impl IntoIterator<Item = Verdict>) -> Verdict {
        let mut out = Verdict::Satisfied;
        for v in parts {
            match v {
                Verdict::Inconclusive => return Verdict::Inconclusive,
                Verdict::NotSatisfied => out = Verdict::NotSatisfied,
                Verdict::Satisfied => {}
            }
        }
        out
    }

    pub fn from_bool(holds: bool) -> Verdict {
        if holds {
            Verdict::Satisfied
        } else {
            Verdict::NotSatisfied
        }
    }

    /// "`= ∞`" reading of a divergence probe.
    pub fn from_probe(v: &DivergenceVerdict) -> Verdict {
        use crate::quad::Classification::*;
        match v.classification {
            Diverges if !v.negative => Verdict::Satisfied,
            Diverges | Converges => Verdict::NotSatisfied,
            Inconclusive => Verdict::Inconclusive,
        }
    }

    /// "`limsup = ∞`" reading of a tail constant.
    pub fn from_unbounded_limsup(tc: &TailConstant) -> Verdict {
        if tc.unbounded {
            Verdict::from_bool(tc.value == f64::INFINITY)
        } else if tc.low_confidence {
            Verdict::Inconclusive
        } else {
            Verdict::NotSatisfied
        }
    }
}

/// One sub-condition of a criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub verdict: Verdict,
    pub probe: Option<DivergenceVerdict>,
    pub tail: Option<TailConstant>,
    pub note: Option<String>,
}

impl Condition {
    pub fn from_probe(name: &str, probe: DivergenceVerdict) -> Condition {
        Condition {
            name: name.into(),
            verdict: Verdict::from_probe(&probe),
            note: probe.diagnostic.clone(),
            probe: Some(probe),
            tail: None,
        }
    }

    pub fn check(name: &str, holds: bool, note: Option<String>) -> Condition {
        Condition {
            name: name.into(),
            verdict: Verdict::from_bool(holds),
            probe: None,
            tail: None,
            note,
        }
    }
}

/// One `(horizon, partial value)` point behind a sub-condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub condition: String,
    #[serde(with = "crate::serde_f64")]
    pub horizon: f64,
    #[serde(with = "crate::serde_f64")]
    pub partial_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: CriterionId,
    pub verdict: Verdict,
    pub conclusion: String,
    pub evidence: Vec<Evidence>,
    pub conditions: Vec<Condition>,
    pub notes: Vec<String>,
}

impl CriterionReport {
    /// Combines sub-conditions; evidence is gathered from their probes and
    /// tail windows.
    pub fn assemble(id: CriterionId, conditions: Vec<Condition>, notes: Vec<String>) -> Self {
        let verdict = Verdict::all(conditions.iter().map(|c| c.verdict));
        let mut evidence = Vec::new();
        for c in &conditions {
            let points: Vec<(f64, f64)> = match (&c.probe, &c.tail) {
                (Some(p), _) => p.partials.clone(),
                (None, Some(t)) => t.windows.clone(),
                _ => Vec::new(),
            };
            evidence.extend(points.into_iter().map(|(h, v)| Evidence {
                condition: c.name.clone(),
                horizon: h,
                partial_value: v,
            }));
        }
        let conclusion = match verdict {
            Verdict::Satisfied => id.conclusion().to_string(),
            Verdict::NotSatisfied => "criterion silent".to_string(),
            Verdict::Inconclusive => "criterion inconclusive".to_string(),
        };
        CriterionReport {
            id,
            verdict,
            conclusion,
            evidence,
            conditions,
            notes,
        }
    }

    /// Inconclusive report for a criterion whose evaluation stopped on an
    /// error.
    pub fn failed(id: CriterionId, error: &CriteriaError) -> Self {
        CriterionReport {
            id,
            verdict: Verdict::Inconclusive,
            conclusion: "criterion inconclusive".to_string(),
            evidence: Vec::new(),
            conditions: Vec::new(),
            notes: vec![format!("error: {error}")],
        }
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

/// Everything the full criteria suite needs.
pub struct CriteriaInput<'a> {
    pub spec: &'a SystemSpec,
    /// Weight `ρ` as an expression in `t`.
    pub rho: Expr,
    pub kernel: KernelSpec,
    pub horizons: Vec<f64>,
    /// Evaluation times for the averaged (limsup / liminf) criteria.
    pub t_grid: Vec<f64>,
    pub thm35_variant: Thm35Variant,
    pub trajectory: Option<&'a dyn StateFn>,
    /// Window for the trajectory-based diagnostics.
    pub window: Option<(f64, f64)>,
}

/// Runs the selected criteria, concurrently under a parallel executor.
pub fn run_criteria(
    input: &CriteriaInput<'_>,
    ids: &[CriterionId],
    opts: &ProbeOptions,
) -> Vec<Result<CriterionReport, CriteriaError>> {
    opts.exec.map(ids, |&id| run_one(input, id, opts))
}

fn run_one(
    input: &CriteriaInput<'_>,
    id: CriterionId,
    opts: &ProbeOptions,
) -> Result<CriterionReport, CriteriaError> {
    let spec = input.spec;
    match id {
        CriterionId::A4 => check_a4(spec, &input.horizons, opts),
        CriterionId::Thm31 => check_thm31(spec, &input.rho, &input.horizons, opts),
        CriterionId::Thm32 => check_thm32(spec, &input.kernel, &input.t_grid, opts),
        CriterionId::Thm33 => check_thm33(spec, &input.kernel, &input.t_grid, opts),
        CriterionId::Lem33 => check_lemma33(spec, &input.horizons, opts),
        CriterionId::Thm35 => check_thm35(
            spec,
            input.trajectory,
            &input.t_grid,
            input.thm35_variant,
            opts,
        ),
        CriterionId::Thm34 => {
            let traj = input.trajectory.ok_or_else(|| {
                CriteriaError::Precondition("Thm3.4 needs a trajectory".into())
            })?;
            let window = input.window.unwrap_or_else(|| traj.domain());
            let ropts = RiccatiOptions {
                exec: opts.exec,
                ..RiccatiOptions::default()
            };
            check_thm34(traj, spec, window, &ropts)
        }
    }
}

/// Horizons above the lower limit `a`; padded by decades to at least four.
pub fn fit_horizons(a: f64, horizons: &[f64]) -> Vec<f64> {
    let mut hs: Vec<f64> = horizons.iter().copied().filter(|h| *h > a).collect();
    while hs.len() < 4 {
        let next = hs.last().map_or(a.abs().max(1.0) * 10.0, |h| h * 10.0);
        hs.push(next);
    }
    hs
}

/// `n` points spaced geometrically over `[lo, hi]`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let r = (hi / lo).powf(1.0 / (n - 1) as f64);
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo * r.powi(i as i32) })
        .collect()
}

/// Evaluator in `t` that stays finite across the `f64` range: wide
/// arithmetic when the tree has exponentials, plain `f64` otherwise with a
/// wide retry on zero or non-finite results.
pub(crate) fn wide_in_t(e: &Expr) -> impl Fn(f64) -> Result<f64, ExprError> + Sync + '_ {
    let wide = e.has_exponential();
    move |s| {
        if !wide {
            match e.eval_at(Var::T, s) {
                Ok(v) if v.is_finite() && v != 0.0 => return Ok(v),
                Err(err @ ExprError::Domain { .. }) => return Err(err),
                _ => {}
            }
        }
        e.eval_wide_at(Var::T, s)
    }
}

pub(crate) fn probe(
    name: &str,
    e: &Expr,
    a: f64,
    horizons: &[f64],
    opts: &ProbeOptions,
) -> Condition {
    let f = wide_in_t(e);
    Condition::from_probe(name, probe_improper_with(&f, a, &fit_horizons(a, horizons), opts))
}

/// Samples `e(t) > 0` on a geometric grid; returns the first failure.
pub(crate) fn positive_on(e: &Expr, lo: f64, hi: f64, n: usize) -> Option<String> {
    for t in geometric_grid(lo, hi.max(lo * 1.0001), n) {
        match e.eval_wide(&Bindings::new().with(Var::T, t)) {
            Ok(v) if v.signum() > 0.0 => {}
            Ok(v) => return Some(format!("{e} = {} at t = {t}", v.to_f64())),
            Err(err) => return Some(format!("{e} at t = {t}: {err}")),
        }
    }
    None
}

pub(crate) fn limsup_condition(name: &str, samples: &[(f64, f64)]) -> Condition {
    let tc = tail_constant_from_samples(crate::quad::TailKind::Limsup, samples);
    Condition {
        name: name.into(),
        verdict: Verdict::from_unbounded_limsup(&tc),
        note: tc.note.clone(),
        probe: None,
        tail: Some(tc),
    }
}
