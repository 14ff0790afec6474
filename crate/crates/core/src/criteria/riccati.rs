use serde::{Deserialize, Serialize};

use super::{geometric_grid, wide_in_t, Condition, CriteriaError, CriterionId, CriterionReport};
use crate::dde::{classify_case, scaled, sign_triple, CaseClass, StateFn, SystemSpec};
use crate::exec::Executor;
use crate::expr::{Expr, Var};
use crate::quad::{
    integrate_with, probe_improper_with, tail_constant_from_samples, Classification,
    ProbeOptions, TailConstant, TailKind, Tolerance,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiccatiOptions {
    /// Points on the trajectory window.
    pub samples: usize,
    /// Upper end of the grid used for `(A_α)_*` and `(B_α)_*`.
    pub tail_end: f64,
    pub tail_points: usize,
    /// Slack allowed in every inequality.
    pub tol: f64,
    pub exec: Executor,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        RiccatiOptions {
            samples: 1000,
            tail_end: 1e5,
            tail_points: 40,
            tol: 1e-3,
            exec: Executor::default(),
        }
    }
}

/// `W(t) = b D^α(a D^α u) / (a D^α u)` along a solution, with the derived
/// tail constants and the Case I inequalities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiccatiSeries {
    /// `(t, W(t))` where the denominator is usable.
    #[serde(with = "crate::serde_f64::pairs")]
    pub w: Vec<(f64, f64)>,
    /// Grid points dropped because `|a D^α u| < 1e-12`.
    pub masked: usize,
    /// `liminf t W(t)`.
    pub d_lower: TailConstant,
    /// `limsup t W(t)`.
    pub d_upper: TailConstant,
    /// `liminf t ∫_t^∞ s^(α-1) A_α(s) ds`.
    pub a_star: TailConstant,
    /// `liminf (1/t) ∫_{t0}^t s^(α+1) A_α(s) ds`.
    pub b_star: TailConstant,
    /// Time at which the `t^(α-1)/b` factor of the first inequality is taken.
    #[serde(with = "crate::serde_f64")]
    pub eval_time: f64,
    /// `(A_α)_* <= d - t^(α-1) d^2 / b(t)`.
    pub first_inequality: bool,
    /// `(B_α)_* <= D - D^2`.
    pub second_inequality: bool,
    /// `0 < d < 1` and `0 < D < 1`.
    pub unit_bounds: bool,
    /// `D <= 1 - (B_α)_*`.
    pub upper_bound: bool,
    pub notes: Vec<String>,
}

/// Riccati series along `traj` on `window`; requires the Case I sign
/// pattern there.
pub fn riccati_diagnostics(
    traj: &dyn StateFn,
    spec: &SystemSpec,
    window: (f64, f64),
    opts: &RiccatiOptions,
) -> Result<RiccatiSeries, CriteriaError> {
    match classify_case(traj, spec, window)? {
        CaseClass::CaseI => {}
        other => {
            return Err(CriteriaError::Precondition(format!(
                "Case I required on the window, found {other:?}"
            )))
        }
    }
    let alpha = spec.alpha.value();
    let d = spec.derived();
    let a_scaled = scaled(&d.a, alpha);
    let n = opts.samples.max(2);
    let grid: Vec<f64> = (0..n)
        .map(|i| window.0 + (window.1 - window.0) * i as f64 / (n - 1) as f64)
        .collect();
    let mut w = Vec::with_capacity(n);
    let mut masked = 0;
    for &t in &grid {
        let [_, du, daa] = sign_triple(traj, &a_scaled, alpha, t)?;
        let a = d.a.eval_wide_at(Var::T, t)?;
        let b = d.b.eval_wide_at(Var::T, t)?;
        let den = a * du;
        if den.abs() < 1e-12 || !den.is_finite() {
            masked += 1;
            continue;
        }
        w.push((t, b * daa / den));
    }
    if masked * 20 > n {
        return Err(CriteriaError::Precondition(format!(
            "denominator a D^α u vanishes on {masked} of {n} grid points"
        )));
    }
    let mut series = riccati_from_samples(spec, &w, opts)?;
    series.masked = masked;
    Ok(series)
}

/// Riccati quantities from given `(t, W(t))` samples (sorted by `t`).
pub fn riccati_from_samples(
    spec: &SystemSpec,
    w: &[(f64, f64)],
    opts: &RiccatiOptions,
) -> Result<RiccatiSeries, CriteriaError> {
    if w.len() < 4 {
        return Err(CriteriaError::Precondition("need at least 4 samples of W".into()));
    }
    let tw: Vec<(f64, f64)> = w.iter().map(|&(t, v)| (t, t * v)).collect();
    let d_lower = tail_constant_from_samples(TailKind::Liminf, &tw);
    let d_upper = tail_constant_from_samples(TailKind::Limsup, &tw);
    let (a_star, b_star) = tail_constants(spec, opts)?;
    let alpha = spec.alpha.value();
    let eval_time = w[w.len() - 1].0;
    let b_t = spec.derived().b.eval_wide_at(Var::T, eval_time)?;
    let (dl, du) = (d_lower.value, d_upper.value);
    let tol = opts.tol;
    let first = a_star.value <= dl - eval_time.powf(alpha - 1.0) / b_t * dl * dl + tol;
    let second = b_star.value <= du - du * du + tol;
    let unit = dl > -tol && dl < 1.0 + tol && du > -tol && du < 1.0 + tol;
    let upper = du <= 1.0 - b_star.value + tol;
    let notes = vec![format!(
        "the first inequality mixes t and s in t^(α-1)/b(s); both are taken at t = {eval_time}"
    )];
    Ok(RiccatiSeries {
        w: w.to_vec(),
        masked: 0,
        d_lower,
        d_upper,
        a_star,
        b_star,
        eval_time,
        first_inequality: first,
        second_inequality: second,
        unit_bounds: unit,
        upper_bound: upper,
        notes,
    })
}

fn unbounded(kind: TailKind, value: f64, note: &str) -> TailConstant {
    TailConstant {
        kind,
        windows: Vec::new(),
        value,
        unbounded: value.is_infinite(),
        low_confidence: value.is_nan(),
        note: Some(note.into()),
    }
}

/// `(A_α)_*` and `(B_α)_*` on a geometric grid up to `opts.tail_end`.
fn tail_constants(
    spec: &SystemSpec,
    opts: &RiccatiOptions,
) -> Result<(TailConstant, TailConstant), CriteriaError> {
    let alpha = spec.alpha.value();
    let t = Expr::var(Var::T);
    let a_alpha = spec.derived().a_alpha;
    let fa = t.clone().powf(alpha - 1.0) * a_alpha.clone();
    let fb = t.powf(alpha + 1.0) * a_alpha;
    let start = spec.criteria_start()?;
    let end = opts.tail_end.max(start * 100.0);
    let grid = geometric_grid(start * 1.5, end, opts.tail_points.max(8));
    let tol = Tolerance::new(1e-300, 1e-11);
    let (ffa, ffb) = (wide_in_t(&fa), wide_in_t(&fb));
    let pieces: Vec<(f64, f64)> = grid.windows(2).map(|w| (w[0], w[1])).collect();
    let inc_a = opts.exec.map(&pieces, |&(a, b)| integrate_with(&ffa, a, b, tol));
    let inc_b = opts.exec.map(&pieces, |&(a, b)| integrate_with(&ffb, a, b, tol));

    let popts = ProbeOptions {
        exec: opts.exec,
        tol,
        ..ProbeOptions::default()
    };
    let far: Vec<f64> = (1..=4).map(|k| end * 10f64.powi(k)).collect();
    let tail = probe_improper_with(&ffa, end, &far, &popts);
    let a_star = match (tail.classification, tail.limit) {
        (Classification::Converges, Some(rest)) => {
            let mut acc = rest;
            let mut samples = vec![(end, end * acc)];
            for (i, inc) in inc_a.iter().enumerate().rev() {
                let inc = inc.as_ref().map_err(|e| CriteriaError::Precondition(e.to_string()))?;
                acc += inc.value;
                samples.push((grid[i], grid[i] * acc));
            }
            samples.reverse();
            tail_constant_from_samples(TailKind::Liminf, &samples)
        }
        _ if tail.diverges_to_infinity() => unbounded(TailKind::Liminf, f64::INFINITY, "tail integral diverges"),
        _ if tail.classification == Classification::Diverges => {
            unbounded(TailKind::Liminf, f64::NEG_INFINITY, "tail integral diverges to -inf")
        }
        _ => unbounded(TailKind::Liminf, f64::NAN, "tail integral inconclusive"),
    };

    let head = integrate_with(&ffb, spec.t0, grid[0], tol)
        .map_err(|e| CriteriaError::Precondition(e.to_string()))?
        .value;
    let mut acc = head;
    let mut samples = vec![(grid[0], acc / grid[0])];
    for (i, inc) in inc_b.iter().enumerate() {
        match inc {
            Ok(e) => {
                acc += e.value;
                samples.push((grid[i + 1], acc / grid[i + 1]));
            }
            Err(_) => break,
        }
    }
    let b_star = tail_constant_from_samples(TailKind::Liminf, &samples);
    Ok((a_star, b_star))
}

/// Report form of [`riccati_diagnostics`].
pub fn check_thm34(
    traj: &dyn StateFn,
    spec: &SystemSpec,
    window: (f64, f64),
    opts: &RiccatiOptions,
) -> Result<CriterionReport, CriteriaError> {
    let r = riccati_diagnostics(traj, spec, window, opts)?;
    let conds = vec![
        Condition::check(
            "(A_alpha)_* <= d - t^(alpha-1) d^2 / b",
            r.first_inequality,
            Some(format!("(A_alpha)_* = {}, d = {}", r.a_star.value, r.d_lower.value)),
        ),
        Condition::check(
            "(B_alpha)_* <= D - D^2",
            r.second_inequality,
            Some(format!("(B_alpha)_* = {}, D = {}", r.b_star.value, r.d_upper.value)),
        ),
        Condition::check("0 < d < 1 and 0 < D < 1", r.unit_bounds, None),
        Condition::check("D <= 1 - (B_alpha)_*", r.upper_bound, None),
    ];
    let mut notes = r.notes.clone();
    notes.push(format!("{} grid points masked", r.masked));
    Ok(CriterionReport::assemble(CriterionId::Thm34, conds, notes))
}
