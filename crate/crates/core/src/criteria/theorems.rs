use serde::{Deserialize, Serialize};

use super::{
    fit_horizons, geometric_grid, limsup_condition, positive_on, probe, Condition, CriteriaError,
    CriterionId, CriterionReport, KernelSpec, Verdict,
};
use crate::dde::{StateFn, SystemSpec};
use crate::expr::{Bindings, Expr, ExprError, Var};
use crate::quad::{
    integrate_with, neville_at_zero, tail_constant_from_samples, ProbeOptions, QuadError, TailKind, Tolerance,
};

fn t() -> Expr {
    Expr::var(Var::T)
}

/// `(A4)`: `∫ s^(α-1)/b = ∞`, `∫ s^(α-1)/a = ∞` from `t0`, and the sampled
/// side condition `b(t) t^(1-α) < 1` over the horizon range.
pub fn check_a4(
    spec: &SystemSpec,
    horizons: &[f64],
    opts: &ProbeOptions,
) -> Result<CriterionReport, CriteriaError> {
    let alpha = spec.alpha.value();
    let d = spec.derived();
    let w = t().powf(alpha - 1.0);
    let over_b = w.clone() * spec.q.clone();
    let over_a = w * spec.p.clone();
    let a0 = spec.t0;
    let hs = fit_horizons(a0, horizons);
    let (cb, ca) = opts.exec.join(
        || probe("integral of s^(alpha-1)/b", &over_b, a0, &hs, opts),
        || probe("integral of s^(alpha-1)/a", &over_a, a0, &hs, opts),
    );
    let side = d.b.clone() * t().powf(1.0 - alpha);
    let mut violation = None;
    for s in geometric_grid(a0, *hs.last().unwrap(), 400) {
        match side.eval_wide_at(Var::T, s) {
            Ok(v) if v < 1.0 => {}
            Ok(v) => {
                violation = Some(format!("b(t) t^(1-alpha) = {v} at t = {s}"));
                break;
            }
            Err(e) => {
                violation = Some(format!("b(t) t^(1-alpha) at t = {s}: {e}"));
                break;
            }
        }
    }
    let side = Condition::check("b(t) t^(1-alpha) < 1", violation.is_none(), violation);
    Ok(CriterionReport::assemble(CriterionId::A4, vec![cb, ca, side], Vec::new()))
}

fn rho_positive(rho: &Expr, lo: f64, hi: f64) -> Result<(), CriteriaError> {
    match positive_on(rho, lo, hi, 200) {
        None => Ok(()),
        Some(why) => Err(CriteriaError::Precondition(format!("rho must be positive: {why}"))),
    }
}

/// `∫ c(s)(s - T) τ(σ(s)) ds = ∞` and
/// `∫ (s^(α-1) ρ A_α - ρ'^2/(4ρ) s^(1-α) b) ds = ∞`, both from the point
/// where `τ(σ(t)) >= T`.
pub fn check_thm31(
    spec: &SystemSpec,
    rho: &Expr,
    horizons: &[f64],
    opts: &ProbeOptions,
) -> Result<CriterionReport, CriteriaError> {
    let alpha = spec.alpha.value();
    let d = spec.derived();
    let t2 = spec.criteria_start()?;
    let hs = fit_horizons(t2, horizons);
    rho_positive(rho, t2, *hs.last().unwrap())?;
    let ts = spec.tau_sigma();
    let first = d.c.clone() * (t() - spec.anchor) * ts;
    let drho = rho.diff(Var::T);
    let second = t().powf(alpha - 1.0) * rho.clone() * d.a_alpha.clone()
        - 0.25 * (drho.clone() * drho) / rho.clone() * t().powf(1.0 - alpha) * d.b.clone();
    let (c1, c2) = opts.exec.join(
        || probe("integral of c(s)(s-T)tau(sigma(s))", &first, t2, &hs, opts),
        || probe("integral of s^(alpha-1) rho A - rho'^2 s^(1-alpha) b/(4 rho)", &second, t2, &hs, opts),
    );
    let notes = vec![format!("lower limit t2 = {t2}, anchor T = {}", spec.anchor)];
    Ok(CriterionReport::assemble(CriterionId::Thm31, vec![c1, c2], notes))
}

/// Cut-offs `δ = f (t - t1)` used for the `1/H` singularity at `s = t`.
pub const DELTA_FRACTIONS: [f64; 3] = [1e-2, 1e-3, 1e-4];
/// Relative agreement required of the `δ`-refined values.
pub const DELTA_TOL: f64 = 1e-3;

/// Integrals over `[t1, t - δ]` for the three cut-offs and their limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRefinement {
    #[serde(with = "crate::serde_f64")]
    pub t: f64,
    #[serde(with = "crate::serde_f64::vec")]
    pub values: Vec<f64>,
    /// Magnitude used for relative comparisons: the largest of the net
    /// value and the separately integrated positive and negative terms.
    #[serde(with = "crate::serde_f64")]
    pub scale: f64,
    /// `(I3 - I2)/(I2 - I1)`.
    #[serde(with = "crate::serde_f64::option")]
    pub ratio: Option<f64>,
    /// Polynomial extrapolation to `δ = 0` when the differences contract,
    /// `I3` otherwise.
    #[serde(with = "crate::serde_f64")]
    pub limit: f64,
    /// Both successive differences within `DELTA_TOL * scale`.
    pub raw_cauchy: bool,
    /// Raw agreement, or contracting differences whose geometric remainder
    /// is within `DELTA_TOL * scale`.
    pub converged: bool,
}

const FUNCTIONAL_TOL: Tolerance = Tolerance {
    abs: 1e-13,
    rel: 1e-10,
    max_panels: 1 << 20,
};

/// `∫_{t1}^{t-δ} (pos - neg)` for the cut-offs in [`DELTA_FRACTIONS`].
pub fn delta_refinement<P, N>(pos: &P, neg: &N, t1: f64, t: f64) -> Result<DeltaRefinement, QuadError>
where
    P: Fn(f64) -> Result<f64, ExprError> + ?Sized,
    N: Fn(f64) -> Result<f64, ExprError> + ?Sized,
{
    let mut lo = t1;
    let (mut p, mut n) = (0.0, 0.0);
    let mut values = Vec::with_capacity(3);
    for f in DELTA_FRACTIONS {
        let hi = t - f * (t - t1);
        p += integrate_with(pos, lo, hi, FUNCTIONAL_TOL)?.value;
        n += integrate_with(neg, lo, hi, FUNCTIONAL_TOL)?.value;
        values.push(p - n);
        lo = hi;
    }
    let scale = values[2].abs().max(p.abs()).max(n.abs());
    let d1 = values[1] - values[0];
    let d2 = values[2] - values[1];
    let bound = DELTA_TOL * scale;
    let raw_cauchy = d1.abs() <= bound && d2.abs() <= bound;
    let ratio = (d1 != 0.0).then(|| d2 / d1);
    // contracting differences: the cut-off error is a power series in δ,
    // so the limit is the polynomial extrapolation to δ = 0
    let (limit, contracted) = match ratio {
        Some(r) if (0.0..1.0).contains(&r) => {
            let rest = d2 * r / (1.0 - r);
            let deltas: Vec<f64> = DELTA_FRACTIONS.iter().map(|f| f * (t - t1)).collect();
            let limit = *neville_at_zero(&deltas, &values).last().unwrap();
            (limit, rest.abs() <= bound)
        }
        _ => (values[2], false),
    };
    Ok(DeltaRefinement {
        t,
        values,
        scale,
        ratio,
        limit,
        raw_cauchy,
        converged: raw_cauchy || contracted,
    })
}

fn averaged_grid(t1: f64, t_grid: &[f64]) -> Vec<f64> {
    let g: Vec<f64> = t_grid.iter().copied().filter(|t| *t > t1 * (1.0 + 1e-9)).collect();
    if g.len() >= 4 {
        g
    } else {
        geometric_grid(10.0 * t1.max(0.1), 1e3 * t1.max(0.1), 30)
    }
}

fn in_ts(e: &Expr) -> Expr {
    e.rename(Var::T, Var::S)
}

fn bind(e: &Expr, t: f64, s: f64) -> Result<f64, ExprError> {
    let b = Bindings::new().with(Var::T, t).with(Var::S, s);
    if !e.has_exponential() {
        match e.eval(&b) {
            Ok(v) if v.is_finite() && v != 0.0 => return Ok(v),
            Err(err @ ExprError::Domain { .. }) => return Err(err),
            _ => {}
        }
    }
    e.eval_wide(&b).map(|w| w.to_f64())
}

/// Normalised kernel average with the `1/H(t, s)` term, evaluated on
/// `t_grid` by `δ`-refinement; satisfied when its limsup is `+∞`.
pub fn check_thm32(
    spec: &SystemSpec,
    kernel: &KernelSpec,
    t_grid: &[f64],
    opts: &ProbeOptions,
) -> Result<CriterionReport, CriteriaError> {
    let alpha = spec.alpha.value();
    let d = spec.derived();
    let t1 = spec.criteria_start()?;
    let grid = averaged_grid(t1, t_grid);
    kernel.validate(t1, *grid.last().unwrap())?;
    let s = Expr::var(Var::S);
    let pos = kernel.h_kernel.clone() * s.clone().powf(alpha - 1.0) * kernel.rho.clone() * in_ts(&d.a_alpha);
    let neg = 0.25 * kernel.rho.clone() * in_ts(&d.b) * s.powf(1.0 - alpha)
        * (kernel.h.clone() * kernel.h.clone())
        / kernel.h_kernel.clone();
    let rows = opts.exec.map(&grid, |&t| {
        let fp = |s: f64| bind(&pos, t, s);
        let fn_ = |s: f64| bind(&neg, t, s);
        let r = delta_refinement(&fp, &fn_, t1, t).map_err(|e| format!("t = {t}: {e}"))?;
        let norm = bind(&kernel.h_kernel, t, t1).map_err(|e| format!("H({t}, {t1}): {e}"))?;
        Ok::<_, String>((r, norm))
    });
    let mut samples = Vec::new();
    let mut unconverged = Vec::new();
    let mut failures = Vec::new();
    let mut refinements = Vec::new();
    for row in rows {
        match row {
            Ok((r, norm)) => {
                if !r.converged {
                    unconverged.push(r.t);
                }
                samples.push((r.t, r.limit / norm));
                refinements.push(r);
            }
            Err(e) => failures.push(e),
        }
    }
    let mut cond = limsup_condition("limsup of the normalised kernel average", &samples);
    let mut notes = vec![format!("lower limit t1 = {t1}")];
    if !failures.is_empty() {
        cond.verdict = Verdict::Inconclusive;
        notes.push(format!("evaluation failed: {}", failures.join("; ")));
    }
    let raw = refinements.iter().filter(|r| r.raw_cauchy).count();
    notes.push(format!(
        "delta refinement: {raw}/{} raw Cauchy, {}/{} converged",
        refinements.len(),
        refinements.len() - unconverged.len(),
        refinements.len()
    ));
    let delta = Condition::check(
        "delta refinement converges",
        unconverged.is_empty() && failures.is_empty(),
        (!unconverged.is_empty()).then(|| format!("not converged at t = {unconverged:?}")),
    );
    let delta = Condition {
        verdict: if delta.verdict == Verdict::NotSatisfied {
            Verdict::Inconclusive
        } else {
            delta.verdict
        },
        ..delta
    };
    Ok(CriterionReport::assemble(CriterionId::Thm32, vec![cond, delta], notes))
}

/// Normalised kernel average with the `H ρ'^2/ρ` term (no singularity).
pub fn check_thm33(
    spec: &SystemSpec,
    kernel: &KernelSpec,
    t_grid: &[f64],
    opts: &ProbeOptions,
) -> Result<CriterionReport, CriteriaError> {
    let alpha = spec.alpha.value();
    let d = spec.derived();
    let t1 = spec.criteria_start()?;
    let grid = averaged_grid(t1, t_grid);
    kernel.validate(t1, *grid.last().unwrap())?;
    let s = Expr::var(Var::S);
    let drho = kernel.rho.diff(Var::S);
    let integrand = kernel.h_kernel.clone()
        * (s.clone().powf(alpha - 1.0) * kernel.rho.clone() * in_ts(&d.a_alpha)
            - 0.25 * (drho.clone() * drho) / kernel.rho.clone() * s.powf(1.0 - alpha) * in_ts(&d.b));
    let rows = opts.exec.map(&grid, |&t| {
        let f = |s: f64| bind(&integrand, t, s);
        let v = integrate_with(&f, t1, t, FUNCTIONAL_TOL).map_err(|e| format!("t = {t}: {e}"))?;
        let norm = bind(&kernel.h_kernel, t, t1).map_err(|e| format!("H({t}, {t1}): {e}"))?;
        Ok::<_, String>((t, v.value / norm))
    });
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for row in rows {
        match row {
            Ok(p) => samples.push(p),
            Err(e) => failures.push(e),
        }
    }
    let mut cond = limsup_condition("limsup of the normalised kernel average", &samples);
    let mut notes = vec![format!("lower limit t1 = {t1}")];
    if !failures.is_empty() {
        cond.verdict = Verdict::Inconclusive;
        notes.push(format!("evaluation failed: {}", failures.join("; ")));
    }
    Ok(CriterionReport::assemble(CriterionId::Thm33, vec![cond], notes))
}

/// What stands in the averaged criterion's `u(τ(σ(s)))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Thm35Variant {
    /// The delay `τ(σ(s))` itself, as in `A_α`.
    Delay,
    /// The trajectory value `u(τ(σ(s)))`.
    State,
}

/// `liminf (1/t) ∫ k s^(α+1) (c/a) ((X - T)/s) X^α ds > 1/2` with
/// `X = τ(σ(s))` or `u(τ(σ(s)))`.
///
/// Integration starts where `τ(σ(s)) >= T` (at or after `t0`); the lower
/// limit does not affect the liminf of the average.
pub fn check_thm35(
    spec: &SystemSpec,
    traj: Option<&dyn StateFn>,
    t_grid: &[f64],
    variant: Thm35Variant,
    opts: &ProbeOptions,
) -> Result<CriterionReport, CriteriaError> {
    let alpha = spec.alpha.value();
    let d = spec.derived();
    let lo = spec.criteria_start()?;
    let ts = spec.tau_sigma();
    // k s^α c p, the factor common to both variants
    let coef = spec.k * t().powf(alpha) * d.c.clone() * spec.p.clone();
    let traj = match (variant, traj) {
        (Thm35Variant::State, None) => {
            return Err(CriteriaError::Precondition(
                "the state variant needs a trajectory".into(),
            ))
        }
        (_, tr) => tr,
    };
    let integrand = |s: f64| -> Result<f64, String> {
        let x_delay = ts.eval_at(Var::T, s).map_err(|e| e.to_string())?;
        let x = match variant {
            Thm35Variant::Delay => x_delay,
            Thm35Variant::State => {
                traj.expect("checked").state(x_delay).map_err(|e| e.to_string())?[0]
            }
        };
        if !(x > 0.0) {
            return Err(format!("X = {x} at s = {s} is not positive"));
        }
        let k = coef.eval_wide_at(Var::T, s).map_err(|e| e.to_string())?;
        Ok(k * (x - spec.anchor) * x.powf(alpha))
    };
    let mut grid: Vec<f64> = if t_grid.iter().filter(|t| **t > lo).count() >= 4 {
        t_grid.iter().copied().filter(|t| *t > lo).collect()
    } else {
        geometric_grid(lo * 1.5 + 1.0, 1e3 * lo.max(1.0), 30)
    };
    let mut notes = vec![format!("variant: {variant:?}; lower limit {lo}")];
    if let (Thm35Variant::State, Some(tr)) = (variant, traj) {
        let hi = tr.domain().1;
        let before = grid.len();
        grid.retain(|&t| ts.eval_at(Var::T, t).is_ok_and(|x| x <= hi));
        if grid.len() < before {
            notes.push(format!("grid cut to the trajectory range (u known up to {hi})"));
        }
    }
    let mut edges = vec![lo];
    edges.extend(&grid);
    let pieces: Vec<(f64, f64)> = edges.windows(2).map(|w| (w[0], w[1])).collect();
    let incs = opts.exec.map(&pieces, |&(a, b)| {
        let f = |s: f64| {
            integrand(s).map_err(|reason| ExprError::Domain {
                reason,
                subexpr: "averaged integrand".into(),
            })
        };
        integrate_with(&f, a, b, Tolerance::new(1e-13, 1e-9))
    });
    let mut samples = Vec::new();
    let mut total = 0.0;
    let mut failure = None;
    let mut overflow = false;
    for (inc, &(_, b)) in incs.into_iter().zip(&pieces) {
        match inc {
            Ok(e) if (total + e.value).is_finite() => {
                total += e.value;
                samples.push((b, total / b));
            }
            Ok(e) => {
                overflow = true;
                failure = Some(format!("running integral overflowed ({}) at t = {b}", e.value));
                break;
            }
            Err(e) => {
                overflow = matches!(e, QuadError::NonFinite { value, .. } if value.is_infinite());
                failure = Some(e.to_string());
                break;
            }
        }
    }
    let tc = tail_constant_from_samples(TailKind::Liminf, &samples);
    let verdict = if overflow && samples.len() >= 4 && tc.unbounded && tc.value > 0.0 {
        notes.push("the average overflowed after growing without bound".into());
        Verdict::Satisfied
    } else if failure.is_some() || samples.len() < 4 {
        Verdict::Inconclusive
    } else if tc.unbounded {
        Verdict::from_bool(tc.value > 0.5)
    } else if tc.low_confidence {
        Verdict::Inconclusive
    } else {
        Verdict::from_bool(tc.value > 0.5)
    };
    if let Some(f) = failure {
        notes.push(format!("evaluation stopped: {f}"));
    }
    let cond = Condition {
        name: "liminf of the running average > 1/2".into(),
        verdict,
        note: tc.note.clone(),
        probe: None,
        tail: Some(tc),
    };
    Ok(CriterionReport::assemble(CriterionId::Thm35, vec![cond], notes))
}
