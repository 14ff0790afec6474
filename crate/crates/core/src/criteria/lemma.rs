use super::{fit_horizons, geometric_grid, wide_in_t, Condition, CriteriaError, CriterionId, CriterionReport, Verdict};
use crate::dde::SystemSpec;
use crate::expr::{Expr, Var};
use crate::quad::{integrate_with, probe_improper_with, Classification, ProbeOptions, Tolerance};

/// Cached tails `J(μ) = ∫_μ^∞ s^(α-1) c(s) ds` and `M(η) = ∫_η^∞ J(μ) dμ`
/// on a geometric grid.
///
/// Tails are accumulated from the far end so small values keep their
/// relative accuracy. Between grid points `J` and `M` are interpolated as
/// local power laws; beyond the grid `J` is continued with the power fitted
/// on its last segment.
#[derive(Clone, Debug, PartialEq)]
pub struct NestedTail {
    pub grid: Vec<f64>,
    pub inner: Vec<f64>,
    pub middle: Vec<f64>,
    /// `p` with `J(μ) ~ μ^-p` past the grid.
    pub inner_decay: Option<f64>,
}

/// Result of building the nested tails.
#[derive(Clone, Debug, PartialEq)]
pub enum NestedOutcome {
    Ready(NestedTail),
    /// `∫ J` does not converge, so `M = ∞`.
    MiddleDiverges { decay: f64 },
}

const TIGHT: Tolerance = Tolerance {
    abs: 1e-300,
    rel: 1e-11,
    max_panels: 1 << 20,
};

fn segment(xs: &[f64], x: f64) -> usize {
    match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => i.min(xs.len() - 2),
        Err(i) => i.clamp(1, xs.len() - 1) - 1,
    }
}

/// Power-law interpolation when both ends are positive, linear otherwise.
fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = segment(xs, x);
    let (a, b, ya, yb) = (xs[i], xs[i + 1], ys[i], ys[i + 1]);
    if ya > 0.0 && yb > 0.0 {
        let q = (yb / ya).ln() / (b / a).ln();
        ya * (x / a).powf(q)
    } else {
        ya + (yb - ya) * (x - a) / (b - a)
    }
}

/// Exact integral of the interpolant of [`interp`] over one segment.
fn segment_integral(a: f64, b: f64, ya: f64, yb: f64) -> f64 {
    if ya > 0.0 && yb > 0.0 {
        let q = (yb / ya).ln() / (b / a).ln();
        let e = 1.0 + q;
        if e.abs() < 1e-12 {
            ya * a * (b / a).ln()
        } else {
            ya * a * ((b / a).powf(e) - 1.0) / e
        }
    } else {
        0.5 * (ya + yb) * (b - a)
    }
}

impl NestedTail {
    /// Builds the tails on `[t2, x_end]` (16 points per decade).
    pub fn build(
        spec: &SystemSpec,
        t2: f64,
        x_end: f64,
        opts: &ProbeOptions,
    ) -> Result<NestedOutcome, CriteriaError> {
        let alpha = spec.alpha.value();
        let e = Expr::var(Var::T).powf(alpha - 1.0) * spec.derived().c;
        let f = wide_in_t(&e);
        let decades = (x_end / t2).log10();
        let grid = geometric_grid(t2, x_end, (16.0 * decades).ceil() as usize + 1);
        let n = grid.len();
        let far: Vec<f64> = (1..=4).map(|k| x_end * 10f64.powi(k)).collect();
        let tail_opts = ProbeOptions { tol: TIGHT, ..*opts };
        let tail = probe_improper_with(&f, x_end, &far, &tail_opts);
        let j_end = match (tail.classification, tail.limit) {
            (Classification::Converges, Some(l)) => l,
            _ => {
                return Err(CriteriaError::Precondition(format!(
                    "innermost tail beyond {x_end} is not convergent ({:?})",
                    tail.classification
                )))
            }
        };
        let pieces: Vec<(f64, f64)> = grid.windows(2).map(|w| (w[0], w[1])).collect();
        let incs = opts.exec.map(&pieces, |&(a, b)| integrate_with(&f, a, b, TIGHT));
        let mut inner = vec![0.0; n];
        inner[n - 1] = j_end;
        for i in (0..n - 1).rev() {
            let inc = incs[i].as_ref().map_err(|e| CriteriaError::Precondition(e.to_string()))?;
            inner[i] = inner[i + 1] + inc.value;
        }
        let decay = (inner[n - 1] > 0.0 && inner[n - 2] > 0.0)
            .then(|| -(inner[n - 1] / inner[n - 2]).ln() / (grid[n - 1] / grid[n - 2]).ln());
        let m_end = match decay {
            _ if inner[n - 1] == 0.0 => 0.0,
            Some(p) if p > 1.0 => inner[n - 1] * grid[n - 1] / (p - 1.0),
            Some(p) => return Ok(NestedOutcome::MiddleDiverges { decay: p }),
            None => {
                return Err(CriteriaError::Precondition(
                    "innermost tail changes sign at the end of the grid".into(),
                ))
            }
        };
        let mut middle = vec![0.0; n];
        middle[n - 1] = m_end;
        for i in (0..n - 1).rev() {
            middle[i] = middle[i + 1] + segment_integral(grid[i], grid[i + 1], inner[i], inner[i + 1]);
        }
        Ok(NestedOutcome::Ready(NestedTail {
            grid,
            inner,
            middle,
            inner_decay: decay,
        }))
    }

    fn beyond(&self, ys: &[f64], x: f64, power: f64) -> f64 {
        let n = self.grid.len();
        let (xe, ye) = (self.grid[n - 1], ys[n - 1]);
        if ye == 0.0 {
            0.0
        } else {
            ye * (x / xe).powf(power)
        }
    }

    pub fn inner_at(&self, x: f64) -> f64 {
        if x > *self.grid.last().unwrap() {
            let p = self.inner_decay.unwrap_or(0.0);
            return self.beyond(&self.inner, x, -p);
        }
        interp(&self.grid, &self.inner, x)
    }

    pub fn middle_at(&self, x: f64) -> f64 {
        if x > *self.grid.last().unwrap() {
            let p = self.inner_decay.unwrap_or(0.0);
            return self.beyond(&self.middle, x, 1.0 - p);
        }
        interp(&self.grid, &self.middle, x)
    }
}

/// `∫ η^(α-1)/a(η) ∫_η^∞ ∫_μ^∞ s^(α-1) c(s) ds dμ dη = ∞` from the point
/// where `τ(σ(t)) >= T`.
///
/// When an inner integral already diverges the condition holds trivially;
/// the report says so in its notes.
pub fn check_lemma33(
    spec: &SystemSpec,
    horizons: &[f64],
    opts: &ProbeOptions,
) -> Result<CriterionReport, CriteriaError> {
    let alpha = spec.alpha.value();
    let t2 = spec.criteria_start()?;
    let hs = fit_horizons(t2, horizons);
    let e = Expr::var(Var::T).powf(alpha - 1.0) * spec.derived().c;
    let f = wide_in_t(&e);
    let first = probe_improper_with(&f, t2, &hs, opts);
    let mut notes = vec![format!("lower limit t2 = {t2}")];
    let mut inner = Condition::from_probe("innermost integral of s^(alpha-1) c(s)", first.clone());
    // the innermost integral is only a precondition: convergence is fine
    inner.verdict = match first.classification {
        Classification::Inconclusive => Verdict::Inconclusive,
        _ => Verdict::Satisfied,
    };
    if first.diverges_to_infinity() {
        notes.push("innermost integral diverges; the condition holds trivially".into());
        return Ok(CriterionReport::assemble(CriterionId::Lem33, vec![inner], notes));
    }
    if inner.verdict == Verdict::Inconclusive || first.classification == Classification::Diverges {
        return Ok(CriterionReport::assemble(CriterionId::Lem33, vec![inner], notes));
    }
    let last_h = first.partials.last().map_or(hs[hs.len() - 1], |p| p.0);
    let x_end = last_h.max(*hs.last().unwrap()) * 10.0;
    let tails = match NestedTail::build(spec, t2, x_end, opts)? {
        NestedOutcome::Ready(t) => t,
        NestedOutcome::MiddleDiverges { decay } => {
            notes.push(format!(
                "middle integral diverges (inner tail decays like mu^-{decay:.3}); the condition holds trivially"
            ));
            return Ok(CriterionReport::assemble(CriterionId::Lem33, vec![inner], notes));
        }
    };
    let weight = Expr::var(Var::T).powf(alpha - 1.0) * spec.p.clone();
    let outer_f = |eta: f64| -> Result<f64, crate::expr::ExprError> {
        Ok(weight.eval_wide_at(Var::T, eta)? * tails.middle_at(eta))
    };
    let outer = probe_improper_with(&outer_f, t2, &hs, opts);
    let outer = Condition::from_probe("nested integral", outer);
    Ok(CriterionReport::assemble(CriterionId::Lem33, vec![inner, outer], notes))
}
