use serde::{Deserialize, Serialize};

use super::{at, DdeError, StateFn, SystemSpec};
use crate::expr::{Expr, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComponentVerdict {
    Oscillatory,
    NonoscillatoryPositive,
    NonoscillatoryNegative,
    Undetermined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SystemVerdict {
    Oscillatory,
    Nonoscillatory,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentClass {
    pub crossings: Vec<f64>,
    /// Length of the final sign-constant stretch of the window.
    pub terminal_segment: f64,
    pub verdict: ComponentVerdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationClass {
    pub window: (f64, f64),
    pub samples: usize,
    pub components: [ComponentClass; 3],
    pub verdict: SystemVerdict,
    /// Two crossings of one component fell within two sample spacings, so
    /// pairs of crossings may have been missed.
    pub low_density: bool,
    /// The window was cut back to the range the trajectory covers.
    pub clipped: bool,
}

const SAMPLES: usize = 1000;

fn bisect(
    traj: &dyn StateFn,
    comp: usize,
    mut lo: f64,
    mut hi: f64,
    lo_sign: f64,
) -> Result<f64, DdeError> {
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        let v = traj.state(mid)?[comp];
        if v == 0.0 {
            return Ok(mid);
        }
        if v.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Sign changes of each component on `window`, located by dense sampling
/// and bisection to `1e-10`.
///
/// A component is oscillatory when it changes sign at least
/// `min_crossings` times and its last sign-constant stretch is at most half
/// the window; the system is oscillatory when every component is.
pub fn classify(
    traj: &dyn StateFn,
    window: (f64, f64),
    min_crossings: usize,
) -> Result<OscillationClass, DdeError> {
    let (dlo, dhi) = traj.domain();
    let lo = window.0.max(dlo);
    let hi = window.1.min(dhi);
    let clipped = lo > window.0 || hi < window.1;
    if !(hi > lo) {
        return Err(DdeError::OutOfRange {
            t: window.0,
            lo: dlo,
            hi: dhi,
        });
    }
    let n = SAMPLES;
    let spacing = (hi - lo) / (n - 1) as f64;
    let times: Vec<f64> = (0..n).map(|i| if i + 1 == n { hi } else { lo + spacing * i as f64 }).collect();
    let mut values = Vec::with_capacity(n);
    for &t in &times {
        values.push(traj.state(t)?);
    }
    let mut low_density = false;
    let mut comps = Vec::with_capacity(3);
    for c in 0..3 {
        let mut crossings = Vec::new();
        let mut last: Option<(f64, f64)> = None;
        for (t, y) in times.iter().zip(&values) {
            let v = y[c];
            if v == 0.0 {
                continue;
            }
            if let Some((tp, sp)) = last {
                if v.signum() != sp {
                    crossings.push(bisect(traj, c, tp, *t, sp)?);
                }
            }
            last = Some((*t, v.signum()));
        }
        if crossings.windows(2).any(|w| w[1] - w[0] < 2.0 * spacing) {
            low_density = true;
        }
        let since = crossings.last().copied().unwrap_or(lo);
        let terminal_segment = hi - since;
        let verdict = match last {
            None => ComponentVerdict::Undetermined,
            Some(_) if crossings.len() >= min_crossings && terminal_segment <= 0.5 * (hi - lo) => {
                ComponentVerdict::Oscillatory
            }
            Some((_, s)) if terminal_segment > 0.5 * (hi - lo) => {
                if s > 0.0 {
                    ComponentVerdict::NonoscillatoryPositive
                } else {
                    ComponentVerdict::NonoscillatoryNegative
                }
            }
            Some(_) => ComponentVerdict::Undetermined,
        };
        comps.push(ComponentClass {
            crossings,
            terminal_segment,
            verdict,
        });
    }
    let verdicts: Vec<ComponentVerdict> = comps.iter().map(|c| c.verdict).collect();
    let verdict = if verdicts.iter().all(|v| *v == ComponentVerdict::Oscillatory) {
        SystemVerdict::Oscillatory
    } else if verdicts.iter().any(|v| {
        matches!(
            v,
            ComponentVerdict::NonoscillatoryPositive | ComponentVerdict::NonoscillatoryNegative
        )
    }) {
        SystemVerdict::Nonoscillatory
    } else {
        SystemVerdict::Undetermined
    };
    let components: [ComponentClass; 3] = comps.try_into().expect("three components");
    Ok(OscillationClass {
        window: (lo, hi),
        samples: n,
        components,
        verdict,
        low_density,
        clipped,
    })
}

/// Sign pattern of `(u, D^α u, D^α(a D^α u))` on a window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CaseClass {
    /// `u > 0`, `D^α u > 0`, `D^α(a D^α u) > 0`.
    CaseI,
    /// `u > 0`, `D^α u < 0`, `D^α(a D^α u) > 0`.
    CaseII,
    Mixed { first_violation: f64 },
}

/// `t^(1-α) a(t)` and its first two derivatives, as expressions.
pub(crate) fn scaled(coef: &Expr, alpha: f64) -> [Expr; 3] {
    let e = coef.clone() * Expr::var(Var::T).powf(1.0 - alpha);
    let d1 = e.diff(Var::T);
    let d2 = d1.diff(Var::T);
    [e, d1, d2]
}

fn wide(e: &Expr, t: f64) -> Result<f64, DdeError> {
    e.eval_wide_at(Var::T, t).map_err(at(t))
}

fn grid(window: (f64, f64), n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| window.0 + (window.1 - window.0) * i as f64 / (n - 1) as f64)
        .collect()
}

/// `(u, D^α u, D^α(a D^α u))` at `t`.
pub(crate) fn sign_triple(
    traj: &dyn StateFn,
    a_scaled: &[Expr; 3],
    alpha: f64,
    t: f64,
) -> Result<[f64; 3], DdeError> {
    let j = traj.jet(0, t)?;
    let s = t.powf(1.0 - alpha);
    let a0 = wide(&a_scaled[0], t)?;
    let a1 = wide(&a_scaled[1], t)?;
    Ok([j[0], s * j[1], s * (a1 * j[1] + a0 * j[2])])
}

/// Which case of the positive-solution trichotomy a trajectory follows on
/// `window` (1000 sample points).
pub fn classify_case(
    traj: &dyn StateFn,
    spec: &SystemSpec,
    window: (f64, f64),
) -> Result<CaseClass, DdeError> {
    let alpha = spec.alpha.value();
    let a_scaled = scaled(&spec.derived().a, alpha);
    let mut triples = Vec::with_capacity(SAMPLES);
    for t in grid(window, SAMPLES) {
        let tr = sign_triple(traj, &a_scaled, alpha, t)?;
        if !(tr[0] > 0.0) {
            return Err(DdeError::Precondition(format!("u({t}) = {} is not positive", tr[0])));
        }
        triples.push((t, tr));
    }
    let mut candidate: Option<CaseClass> = None;
    for (t, [_, du, daa]) in triples {
        let here = if du > 0.0 && daa > 0.0 {
            CaseClass::CaseI
        } else if du < 0.0 && daa > 0.0 {
            CaseClass::CaseII
        } else {
            return Ok(CaseClass::Mixed { first_violation: t });
        };
        match candidate {
            None => candidate = Some(here),
            Some(c) if c != here => return Ok(CaseClass::Mixed { first_violation: t }),
            Some(_) => {}
        }
    }
    Ok(candidate.expect("non-empty grid"))
}

/// `D^α(b D^α(a D^α u))(t) + c(t) f(u(τ(σ(t))))` along the trajectory.
pub fn third_order_form(
    traj: &dyn StateFn,
    spec: &SystemSpec,
    grid: &[f64],
) -> Result<Vec<f64>, DdeError> {
    let alpha = spec.alpha.value();
    let d = spec.derived();
    let aa = scaled(&d.a, alpha);
    let bb = scaled(&d.b, alpha);
    let ts = spec.tau_sigma();
    grid.iter()
        .map(|&t| {
            let j = traj.jet(0, t)?;
            let (a0, a1, a2) = (wide(&aa[0], t)?, wide(&aa[1], t)?, wide(&aa[2], t)?);
            let (b0, b1) = (wide(&bb[0], t)?, wide(&bb[1], t)?);
            // X = t^(1-α) a u'
            let x1 = a1 * j[1] + a0 * j[2];
            let x2 = a2 * j[1] + 2.0 * a1 * j[2] + a0 * j[3];
            // Y = t^(1-α) b X'
            let y1 = b1 * x1 + b0 * x2;
            let arg = ts.eval_at(Var::T, t).map_err(at(t))?;
            let u_del = traj.state(arg)?[0];
            let (f, _) = spec.f_sim(u_del).map_err(at(t))?;
            Ok(t.powf(1.0 - alpha) * y1 + wide(&d.c, t)? * f)
        })
        .collect()
}
