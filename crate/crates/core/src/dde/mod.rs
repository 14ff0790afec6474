//! The three-dimensional delay system
//!
//! ```text
//! D^α u(t) =  p(t) g(v(σ(t)))
//! D^α v(t) = -q(t) h(w(t))
//! D^α w(t) =  r(t) f(u(τ(t)))
//! ```
//!
//! simulated by the method of steps after rewriting `D^α y = t^(1-α) y'`,
//! plus oscillation and sign-pattern diagnostics on the result.

mod classify;
mod residual;
mod solve;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, ExprError, Var};
use crate::fraccalc::Alpha;

pub use classify::{
    classify, classify_case, third_order_form, CaseClass, ComponentClass, ComponentVerdict,
    OscillationClass, SystemVerdict,
};
pub(crate) use classify::{scaled, sign_triple};
pub use residual::{residual, residual_series};
pub use solve::{solve, ClosedForm, StateFn, Trajectory};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum DdeError {
    #[error("invalid system: {0}")]
    InvalidSpec(String),
    #[error("at t = {t}: {source}")]
    Eval {
        t: f64,
        #[source]
        source: ExprError,
    },
    #[error("delayed argument {arg} at t = {t} lies below the history start {t1}")]
    BelowHistory { t: f64, arg: f64, t1: f64 },
    #[error("t = {t} is outside the covered range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub(crate) fn at(t: f64) -> impl Fn(ExprError) -> DdeError {
    move |source| DdeError::Eval { t, source }
}

/// Full description of the system and the constants of its assumptions.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
    pub alpha: Alpha,
    /// Coefficients in `t`.
    pub p: Expr,
    pub q: Expr,
    pub r: Expr,
    /// Nonlinearities in `u`, `v` and `w` respectively.
    pub f: Expr,
    pub g: Expr,
    pub h: Expr,
    /// Delays in `t`.
    pub sigma: Expr,
    pub tau: Expr,
    pub k: f64,
    pub l: f64,
    pub l_prime: f64,
    pub m_prime: f64,
    pub t0: f64,
    /// Anchor `T` of the weight `A_α`; defaults to `t0`.
    pub anchor: f64,
    /// During simulation the argument of `f` is clamped to `[-c, c]`.
    pub f_clamp: Option<f64>,
}

/// Builder input for [`SystemSpec::new`]: every function as text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecText {
    pub alpha: f64,
    pub p: String,
    pub q: String,
    pub r: String,
    pub f: String,
    pub g: String,
    pub h: String,
    pub sigma: String,
    pub tau: String,
    pub k: f64,
    pub l: f64,
    pub l_prime: f64,
    pub m_prime: f64,
    pub t0: f64,
    pub anchor: Option<f64>,
    pub f_clamp: Option<f64>,
}

fn parse_slot(name: &str, text: &str, var: Var) -> Result<Expr, DdeError> {
    Expr::parse(text, &[var]).map_err(|e| DdeError::InvalidSpec(format!("{name}: {e}")))
}

impl SystemSpec {
    pub fn from_text(s: &SpecText) -> Result<SystemSpec, DdeError> {
        let alpha = Alpha::new(s.alpha).map_err(|e| DdeError::InvalidSpec(e.to_string()))?;
        let spec = SystemSpec {
            alpha,
            p: parse_slot("p", &s.p, Var::T)?,
            q: parse_slot("q", &s.q, Var::T)?,
            r: parse_slot("r", &s.r, Var::T)?,
            f: parse_slot("f", &s.f, Var::U)?,
            g: parse_slot("g", &s.g, Var::V)?,
            h: parse_slot("h", &s.h, Var::W)?,
            sigma: parse_slot("sigma", &s.sigma, Var::T)?,
            tau: parse_slot("tau", &s.tau, Var::T)?,
            k: s.k,
            l: s.l,
            l_prime: s.l_prime,
            m_prime: s.m_prime,
            t0: s.t0,
            anchor: s.anchor.unwrap_or(s.t0),
            f_clamp: s.f_clamp,
        };
        spec.check_constants()?;
        Ok(spec)
    }

    /// Checks `k, l, l', m' > 0`, `t0 > 0` and the clamp value.
    pub fn check_constants(&self) -> Result<(), DdeError> {
        for (name, v) in [
            ("k", self.k),
            ("l", self.l),
            ("l_prime", self.l_prime),
            ("m_prime", self.m_prime),
            ("t0", self.t0),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DdeError::InvalidSpec(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.anchor.is_finite() {
            return Err(DdeError::InvalidSpec("anchor T must be finite".into()));
        }
        if let Some(c) = self.f_clamp {
            if !(c > 0.0) {
                return Err(DdeError::InvalidSpec(format!("clamp must be positive, got {c}")));
            }
        }
        Ok(())
    }

    pub fn derived(&self) -> DerivedCoeffs {
        DerivedCoeffs::new(self)
    }

    /// `τ(σ(t))` as an expression in `t`.
    pub fn tau_sigma(&self) -> Expr {
        self.tau.substitute(Var::T, &self.sigma)
    }

    /// Smallest `t >= t0` with `τ(σ(t)) >= T`, so that the factor
    /// `τ(σ(t)) - T` in `A_α` is nonnegative from there on (delays are
    /// nondecreasing).
    pub fn criteria_start(&self) -> Result<f64, DdeError> {
        let ts = self.tau_sigma();
        let reached = |t: f64| -> Result<bool, DdeError> {
            Ok(ts.eval_at(Var::T, t).map_err(at(t))? >= self.anchor)
        };
        if reached(self.t0)? {
            return Ok(self.t0);
        }
        let (mut lo, mut hi) = (self.t0, self.t0);
        let mut step = 0.1 * self.t0.max(1.0);
        while !reached(hi)? {
            lo = hi;
            hi += step;
            step *= 2.0;
            if hi > 1e12 * self.t0.max(1.0) {
                return Err(DdeError::Precondition(format!(
                    "τ(σ(t)) never reaches T = {}",
                    self.anchor
                )));
            }
        }
        while hi - lo > 1e-10 * hi {
            let mid = 0.5 * (lo + hi);
            if reached(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// `f(u)` as used during simulation (with the optional clamp); the flag
    /// reports whether the clamp changed the argument.
    pub(crate) fn f_sim(&self, u: f64) -> Result<(f64, bool), ExprError> {
        let (arg, clamped) = match self.f_clamp {
            Some(c) if u.abs() > c => (u.signum() * c, true),
            _ => (u, false),
        };
        Ok((self.f.eval_at(Var::U, arg)?, clamped))
    }

    /// Sampled checks of the positivity, delay and nonlinearity assumptions.
    ///
    /// Coefficients and delays are sampled at `samples` points of
    /// `[t0, t0 + span]`; `f(u)/u >= k` is checked on `u_grid` (zeros skipped).
    pub fn check_assumptions(&self, span: f64, samples: usize, u_grid: &[f64]) -> AssumptionReport {
        let mut violations = Vec::new();
        let n = samples.max(2);
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..n {
            let t = self.t0 + span * i as f64 / (n - 1) as f64;
            for (name, e) in [("p", &self.p), ("q", &self.q), ("r", &self.r)] {
                match e.eval_wide_at(Var::T, t) {
                    Ok(v) if v > 0.0 => {}
                    Ok(v) => violations.push(Violation::new("A1", format!("{name}({t}) = {v} is not positive"))),
                    Err(err) => violations.push(Violation::new("A1", format!("{name}({t}): {err}"))),
                }
            }
            let s = self.sigma.eval_at(Var::T, t);
            let ta = self.tau.eval_at(Var::T, t);
            match (s, ta) {
                (Ok(s), Ok(ta)) => {
                    if s > t {
                        violations.push(Violation::new("A3", format!("sigma({t}) = {s} exceeds t")));
                    }
                    if ta > t {
                        violations.push(Violation::new("A3", format!("tau({t}) = {ta} exceeds t")));
                    }
                    if let Some((ps, pt)) = prev {
                        if s < ps || ta < pt {
                            violations.push(Violation::new(
                                "A3",
                                format!("delays decrease before t = {t}"),
                            ));
                        }
                    }
                    prev = Some((s, ta));
                }
                (Err(e), _) | (_, Err(e)) => {
                    violations.push(Violation::new("A3", format!("delay at {t}: {e}")))
                }
            }
            if violations.len() > 20 {
                break;
            }
        }
        for &u in u_grid {
            if u == 0.0 {
                continue;
            }
            match self.f.eval_at(Var::U, u) {
                Ok(fu) if fu / u >= self.k => {}
                Ok(fu) => violations.push(Violation::new(
                    "A2",
                    format!("f({u})/{u} = {} is below k = {}", fu / u, self.k),
                )),
                Err(e) => violations.push(Violation::new("A2", format!("f({u}): {e}"))),
            }
        }
        AssumptionReport { violations }
    }

    /// Sampled `inf f(u)/u` over `n` points of `[lo, hi]`, zero excluded.
    pub fn estimate_k(&self, lo: f64, hi: f64, n: usize) -> Result<f64, DdeError> {
        let mut best = f64::INFINITY;
        for i in 0..n.max(2) {
            let u = lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64;
            if u == 0.0 {
                continue;
            }
            let fu = self.f.eval_at(Var::U, u).map_err(|source| DdeError::Eval { t: u, source })?;
            best = best.min(fu / u);
        }
        Ok(best)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub assumption: String,
    pub message: String,
}

impl Violation {
    fn new(assumption: &str, message: String) -> Self {
        Violation {
            assumption: assumption.into(),
            message,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub violations: Vec<Violation>,
}

impl AssumptionReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, assumption: &str) -> bool {
        self.violations.iter().any(|v| v.assumption == assumption)
    }
}

/// `a = 1/p`, `b = 1/q`, `c = l² l' m' r` and the weight
/// `A_α(t) = (k/2) (c/a) ((τ(σ(t)) - T)/t) τ(σ(t))^α`, all in `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivedCoeffs {
    pub a: Expr,
    pub b: Expr,
    pub c: Expr,
    pub a_alpha: Expr,
}

impl DerivedCoeffs {
    pub fn new(spec: &SystemSpec) -> Self {
        let t = Expr::var(Var::T);
        let a = 1.0 / spec.p.clone();
        let b = 1.0 / spec.q.clone();
        let c = (spec.l * spec.l * spec.l_prime * spec.m_prime) * spec.r.clone();
        let ts = spec.tau_sigma();
        let a_alpha = (spec.k / 2.0) * (c.clone() * spec.p.clone())
            * ((ts.clone() - spec.anchor) / t)
            * ts.powf(spec.alpha.value());
        DerivedCoeffs { a, b, c, a_alpha }
    }
}

/// Initial functions `(u0, v0, w0)` of `t` on `[t1, t0]`.
#[derive(Clone, Debug, PartialEq)]
pub struct History {
    pub u0: Expr,
    pub v0: Expr,
    pub w0: Expr,
    pub t1: f64,
}

impl History {
    pub fn new(u0: Expr, v0: Expr, w0: Expr, t1: f64) -> Self {
        History { u0, v0, w0, t1 }
    }

    pub fn parse(u0: &str, v0: &str, w0: &str, t1: f64) -> Result<History, DdeError> {
        Ok(History {
            u0: parse_slot("u0", u0, Var::T)?,
            v0: parse_slot("v0", v0, Var::T)?,
            w0: parse_slot("w0", w0, Var::T)?,
            t1,
        })
    }

    pub fn components(&self) -> [&Expr; 3] {
        [&self.u0, &self.v0, &self.w0]
    }

    pub fn eval(&self, t: f64) -> Result<[f64; 3], DdeError> {
        let e = |x: &Expr| x.eval_at(Var::T, t).map_err(at(t));
        Ok([e(&self.u0)?, e(&self.v0)?, e(&self.w0)?])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn text(p: &str, q: &str, r: &str) -> SpecText {
        SpecText {
            alpha: 0.5,
            p: p.into(),
            q: q.into(),
            r: r.into(),
            f: "u".into(),
            g: "v".into(),
            h: "w".into(),
            sigma: "t/2".into(),
            tau: "t/2".into(),
            k: 1.0,
            l: 0.5,
            l_prime: 2.0,
            m_prime: 3.0,
            t0: 10.0,
            anchor: None,
            f_clamp: None,
        }
    }

    #[test]
    fn derived_coefficients_pointwise() {
        let spec = SystemSpec::from_text(&text("1/sqrt(t)", "t", "2+cos(t)")).unwrap();
        let d = spec.derived();
        for t in [10.0f64, 37.5, 400.0] {
            let p = 1.0 / t.sqrt();
            let r = 2.0 + t.cos();
            let a = d.a.eval_at(Var::T, t).unwrap();
            let c = d.c.eval_at(Var::T, t).unwrap();
            assert!((a - 1.0 / p).abs() <= 1e-12 * a);
            assert!((d.b.eval_at(Var::T, t).unwrap() - 1.0 / t).abs() <= 1e-12 / t);
            let want_c = 0.25 * 2.0 * 3.0 * r;
            assert!((c - want_c).abs() <= 1e-12 * want_c);
            let ts = t / 4.0;
            let want = 0.5 * (want_c / a) * ((ts - 10.0) / t) * ts.sqrt();
            let got = d.a_alpha.eval_at(Var::T, t).unwrap();
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1e-300));
        }
    }

    #[test]
    fn slots_reject_foreign_variables() {
        assert!(SystemSpec::from_text(&text("u*t", "1", "1")).is_err());
        let mut bad = text("1", "1", "1");
        bad.k = 0.0;
        assert!(SystemSpec::from_text(&bad).is_err());
        let mut bad = text("1", "1", "1");
        bad.alpha = 1.5;
        assert!(SystemSpec::from_text(&bad).is_err());
    }

    #[test]
    fn assumption_sampling() {
        let spec = SystemSpec::from_text(&text("1", "1", "1")).unwrap();
        assert!(spec.check_assumptions(50.0, 100, &[-1.0, 0.0, 0.5]).ok());
        let mut t = text("1", "1", "1");
        t.sigma = "t+1".into();
        let spec = SystemSpec::from_text(&t).unwrap();
        assert!(spec.check_assumptions(50.0, 100, &[]).violates("A3"));
        let mut t = text("1", "1", "cos(t)");
        t.f = "u/2".into();
        let spec = SystemSpec::from_text(&t).unwrap();
        let rep = spec.check_assumptions(50.0, 100, &[1.0]);
        assert!(rep.violates("A1") && rep.violates("A2"));
        assert_eq!(spec.estimate_k(-1.0, 1.0, 11).unwrap(), 0.5);
    }

    #[test]
    fn criteria_start_is_where_the_anchor_is_reached() {
        let spec = SystemSpec::from_text(&text("1", "1", "1")).unwrap();
        let s = spec.criteria_start().unwrap();
        assert!((s - 40.0).abs() < 1e-8, "{s}");
    }
}
