//! α-fractional derivative and integral.
//!
//! For a differentiable `f` the derivative is computed through
//! `D^α f(t) = t^(1-α) f'(t)`; the limit definition
//! `lim_{ε→0} (f(t e^(ε t^-α)) - f(t)) / ε` is available separately as a
//! cross-check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Executor;
use crate::expr::{Expr, ExprError, Var};
use crate::quad::{integrate_with, neville_at_zero, QuadError, Tolerance};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum FracError {
    #[error("order must lie in (0, 1], got {0}")]
    Alpha(f64),
    #[error("fractional derivative needs t > 0, got {0}")]
    NonPositiveTime(f64),
    #[error("need 0 <= a <= t, got a = {a}, t = {t}")]
    Interval { a: f64, t: f64 },
    #[error("epsilon sequence must be positive and strictly decreasing")]
    EpsSequence,
    #[error("limit quotients do not settle: estimates {estimates:?}")]
    Inconclusive { estimates: Vec<f64> },
    #[error(transparent)]
    Eval(#[from] ExprError),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

/// Order of differentiation, `0 < α ≤ 1`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Alpha, FracError> {
        if value > 0.0 && value <= 1.0 {
            Ok(Alpha(value))
        } else {
            Err(FracError::Alpha(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Alpha {
    type Error = FracError;
    fn try_from(v: f64) -> Result<Self, FracError> {
        Alpha::new(v)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> f64 {
        a.0
    }
}

/// A real function of one real variable on `[lower_bound, ∞)`.
pub trait ScalarFunction: Sync {
    fn eval(&self, t: f64) -> Result<f64, ExprError>;

    /// Exact first derivative, when one is known.
    fn derivative(&self, _t: f64) -> Option<Result<f64, ExprError>> {
        None
    }

    fn lower_bound(&self) -> f64 {
        0.0
    }
}

/// An [`Expr`] in one variable together with its symbolic derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct ExprFunction {
    expr: Expr,
    deriv: Expr,
    var: Var,
}

impl ExprFunction {
    pub fn new(expr: Expr, var: Var) -> Self {
        let deriv = expr.diff(var);
        ExprFunction { expr, deriv, var }
    }

    /// Function of `t`.
    pub fn of_t(expr: Expr) -> Self {
        ExprFunction::new(expr, Var::T)
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }
}

impl ScalarFunction for ExprFunction {
    fn eval(&self, t: f64) -> Result<f64, ExprError> {
        self.expr.eval_at(self.var, t)
    }

    fn derivative(&self, t: f64) -> Option<Result<f64, ExprError>> {
        Some(self.deriv.eval_at(self.var, t))
    }
}

/// Wraps a closure; derivatives fall back to finite differences.
pub struct FnScalar<F>(pub F);

impl<F> ScalarFunction for FnScalar<F>
where
    F: Fn(f64) -> Result<f64, ExprError> + Sync,
{
    fn eval(&self, t: f64) -> Result<f64, ExprError> {
        (self.0)(t)
    }
}

/// Central difference with step `max(1e-6, 1e-8 t)`.
pub fn central_difference(f: &dyn ScalarFunction, t: f64) -> Result<f64, ExprError> {
    let h = (1e-8 * t).max(1e-6);
    Ok((f.eval(t + h)? - f.eval(t - h)?) / (2.0 * h))
}

/// `D^α f(t) = t^(1-α) f'(t)`.
pub fn frac_deriv(f: &dyn ScalarFunction, t: f64, alpha: Alpha) -> Result<f64, FracError> {
    if !(t > 0.0) {
        return Err(FracError::NonPositiveTime(t));
    }
    let df = match f.derivative(t) {
        Some(d) => d?,
        None => central_difference(f, t)?,
    };
    Ok(t.powf(1.0 - alpha.value()) * df)
}

/// Six halvings starting where the argument shift `t(e^(ε t^-α) - 1)` is
/// about `1e-2`.
pub fn default_eps_sequence(t: f64, alpha: Alpha) -> Vec<f64> {
    let start = 1e-2 / t.powf(1.0 - alpha.value()).max(1.0);
    (0..6).map(|k| start * 0.5f64.powi(k)).collect()
}

/// Limit-definition derivative, extrapolated to `ε = 0` over `eps_sequence`.
///
/// Fails with [`FracError::Inconclusive`] unless the last two extrapolants
/// agree within `1e-3` (relative).
pub fn frac_deriv_limit(
    f: &dyn ScalarFunction,
    t: f64,
    alpha: Alpha,
    eps_sequence: &[f64],
) -> Result<f64, FracError> {
    if !(t > 0.0) {
        return Err(FracError::NonPositiveTime(t));
    }
    let decreasing = eps_sequence.windows(2).all(|w| w[1] < w[0]);
    if eps_sequence.len() < 2 || !decreasing || eps_sequence.iter().any(|e| !(*e > 0.0)) {
        return Err(FracError::EpsSequence);
    }
    let ft = f.eval(t)?;
    let scale = t.powf(-alpha.value());
    let mut quotients = Vec::with_capacity(eps_sequence.len());
    for &eps in eps_sequence {
        let shifted = f.eval(t * (eps * scale).exp())?;
        quotients.push((shifted - ft) / eps);
    }
    let est = neville_at_zero(eps_sequence, &quotients);
    let best = est[est.len() - 1];
    let prev = est[est.len() - 2];
    let eps_min = eps_sequence[eps_sequence.len() - 1];
    let noise = 100.0 * f64::EPSILON * ft.abs() / eps_min;
    if !best.is_finite() || (best - prev).abs() > 1e-3 * best.abs() + noise {
        return Err(FracError::Inconclusive { estimates: est });
    }
    Ok(best)
}

/// `I^α_a f(t) = ∫_a^t f(x) x^(α-1) dx`, to abs/rel `1e-10`/`1e-8`.
pub fn frac_integral(
    f: &dyn ScalarFunction,
    a: f64,
    t: f64,
    alpha: Alpha,
) -> Result<f64, FracError> {
    if !(0.0 <= a && a <= t) {
        return Err(FracError::Interval { a, t });
    }
    let p = alpha.value() - 1.0;
    let integrand = |x: f64| Ok(f.eval(x)? * x.powf(p));
    Ok(integrate_with(&integrand, a, t, Tolerance::new(1e-10, 1e-8))?.value)
}

/// Outcome of one algebraic property over the sampled cases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    pub cases: usize,
    /// Largest error, relative to the magnitude of the terms compared.
    #[serde(with = "crate::serde_f64")]
    pub max_rel_error: f64,
    pub worst_case: Option<String>,
    /// Cases where an evaluation failed outright.
    pub failures: Vec<String>,
}

impl PropertyResult {
    pub fn holds(&self, tol: f64) -> bool {
        self.failures.is_empty() && self.max_rel_error <= tol
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub alpha: f64,
    pub seed: u64,
    pub properties: Vec<PropertyResult>,
}

impl PropertyReport {
    pub fn all_hold(&self, tol: f64) -> bool {
        self.properties.iter().all(|p| p.holds(tol))
    }

    pub fn get(&self, name: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.name == name)
    }
}

/// Test function with a hand-written derivative used as the oracle.
struct Sample {
    expr: Expr,
    f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    df: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

#[derive(Clone, Copy, PartialEq)]
enum Pool {
    Any,
    Nonvanishing,
    Entire,
}

fn t() -> Expr {
    Expr::var(Var::T)
}

fn sample(rng: &mut ChaCha8Rng, pool: Pool) -> Sample {
    let kinds: &[u8] = match pool {
        Pool::Any => &[0, 1, 2, 3, 4, 5, 6],
        Pool::Nonvanishing => &[0, 3, 5, 6],
        Pool::Entire => &[1, 2, 5],
    };
    let kind = kinds[rng.gen_range(0..kinds.len())];
    match kind {
        0 => {
            let n: f64 = (rng.gen_range(-3.0..3.0) * 100.0f64).round() / 100.0;
            Sample {
                expr: t().powf(n),
                f: Box::new(move |x| x.powf(n)),
                df: Box::new(move |x| n * x.powf(n - 1.0)),
            }
        }
        1 | 2 => {
            let c: f64 = rng.gen_range(0.1..2.0);
            let d: f64 = rng.gen_range(-1.0..1.0);
            let arg = c * t() + d;
            if kind == 1 {
                Sample {
                    expr: Expr::call(crate::expr::Func::Sin, arg),
                    f: Box::new(move |x| (c * x + d).sin()),
                    df: Box::new(move |x| c * (c * x + d).cos()),
                }
            } else {
                Sample {
                    expr: Expr::call(crate::expr::Func::Cos, arg),
                    f: Box::new(move |x| (c * x + d).cos()),
                    df: Box::new(move |x| -c * (c * x + d).sin()),
                }
            }
        }
        3 => {
            let c: f64 = rng.gen_range(-0.3..0.3);
            Sample {
                expr: Expr::call(crate::expr::Func::Exp, c * t()),
                f: Box::new(move |x| (c * x).exp()),
                df: Box::new(move |x| c * (c * x).exp()),
            }
        }
        4 => {
            let c: f64 = rng.gen_range(0.5..3.0);
            Sample {
                expr: c * Expr::call(crate::expr::Func::Ln, t()),
                f: Box::new(move |x| c * x.ln()),
                df: Box::new(move |x| c / x),
            }
        }
        5 => {
            let (a, b, c): (f64, f64, f64) = (
                rng.gen_range(0.1..2.0),
                rng.gen_range(0.0..2.0),
                rng.gen_range(0.1..3.0),
            );
            Sample {
                expr: a * t().powf(2.0) + b * t() + c,
                f: Box::new(move |x| a * x * x + b * x + c),
                df: Box::new(move |x| 2.0 * a * x + b),
            }
        }
        _ => {
            let c: f64 = rng.gen_range(0.0..2.0);
            Sample {
                expr: Expr::call(crate::expr::Func::Sqrt, t() + c),
                f: Box::new(move |x| (x + c).sqrt()),
                df: Box::new(move |x| 0.5 / (x + c).sqrt()),
            }
        }
    }
}

struct Case {
    t: f64,
    f: Sample,
    g: Sample,
    outer: Sample,
    n: f64,
    constant: f64,
}

const PROPERTIES: [&str; 8] = [
    "p1 power rule",
    "p2 constants",
    "p3 product rule",
    "p4 quotient rule",
    "p5 chain rule",
    "p6 rescaling vs limit definition",
    "classical derivative at alpha = 1",
    "linearity",
];

fn rel(lhs: f64, rhs: f64, magnitude: f64) -> f64 {
    let diff = (lhs - rhs).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / magnitude.max(f64::MIN_POSITIVE)
    }
}

/// Errors of every property for one case; `None` marks "not applicable".
fn run_case(case: &Case, alpha: Alpha) -> Vec<Option<Result<f64, String>>> {
    let a = alpha.value();
    let t = case.t;
    let d = |e: &Expr| frac_deriv(&ExprFunction::of_t(e.clone()), t, alpha).map_err(|e| e.to_string());
    let scale = t.powf(1.0 - a);
    let mut out = Vec::with_capacity(PROPERTIES.len());

    // p1: D^α t^n = n t^(n-α)
    out.push(Some(d(&t_pow(case.n)).map(|lhs| {
        let rhs = case.n * t.powf(case.n - a);
        rel(lhs, rhs, lhs.abs().max(rhs.abs()))
    })));
    // p2: exact zero for constants
    out.push(Some(d(&Expr::num(case.constant)).map(f64::abs)));
    let (f, g) = (&case.f, &case.g);
    let (fv, gv) = ((f.f)(t), (g.f)(t));
    // p3
    out.push(Some((|| {
        let lhs = d(&(f.expr.clone() * g.expr.clone()))?;
        let (df, dg) = (d(&f.expr)?, d(&g.expr)?);
        let rhs = fv * dg + gv * df;
        Ok(rel(lhs, rhs, lhs.abs() + (fv * dg).abs() + (gv * df).abs()))
    })()));
    // p4 (g from the nonvanishing pool)
    out.push(Some((|| {
        let lhs = d(&(f.expr.clone() / g.expr.clone()))?;
        let (df, dg) = (d(&f.expr)?, d(&g.expr)?);
        let rhs = (gv * df - fv * dg) / (gv * gv);
        let mag = lhs.abs() + ((gv * df).abs() + (fv * dg).abs()) / (gv * gv);
        Ok(rel(lhs, rhs, mag))
    })()));
    // p5: D^α (h∘g)(t) = h'(g(t)) D^α g(t)
    out.push(Some((|| {
        let composed = case.outer.expr.substitute(Var::T, &g.expr);
        let lhs = d(&composed)?;
        let rhs = (case.outer.df)(gv) * scale * (g.df)(t);
        Ok(rel(lhs, rhs, lhs.abs().max(rhs.abs())))
    })()));
    // p6: limit definition against t^(1-α) f'
    out.push(Some((|| {
        let func = ExprFunction::of_t(f.expr.clone());
        let lhs = frac_deriv_limit(&func, t, alpha, &default_eps_sequence(t, alpha))
            .map_err(|e| e.to_string())?;
        let rhs = scale * (f.df)(t);
        // the quotient carries roundoff of order eps |f| / ε_min
        let floor = 1e-9 * fv.abs();
        Ok(rel(lhs, rhs, lhs.abs().max(rhs.abs()).max(floor)))
    })()));
    // classical derivative (only meaningful at α = 1): absolute error
    out.push(if a == 1.0 {
        Some(d(&f.expr).map(|lhs| (lhs - (f.df)(t)).abs() / (f.df)(t).abs().max(1.0)))
    } else {
        None
    });
    // linearity with fixed weights
    out.push(Some((|| {
        let (wa, wb) = (1.7, -0.6);
        let lhs = d(&(wa * f.expr.clone() + wb * g.expr.clone()))?;
        let (df, dg) = (d(&f.expr)?, d(&g.expr)?);
        let rhs = wa * df + wb * dg;
        Ok(rel(lhs, rhs, (wa * df).abs() + (wb * dg).abs()))
    })()));
    out
}

fn t_pow(n: f64) -> Expr {
    t().powf(n)
}

/// Checks p1–p6 (plus the `α = 1` and linearity invariants) on random
/// function pairs at each sample time, with a fixed seed.
pub fn check_properties(alpha: Alpha, samples: &[f64]) -> PropertyReport {
    check_properties_with(alpha, samples, 0x5eed, Executor::default())
}

pub fn check_properties_with(
    alpha: Alpha,
    samples: &[f64],
    seed: u64,
    exec: Executor,
) -> PropertyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<Case> = samples
        .iter()
        .map(|&t| Case {
            t,
            f: sample(&mut rng, Pool::Any),
            g: sample(&mut rng, Pool::Nonvanishing),
            outer: sample(&mut rng, Pool::Entire),
            n: (rng.gen_range(-3.0..3.0) * 100.0f64).round() / 100.0,
            constant: rng.gen_range(-10.0..10.0),
        })
        .collect();
    let results = exec.map(&cases, |c| run_case(c, alpha));
    let mut properties: Vec<PropertyResult> = PROPERTIES
        .iter()
        .map(|name| PropertyResult {
            name: name.to_string(),
            cases: 0,
            max_rel_error: 0.0,
            worst_case: None,
            failures: Vec::new(),
        })
        .collect();
    for (case, errs) in cases.iter().zip(results) {
        for (prop, err) in properties.iter_mut().zip(errs) {
            let Some(err) = err else { continue };
            prop.cases += 1;
            let label = format!("t = {}, f = {}, g = {}", case.t, case.f.expr, case.g.expr);
            match err {
                Ok(e) if e.is_nan() => prop.failures.push(format!("{label}: NaN")),
                Ok(e) => {
                    if e > prop.max_rel_error {
                        prop.max_rel_error = e;
                        prop.worst_case = Some(label);
                    }
                }
                Err(why) => prop.failures.push(format!("{label}: {why}")),
            }
        }
    }
    PropertyReport {
        alpha: alpha.value(),
        seed,
        properties,
    }
}
