use serde::{Deserialize, Serialize};

use super::{integrate_with, ls_slope, QuadError, Tolerance};
use crate::exec::Executor;
use crate::expr::ExprError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Diverges,
    Converges,
    Inconclusive,
}

/// How a divergent integral grows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Growth {
    /// Increments between geometric horizons scale like `H^beta`.
    Power { beta: f64 },
    /// Increments are flat or decay slower than `H^-beta_min`.
    Logarithmic { beta: f64 },
    /// Partial values left the `f64` range while increasing.
    Overflow,
}

/// Verdict on `∫_a^∞ f` with the evidence behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceVerdict {
    pub classification: Classification,
    /// `(H, ∫_a^H f)` for every horizon evaluated.
    #[serde(with = "crate::serde_f64::pairs")]
    pub partials: Vec<(f64, f64)>,
    /// Least-squares slope of `ln |increment|` against `ln H` over the last
    /// three increments, when defined.
    #[serde(with = "crate::serde_f64::option")]
    pub beta: Option<f64>,
    pub growth: Option<Growth>,
    /// Set when the partial values run off to `-∞` rather than `+∞`.
    pub negative: bool,
    #[serde(with = "crate::serde_f64::option")]
    pub limit: Option<f64>,
    pub diagnostic: Option<String>,
}

impl DivergenceVerdict {
    /// True for divergence to `+∞`, the only reading of "`= ∞`".
    pub fn diverges_to_infinity(&self) -> bool {
        self.classification == Classification::Diverges && !self.negative
    }

    fn inconclusive(partials: Vec<(f64, f64)>, beta: Option<f64>, why: String) -> Self {
        DivergenceVerdict {
            classification: Classification::Inconclusive,
            partials,
            beta,
            growth: None,
            negative: false,
            limit: None,
            diagnostic: Some(why),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeOptions {
    pub beta_min: f64,
    /// Relative Cauchy tolerance on the last three partial values.
    pub cauchy_rel: f64,
    pub cauchy_abs: f64,
    /// Extra horizons appended (one ratio step each) while undecided.
    pub max_extensions: usize,
    pub tol: Tolerance,
    pub exec: Executor,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            beta_min: 0.05,
            cauchy_rel: 1e-4,
            cauchy_abs: 1e-12,
            max_extensions: 12,
            tol: Tolerance::new(1e-14, 1e-9),
            exec: Executor::default(),
        }
    }
}

/// `a * {10, 10², 10³, 10⁴}` (with `a` floored at 1).
pub fn default_horizons(a: f64) -> Vec<f64> {
    let base = a.max(1.0);
    (1..=4).map(|k| base * 10f64.powi(k)).collect()
}

pub fn probe_improper<F>(f: &F, a: f64, horizons: &[f64], beta_min: f64) -> DivergenceVerdict
where
    F: Fn(f64) -> Result<f64, ExprError> + Sync + ?Sized,
{
    let opts = ProbeOptions {
        beta_min,
        ..ProbeOptions::default()
    };
    probe_improper_with(f, a, horizons, &opts)
}

enum Step {
    Value(f64),
    Overflow(f64),
    Failed(String),
}

fn increment<F>(f: &F, lo: f64, hi: f64, tol: Tolerance) -> Step
where
    F: Fn(f64) -> Result<f64, ExprError> + ?Sized,
{
    match integrate_with(f, lo, hi, tol) {
        Ok(e) if e.value.is_finite() => Step::Value(e.value),
        Ok(e) => Step::Overflow(e.value),
        Err(QuadError::NonFinite { value, .. }) if value.is_infinite() => Step::Overflow(value),
        Err(err) => Step::Failed(format!("on [{lo}, {hi}]: {err}")),
    }
}

/// Probes `∫_a^∞ f` on geometric horizons and classifies it.
///
/// Partial values are built from increments between successive horizons,
/// which are integrated independently (concurrently under a parallel
/// executor). Undecided probes are extended by the last horizon ratio up
/// to `max_extensions` times.
pub fn probe_improper_with<F>(
    f: &F,
    a: f64,
    horizons: &[f64],
    opts: &ProbeOptions,
) -> DivergenceVerdict
where
    F: Fn(f64) -> Result<f64, ExprError> + Sync + ?Sized,
{
    let increasing = horizons.windows(2).all(|w| w[1] > w[0]);
    if horizons.len() < 4 || !increasing || horizons[0] <= a {
        return DivergenceVerdict::inconclusive(
            Vec::new(),
            None,
            "horizons must be strictly increasing, above the lower limit, and at least 4".into(),
        );
    }
    let mut hs: Vec<f64> = horizons.to_vec();
    let mut partials: Vec<(f64, f64)> = Vec::new();
    let mut incs: Vec<f64> = Vec::new();
    let mut running = 0.0;
    let mut computed = 0;
    let ratio = hs[hs.len() - 1] / hs[hs.len() - 2];
    let mut extensions = 0;
    loop {
        let pending: Vec<(f64, f64)> = (computed..hs.len())
            .map(|i| (if i == 0 { a } else { hs[i - 1] }, hs[i]))
            .collect();
        let steps = opts
            .exec
            .map(&pending, |&(lo, hi)| increment(f, lo, hi, opts.tol));
        for (step, &(_, hi)) in steps.into_iter().zip(&pending) {
            match step {
                Step::Value(d) => {
                    running += d;
                    if computed > 0 {
                        incs.push(d);
                    }
                    partials.push((hi, running));
                    computed += 1;
                }
                Step::Overflow(v) => {
                    partials.push((hi, v));
                    let rising = incs.iter().rev().take(2).all(|d| d * v > 0.0);
                    if rising {
                        return DivergenceVerdict {
                            classification: Classification::Diverges,
                            partials,
                            beta: None,
                            growth: Some(Growth::Overflow),
                            negative: v < 0.0,
                            limit: None,
                            diagnostic: Some(format!("partial value overflowed at H = {hi}")),
                        };
                    }
                    return DivergenceVerdict::inconclusive(
                        partials,
                        None,
                        format!("partial value overflowed at H = {hi} without monotone growth"),
                    );
                }
                Step::Failed(why) => {
                    return DivergenceVerdict::inconclusive(partials, None, why);
                }
            }
        }
        if let Some(v) = decide(&partials, &incs, opts) {
            return v;
        }
        if extensions >= opts.max_extensions {
            let beta = slope(&partials, &incs);
            return DivergenceVerdict::inconclusive(
                partials,
                beta,
                format!("undecided after {extensions} extensions"),
            );
        }
        let batch = 2.min(opts.max_extensions - extensions);
        for _ in 0..batch {
            let last = hs[hs.len() - 1];
            hs.push(last * ratio);
        }
        extensions += batch;
    }
}

fn slope(partials: &[(f64, f64)], incs: &[f64]) -> Option<f64> {
    let n = incs.len();
    if n < 3 {
        return None;
    }
    let last = &incs[n - 3..];
    if last.contains(&0.0) || !(last.iter().all(|d| *d > 0.0) || last.iter().all(|d| *d < 0.0)) {
        return None;
    }
    let hs: Vec<f64> = partials[partials.len() - 3..].iter().map(|p| p.0.ln()).collect();
    let ls: Vec<f64> = last.iter().map(|d| d.abs().ln()).collect();
    Some(ls_slope(&hs, &ls))
}

fn decide(partials: &[(f64, f64)], incs: &[f64], opts: &ProbeOptions) -> Option<DivergenceVerdict> {
    let n = partials.len();
    let vals: Vec<f64> = partials[n - 3..].iter().map(|p| p.1).collect();
    let scale = vals[2].abs();
    let cauchy = (vals[2] - vals[1]).abs() <= opts.cauchy_rel * scale + opts.cauchy_abs
        && (vals[1] - vals[0]).abs() <= opts.cauchy_rel * scale + opts.cauchy_abs;
    let beta = slope(partials, incs);
    if cauchy {
        // geometric tail correction from the last two increments
        let m = incs.len();
        let mut limit = vals[2];
        if m >= 2 && incs[m - 2] != 0.0 {
            let r = incs[m - 1] / incs[m - 2];
            if r.abs() < 1.0 && r >= 0.0 {
                limit += incs[m - 1] * r / (1.0 - r);
            }
        }
        return Some(DivergenceVerdict {
            classification: Classification::Converges,
            partials: partials.to_vec(),
            beta,
            growth: None,
            negative: false,
            limit: Some(limit),
            diagnostic: None,
        });
    }
    let beta = beta?;
    if beta < -opts.beta_min {
        return None;
    }
    let growth = if beta > opts.beta_min {
        Growth::Power { beta }
    } else {
        Growth::Logarithmic { beta }
    };
    Some(DivergenceVerdict {
        classification: Classification::Diverges,
        partials: partials.to_vec(),
        beta: Some(beta),
        growth: Some(growth),
        negative: incs[incs.len() - 1] < 0.0,
        limit: None,
        diagnostic: None,
    })
}
