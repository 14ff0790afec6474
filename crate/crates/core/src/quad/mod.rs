//! Quadrature, divergence probes for improper integrals, and tail
//! constants (liminf / limsup estimates).

mod gk;
mod probe;
mod tail;

use thiserror::Error;

use crate::expr::ExprError;

pub use gk::{integrate, integrate_with, Estimate, Tolerance};
pub use probe::{
    default_horizons, probe_improper, probe_improper_with, Classification, DivergenceVerdict,
    Growth, ProbeOptions,
};
pub use tail::{tail_constant, tail_constant_from_samples, TailConstant, TailKind};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum QuadError {
    #[error("invalid interval [{a}, {b}]")]
    Interval { a: f64, b: f64 },
    #[error("integrand failed at x = {at}: {source}")]
    Eval {
        at: f64,
        #[source]
        source: ExprError,
    },
    #[error("integrand is {value} at x = {at}")]
    NonFinite { at: f64, value: f64 },
    #[error("no convergence on [{a}, {b}] after {panels} panels (estimate {estimate:e}, error {error:e})")]
    NoConvergence {
        a: f64,
        b: f64,
        panels: usize,
        estimate: f64,
        error: f64,
    },
}

/// Neville extrapolation of the points `(xs[i], ys[i])` to `x = 0`.
///
/// Returns the estimates of increasing order; the last one uses every point.
pub fn neville_at_zero(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    let mut p = ys.to_vec();
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(p[n - 1]);
    for m in 1..n {
        for i in 0..n - m {
            let (xi, xj) = (xs[i], xs[i + m]);
            p[i] = (xj * p[i] - xi * p[i + 1]) / (xj - xi);
        }
        out.push(p[0]);
    }
    out
}

/// Least-squares slope of `ys` against `xs`.
pub(crate) fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}
