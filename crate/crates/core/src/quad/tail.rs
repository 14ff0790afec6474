use serde::{Deserialize, Serialize};

use super::{ls_slope, neville_at_zero};
use crate::exec::Executor;
use crate::expr::ExprError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailKind {
    Liminf,
    Limsup,
}

/// Estimate of `liminf` or `limsup` of a function as `t → ∞`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailConstant {
    pub kind: TailKind,
    /// `(t, extremum of F over [t, t_max])` for each grid point.
    #[serde(with = "crate::serde_f64::pairs")]
    pub windows: Vec<(f64, f64)>,
    /// Extrapolated constant; `±inf` when the tail grows without bound.
    #[serde(with = "crate::serde_f64")]
    pub value: f64,
    pub unbounded: bool,
    pub low_confidence: bool,
    pub note: Option<String>,
}

/// Evaluates `F` on `t_grid` and estimates its tail constant.
pub fn tail_constant<F>(
    f: &F,
    kind: TailKind,
    t_grid: &[f64],
    exec: Executor,
) -> Result<TailConstant, ExprError>
where
    F: Fn(f64) -> Result<f64, ExprError> + Sync + ?Sized,
{
    let values = exec.map(t_grid, |&t| f(t));
    let mut samples = Vec::with_capacity(t_grid.len());
    for (t, v) in t_grid.iter().zip(values) {
        samples.push((*t, v?));
    }
    Ok(tail_constant_from_samples(kind, &samples))
}

const BETA_MIN: f64 = 0.05;

/// Tail constant from `(t, F(t))` samples sorted by `t`.
///
/// Non-finite samples are dropped. A monotone tail is extrapolated in `1/t`
/// (Neville on the last three points); an oscillating tail uses the running
/// extremum, extrapolated linearly in `1/t`, and is marked low-confidence
/// unless its amplitude shrinks.
pub fn tail_constant_from_samples(kind: TailKind, samples: &[(f64, f64)]) -> TailConstant {
    let sign = match kind {
        TailKind::Liminf => 1.0,
        TailKind::Limsup => -1.0,
    };
    // work on G = sign * F so that both kinds become a liminf
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(t, v)| t.is_finite() && v.is_finite())
        .map(|&(t, v)| (t, sign * v))
        .collect();
    let n = pts.len();
    let mut windows = vec![(0.0, 0.0); n];
    let mut run = f64::INFINITY;
    for i in (0..n).rev() {
        run = run.min(pts[i].1);
        windows[i] = (pts[i].0, sign * run);
    }
    let mut out = TailConstant {
        kind,
        windows,
        value: f64::NAN,
        unbounded: false,
        low_confidence: true,
        note: None,
    };
    if n < 4 {
        out.note = Some(format!("only {n} usable samples"));
        if let Some(&(_, g)) = pts.last() {
            out.value = sign * g;
        }
        return out;
    }
    let tail = &pts[n / 2..];
    let ts: Vec<f64> = tail.iter().map(|p| p.0).collect();
    let gs: Vec<f64> = tail.iter().map(|p| p.1).collect();
    let diffs: Vec<f64> = gs.windows(2).map(|w| w[1] - w[0]).collect();
    let up = diffs.iter().all(|d| *d >= 0.0);
    let down = diffs.iter().all(|d| *d <= 0.0);

    if up || down {
        // rate per unit ln t; flat or growing rates mean the tail is unbounded
        let rates: Vec<(f64, f64)> = ts
            .windows(2)
            .zip(&diffs)
            .map(|(w, d)| (0.5 * (w[0].ln() + w[1].ln()), d / (w[1] / w[0]).ln()))
            .collect();
        let last = &rates[rates.len().saturating_sub(5)..];
        let same_sign = last.iter().all(|r| r.1 > 0.0) || last.iter().all(|r| r.1 < 0.0);
        if last.len() >= 3 && same_sign {
            let lt: Vec<f64> = last.iter().map(|r| r.0).collect();
            let lr: Vec<f64> = last.iter().map(|r| r.1.abs().ln()).collect();
            let beta = ls_slope(&lt, &lr);
            if beta >= -BETA_MIN {
                let dir = last[0].1.signum();
                out.value = sign * dir * f64::INFINITY;
                out.unbounded = true;
                out.low_confidence = false;
                out.note = Some(if beta > BETA_MIN {
                    format!("tail grows like t^{beta:.3}")
                } else {
                    format!("tail grows logarithmically (rate exponent {beta:.3})")
                });
                return out;
            }
            if let Some(limit) = rate_limit(last) {
                if limit * last[last.len() - 1].1 > 0.0 && limit.abs() >= 0.25 * last[last.len() - 1].1.abs() {
                    out.value = sign * limit.signum() * f64::INFINITY;
                    out.unbounded = true;
                    out.low_confidence = false;
                    out.note = Some(format!(
                        "tail grows logarithmically (rate tends to {limit:.4e} per unit ln t)"
                    ));
                    return out;
                }
            }
        }
        let k = tail.len().min(3);
        let xs: Vec<f64> = ts[ts.len() - k..].iter().map(|t| 1.0 / t).collect();
        let est = neville_at_zero(&xs, &gs[gs.len() - k..]);
        let best = *est.last().unwrap();
        let prev = est[est.len().saturating_sub(2)];
        out.value = sign * best;
        out.low_confidence = (best - prev).abs() > 1e-3 * best.abs().max(1.0);
        if out.low_confidence {
            out.note = Some("extrapolants disagree".into());
        }
        return out;
    }

    // oscillating tail: running infimum of G over [t, t_max]
    let m: Vec<f64> = out.windows[n / 2..].iter().map(|w| sign * w.1).collect();
    let positive = m.iter().all(|v| *v > 0.0);
    if positive && m[m.len() - 1] > m[0] {
        let checkpoints = [0, m.len() / 2, m.len() - 1];
        let lt: Vec<f64> = checkpoints.iter().map(|&i| ts[i].ln()).collect();
        let lm: Vec<f64> = checkpoints.iter().map(|&i| m[i].ln()).collect();
        let beta = ls_slope(&lt, &lm);
        if beta >= BETA_MIN {
            out.value = sign * f64::INFINITY;
            out.unbounded = true;
            out.low_confidence = false;
            out.note = Some(format!("running extremum grows like t^{beta:.3}"));
            return out;
        }
    }
    let half = gs.len() / 2;
    let amp = |s: &[f64]| {
        let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
        hi - lo
    };
    let (a1, a2) = (amp(&gs[..half]), amp(&gs[half..]));
    // exclude the last few points, where the running extremum is pinned
    // to the grid end rather than the tail behaviour
    let xs: Vec<f64> = ts[..half.max(2)].iter().map(|t| 1.0 / t).collect();
    let ys = &m[..half.max(2)];
    let s = ls_slope(&xs, ys);
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let intercept = my - s * mx;
    let shrinking = a2 <= 0.75 * a1;
    out.value = sign * if shrinking { intercept } else { m[0] };
    out.low_confidence = !shrinking;
    out.note = Some(if shrinking {
        "oscillating tail with shrinking amplitude".into()
    } else {
        format!("oscillation amplitude does not shrink ({a1:.3e} -> {a2:.3e})")
    });
    out
}

/// Aitken limit of the last three rates when their differences contract at
/// least like `t^(-1/2)` and the contraction is steady over the last four.
/// Power-law approaches to a finite limit give a limit near zero; a log
/// term plus a decaying transient gives the log coefficient.
fn rate_limit(rates: &[(f64, f64)]) -> Option<f64> {
    let n = rates.len();
    if n < 4 {
        return None;
    }
    let r = &rates[n - 4..];
    let kappa = |i: usize| {
        let q = (r[i + 2].1 - r[i + 1].1) / (r[i + 1].1 - r[i].1);
        (q > 0.0 && q < 1.0).then(|| (q, -q.ln() / (r[i + 2].0 - r[i + 1].0)))
    };
    let (q, k1) = kappa(1)?;
    let (_, k0) = kappa(0)?;
    if k1 < 0.5 || (k1 - k0).abs() > 0.25 * k1 {
        return None;
    }
    Some(r[3].1 + (r[3].1 - r[2].1) * q / (1.0 - q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        let r = (hi / lo).powf(1.0 / (n - 1) as f64);
        (0..n).map(|i| lo * r.powi(i as i32)).collect()
    }

    fn run(f: impl Fn(f64) -> f64 + Sync, kind: TailKind, g: &[f64]) -> TailConstant {
        tail_constant(&|t| Ok(f(t)), kind, g, Executor::Sequential).unwrap()
    }

    #[test]
    fn decaying_offset() {
        let g = grid(10.0, 1e4, 200);
        let tc = run(|t| 0.3 + 1.0 / t, TailKind::Liminf, &g);
        assert!((tc.value - 0.3).abs() < 1e-3);
        assert!(!tc.low_confidence);
        let tc = run(|t| 0.3 - 1.0 / t, TailKind::Limsup, &g);
        assert!((tc.value - 0.3).abs() < 1e-3);
    }

    #[test]
    fn sine_has_no_limit() {
        let g = grid(10.0, 1e4, 2000);
        let tc = run(f64::sin, TailKind::Liminf, &g);
        assert!(tc.low_confidence);
    }

    #[test]
    fn windows_are_monotone() {
        let g = grid(10.0, 1e4, 500);
        let tc = run(|t| 2.0 + t.sin() / t, TailKind::Liminf, &g);
        for w in tc.windows.windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
        assert!((tc.value - 2.0).abs() < 1e-3, "{}", tc.value);
        assert!(!tc.low_confidence);
    }

    #[test]
    fn growth_is_unbounded() {
        let g = grid(10.0, 1e4, 100);
        let tc = run(|t| t.sqrt(), TailKind::Liminf, &g);
        assert!(tc.unbounded && tc.value == f64::INFINITY);
        let tc = run(|t| t * (2.0 + t.sin()), TailKind::Liminf, &grid(10.0, 1e4, 3000));
        assert!(tc.unbounded, "{tc:?}");
        let tc = run(|t| -t, TailKind::Limsup, &g);
        assert_eq!(tc.value, f64::NEG_INFINITY);
        let tc = run(|t| 0.05 * t.ln() - 30.0, TailKind::Limsup, &g);
        assert_eq!(tc.value, f64::INFINITY, "{tc:?}");
        let tc = run(|t| 1.0 - 1.0 / t.ln(), TailKind::Limsup, &g);
        assert!(!tc.unbounded, "{tc:?}");
    }

    #[test]
    fn log_growth_behind_a_transient() {
        let g = grid(400.0, 4e5, 40);
        let tc = run(|t| 0.0457 * t.ln() - 31.0 - 2480.0 / t, TailKind::Limsup, &g);
        assert_eq!(tc.value, f64::INFINITY, "{tc:?}");
        for f in [
            (|t: f64| 3.0 - t.powf(-0.3)) as fn(f64) -> f64,
            |t| 3.0 - 1.0 / t - 50.0 / (t * t),
            |t| 2.0 - 1.0 / t.ln() - 1.0 / t,
            |t| 1.0 - 1.0 / t.ln().powi(2),
        ] {
            let tc = run(f, TailKind::Limsup, &g);
            assert!(!tc.unbounded, "{tc:?}");
        }
    }
}
