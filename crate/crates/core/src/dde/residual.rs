use super::{at, DdeError, SystemSpec};
use crate::expr::{Expr, Var};

/// Pointwise residuals `D^α y_i(t) - RHS_i(t)` of a candidate solution.
pub fn residual_series(
    spec: &SystemSpec,
    candidate: &[Expr; 3],
    grid: &[f64],
) -> Result<Vec<[f64; 3]>, DdeError> {
    let derivs: Vec<Expr> = candidate.iter().map(|e| e.diff(Var::T)).collect();
    let a = spec.alpha.value();
    grid.iter()
        .map(|&t| {
            if !(t > 0.0) {
                return Err(DdeError::Precondition(format!("residual grid needs t > 0, got {t}")));
            }
            let ev = |e: &Expr, x: f64| e.eval_at(Var::T, x).map_err(at(t));
            let scale = t.powf(1.0 - a);
            let lhs = [
                scale * ev(&derivs[0], t)?,
                scale * ev(&derivs[1], t)?,
                scale * ev(&derivs[2], t)?,
            ];
            let v_sigma = ev(&candidate[1], ev(&spec.sigma, t)?)?;
            let u_tau = ev(&candidate[0], ev(&spec.tau, t)?)?;
            let w_t = ev(&candidate[2], t)?;
            let rhs = [
                ev(&spec.p, t)? * spec.g.eval_at(Var::V, v_sigma).map_err(at(t))?,
                -ev(&spec.q, t)? * spec.h.eval_at(Var::W, w_t).map_err(at(t))?,
                ev(&spec.r, t)? * spec.f.eval_at(Var::U, u_tau).map_err(at(t))?,
            ];
            Ok([lhs[0] - rhs[0], lhs[1] - rhs[1], lhs[2] - rhs[2]])
        })
        .collect()
}

/// Maximum absolute residual of each equation over `grid`.
pub fn residual(spec: &SystemSpec, candidate: &[Expr; 3], grid: &[f64]) -> Result<[f64; 3], DdeError> {
    let series = residual_series(spec, candidate, grid)?;
    let mut worst = [0.0f64; 3];
    for r in series {
        for i in 0..3 {
            worst[i] = worst[i].max(r[i].abs());
        }
    }
    Ok(worst)
}
