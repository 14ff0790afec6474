use serde::{Deserialize, Serialize};

use super::{geometric_grid, CriteriaError};
use crate::expr::{Bindings, Expr, Var};

/// Shipped averaging kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelPreset {
    /// `(t - s)^2`
    Square,
    /// `t - s`
    Linear,
    /// `ln(t/s)^2`
    LogSquare,
}

impl KernelPreset {
    pub fn text(self) -> &'static str {
        match self {
            KernelPreset::Square => "(t-s)^2",
            KernelPreset::Linear => "t-s",
            KernelPreset::LogSquare => "ln(t/s)^2",
        }
    }

    pub fn from_name(name: &str) -> Option<KernelPreset> {
        match name {
            "square" | "(t-s)^2" => Some(KernelPreset::Square),
            "linear" | "t-s" => Some(KernelPreset::Linear),
            "log-square" | "ln(t/s)^2" => Some(KernelPreset::LogSquare),
            _ => None,
        }
    }
}

/// Averaging kernel `H(t, s)` with weight `ρ(s)` and
/// `h(t, s) = ∂H/∂s + H ρ'(s)/ρ(s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    pub h_kernel: Expr,
    /// `ρ` in `s`.
    pub rho: Expr,
    pub dh_ds: Expr,
    pub h: Expr,
}

impl KernelSpec {
    /// `kernel` in `t` and `s`; `rho` in `t` (renamed to `s` internally).
    pub fn new(kernel: Expr, rho: &Expr) -> Self {
        let rho = rho.rename(Var::T, Var::S);
        let dh_ds = kernel.diff(Var::S);
        let h = dh_ds.clone() + kernel.clone() * rho.diff(Var::S) / rho.clone();
        KernelSpec {
            h_kernel: kernel,
            rho,
            dh_ds,
            h,
        }
    }

    pub fn preset(p: KernelPreset, rho: &Expr) -> Self {
        let k = Expr::parse(p.text(), &[Var::T, Var::S]).expect("preset kernels parse");
        KernelSpec::new(k, rho)
    }

    pub fn parse(kernel: &str, rho: &Expr) -> Result<Self, CriteriaError> {
        let k = Expr::parse(kernel, &[Var::T, Var::S])
            .map_err(|e| CriteriaError::Kernel(e.to_string()))?;
        Ok(KernelSpec::new(k, rho))
    }

    fn at(e: &Expr, t: f64, s: f64) -> Result<f64, CriteriaError> {
        let b = Bindings::new().with(Var::T, t).with(Var::S, s);
        e.eval_wide(&b)
            .map(|w| w.to_f64())
            .map_err(|err| CriteriaError::Kernel(format!("at (t, s) = ({t}, {s}): {err}")))
    }

    /// Sampled class checks on `t0 <= s < t <= t_max`: `H(t, t) = 0`,
    /// `H(t, s) > 0`, `∂H/∂s <= 0`, and `ρ(s) > 0`.
    pub fn validate(&self, t0: f64, t_max: f64) -> Result<(), CriteriaError> {
        for t in geometric_grid(t0 * 1.01 + 1e-9, t_max.max(t0 * 1.02 + 1e-9), 25) {
            let diag = Self::at(&self.h_kernel, t, t)?;
            if diag.abs() > 1e-12 {
                return Err(CriteriaError::Kernel(format!("H(t, t) = {diag} at t = {t}, expected 0")));
            }
            for j in 0..10 {
                let s = t0 + (t - t0) * j as f64 / 10.0;
                let h = Self::at(&self.h_kernel, t, s)?;
                if !(h > 0.0) {
                    return Err(CriteriaError::Kernel(format!("H({t}, {s}) = {h} is not positive")));
                }
                let d = Self::at(&self.dh_ds, t, s)?;
                if d > 1e-12 * h.abs().max(1.0) {
                    return Err(CriteriaError::Kernel(format!("∂H/∂s({t}, {s}) = {d} is positive")));
                }
                let r = self
                    .rho
                    .eval_wide(&Bindings::new().with(Var::S, s))
                    .map_err(|err| CriteriaError::Kernel(format!("rho({s}): {err}")))?;
                if !(r.signum() > 0.0) {
                    return Err(CriteriaError::Kernel(format!(
                        "rho({s}) = {} is not positive",
                        r.to_f64()
                    )));
                }
            }
        }
        Ok(())
    }
}
