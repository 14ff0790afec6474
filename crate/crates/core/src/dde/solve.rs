use std::cell::Cell;

use super::{at, DdeError, History, SystemSpec};
use crate::expr::{Expr, Var};

/// Something that yields `(u, v, w)` and component jets on a time range.
pub trait StateFn: Sync {
    /// Closed interval on which `state` is defined.
    fn domain(&self) -> (f64, f64);

    fn state(&self, t: f64) -> Result<[f64; 3], DdeError>;

    /// Value and first three derivatives of component `comp` at `t`.
    fn jet(&self, comp: usize, t: f64) -> Result<[f64; 4], DdeError>;
}

fn derivatives(e: &Expr) -> [Expr; 3] {
    let d1 = e.diff(Var::T);
    let d2 = d1.diff(Var::T);
    let d3 = d2.diff(Var::T);
    [d1, d2, d3]
}

fn expr_jet(e: &Expr, d: &[Expr; 3], t: f64) -> Result<[f64; 4], DdeError> {
    let ev = |x: &Expr| x.eval_at(Var::T, t).map_err(at(t));
    Ok([ev(e)?, ev(&d[0])?, ev(&d[1])?, ev(&d[2])?])
}

/// Three expressions in `t`, e.g. a reference solution.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedForm {
    comps: [Expr; 3],
    derivs: [[Expr; 3]; 3],
    lo: f64,
    hi: f64,
}

impl ClosedForm {
    pub fn new(comps: [Expr; 3], lo: f64, hi: f64) -> Self {
        let derivs = [
            derivatives(&comps[0]),
            derivatives(&comps[1]),
            derivatives(&comps[2]),
        ];
        ClosedForm {
            comps,
            derivs,
            lo,
            hi,
        }
    }

    pub fn components(&self) -> &[Expr; 3] {
        &self.comps
    }
}

impl StateFn for ClosedForm {
    fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn state(&self, t: f64) -> Result<[f64; 3], DdeError> {
        let ev = |x: &Expr| x.eval_at(Var::T, t).map_err(at(t));
        Ok([ev(&self.comps[0])?, ev(&self.comps[1])?, ev(&self.comps[2])?])
    }

    fn jet(&self, comp: usize, t: f64) -> Result<[f64; 4], DdeError> {
        expr_jet(&self.comps[comp], &self.derivs[comp], t)
    }
}

/// Piecewise cubic Hermite solution on `[t0, t_end]` backed by the history
/// below `t0`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    ts: Vec<f64>,
    ys: Vec<[f64; 3]>,
    ds: Vec<[f64; 3]>,
    dt: f64,
    history: History,
    hist_derivs: [[Expr; 3]; 3],
    truncated: Option<f64>,
    clamp_activations: usize,
}

fn hermite(t0: f64, t1: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1
}

/// Derivatives 0..=3 at `x` of the polynomial matching values and slopes
/// at every node in `nodes` (confluent Newton form).
fn hermite_jet(nodes: &[(f64, f64, f64)], x: f64) -> [f64; 4] {
    let m = 2 * nodes.len();
    let z: Vec<f64> = nodes.iter().flat_map(|n| [n.0, n.0]).collect();
    let mut table: Vec<f64> = nodes.iter().flat_map(|n| [n.1, n.1]).collect();
    let mut coef = vec![table[0]];
    for order in 1..m {
        for i in (order..m).rev() {
            let den = z[i] - z[i - order];
            table[i] = if den == 0.0 {
                nodes[i / 2].2
            } else {
                (table[i] - table[i - 1]) / den
            };
        }
        coef.push(table[order]);
    }
    let (mut v, mut d1, mut d2, mut d3) = (coef[m - 1], 0.0, 0.0, 0.0);
    for k in (0..m - 1).rev() {
        let dx = x - z[k];
        d3 = 3.0 * d2 + dx * d3;
        d2 = 2.0 * d1 + dx * d2;
        d1 = v + dx * d1;
        v = coef[k] + dx * v;
    }
    [v, d1, d2, d3]
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.ts
    }

    pub fn states(&self) -> &[[f64; 3]] {
        &self.ys
    }

    pub fn slopes(&self) -> &[[f64; 3]] {
        &self.ds
    }

    pub fn t0(&self) -> f64 {
        self.ts[0]
    }

    pub fn t_end(&self) -> f64 {
        self.ts[self.ts.len() - 1]
    }

    pub fn step(&self) -> f64 {
        self.dt
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    /// Time of the rejected step when the overflow guard stopped the run.
    pub fn truncated(&self) -> Option<f64> {
        self.truncated
    }

    /// Number of nodes at which the argument of `f` was clamped.
    pub fn clamp_activations(&self) -> usize {
        self.clamp_activations
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.ts.len();
        let mut i = (((t - self.ts[0]) / self.dt).floor().max(0.0) as usize).min(n - 2);
        while i > 0 && t < self.ts[i] {
            i -= 1;
        }
        while i + 2 < n && t > self.ts[i + 1] {
            i += 1;
        }
        i
    }

    fn dense(&self, comp: usize, t: f64) -> f64 {
        if self.ts.len() == 1 {
            return self.ys[0][comp];
        }
        let i = self.segment(t);
        hermite(
            self.ts[i],
            self.ts[i + 1],
            self.ys[i][comp],
            self.ys[i + 1][comp],
            self.ds[i][comp],
            self.ds[i + 1][comp],
            t,
        )
    }

    fn check(&self, t: f64) -> Result<(), DdeError> {
        let (lo, hi) = self.domain();
        if t < lo || t > hi || t.is_nan() {
            return Err(DdeError::OutOfRange { t, lo, hi });
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<[f64; 3], DdeError> {
        self.check(t)?;
        if t < self.ts[0] {
            return self.history.eval(t);
        }
        Ok([self.dense(0, t), self.dense(1, t), self.dense(2, t)])
    }
}

impl StateFn for Trajectory {
    fn domain(&self) -> (f64, f64) {
        (self.history.t1.min(self.ts[0]), self.t_end())
    }

    fn state(&self, t: f64) -> Result<[f64; 3], DdeError> {
        self.eval(t)
    }

    fn jet(&self, comp: usize, t: f64) -> Result<[f64; 4], DdeError> {
        self.check(t)?;
        let n = self.ts.len();
        if t < self.ts[0] || n == 1 {
            return expr_jet(self.history.components()[comp], &self.hist_derivs[comp], t);
        }
        let node = |i: usize| (self.ts[i], self.ys[i][comp], self.ds[i][comp]);
        if n == 2 {
            return Ok(hermite_jet(&[node(0), node(1)], t));
        }
        // quintic through the three nodes around t
        let i = self.segment(t);
        let mid = if t - self.ts[i] < self.ts[i + 1] - t { i } else { i + 1 };
        let mid = mid.clamp(1, n - 2);
        Ok(hermite_jet(&[node(mid - 1), node(mid), node(mid + 1)], t))
    }
}

/// Provisional dense output of the step being taken.
#[derive(Clone, Copy)]
struct Pending {
    t0: f64,
    t1: f64,
    y0: [f64; 3],
    y1: [f64; 3],
    d0: [f64; 3],
    d1: [f64; 3],
}

struct Stepper<'a> {
    spec: &'a SystemSpec,
    traj: Trajectory,
    used_pending: Cell<bool>,
    clamped: Cell<bool>,
}

const U: usize = 0;
const V: usize = 1;

impl Stepper<'_> {
    fn lookup(&self, comp: usize, s: f64, t: f64, pending: Option<&Pending>) -> Result<f64, DdeError> {
        let tr = &self.traj;
        let t1 = tr.history.t1;
        if s < t1 - 1e-12 * t1.abs().max(1.0) {
            return Err(DdeError::BelowHistory { t, arg: s, t1 });
        }
        if s <= tr.ts[0] {
            let e = tr.history.components()[comp];
            return e.eval_at(Var::T, s).map_err(at(t));
        }
        if s <= tr.t_end() {
            return Ok(tr.dense(comp, s));
        }
        match pending {
            Some(p) if s <= p.t1 * (1.0 + 1e-14) => {
                self.used_pending.set(true);
                Ok(hermite(p.t0, p.t1, p.y0[comp], p.y1[comp], p.d0[comp], p.d1[comp], s))
            }
            _ => Err(DdeError::Precondition(format!(
                "delayed argument {s} at t = {t} lies ahead of the solution"
            ))),
        }
    }

    fn rhs(&self, t: f64, y: [f64; 3], pending: Option<&Pending>) -> Result<[f64; 3], DdeError> {
        let spec = self.spec;
        let ev = |e: &Expr| e.eval_at(Var::T, t).map_err(at(t));
        let scale = t.powf(spec.alpha.value() - 1.0);
        let s = ev(&spec.sigma)?;
        let ta = ev(&spec.tau)?;
        let near = |x: f64| (x - t).abs() <= 1e-14 * t.abs();
        let v_s = if near(s) { y[V] } else { self.lookup(V, s, t, pending)? };
        let u_t = if near(ta) { y[U] } else { self.lookup(U, ta, t, pending)? };
        let g = spec.g.eval_at(Var::V, v_s).map_err(at(t))?;
        let h = spec.h.eval_at(Var::W, y[2]).map_err(at(t))?;
        let (f, clamped) = spec.f_sim(u_t).map_err(at(t))?;
        if clamped {
            self.clamped.set(true);
        }
        Ok([
            scale * ev(&spec.p)? * g,
            -scale * ev(&spec.q)? * h,
            scale * ev(&spec.r)? * f,
        ])
    }
}

fn axpy(y: [f64; 3], h: f64, k: [f64; 3]) -> [f64; 3] {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]]
}

const GUARD: f64 = 1e300;
const SWEEPS: usize = 5;
const SWEEP_TOL: f64 = 1e-12;

/// Classical RK4 with fixed step `dt` and cubic Hermite dense output.
///
/// Delayed values come from the history below `t0` and from the dense
/// output afterwards. A delayed argument inside the current step is
/// resolved by re-running the step against its own provisional
/// interpolant (at most five sweeps, tolerance `1e-12`). A step whose state
/// is non-finite or exceeds `1e300` in magnitude is rejected and the
/// trajectory is marked truncated.
pub fn solve(spec: &SystemSpec, hist: &History, t_end: f64, dt: f64) -> Result<Trajectory, DdeError> {
    let t0 = spec.t0;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(DdeError::Precondition(format!("step must be positive, got {dt}")));
    }
    if !(t_end >= t0) {
        return Err(DdeError::Precondition(format!("t_end = {t_end} is before t0 = {t0}")));
    }
    if !(hist.t1 <= t0) {
        return Err(DdeError::Precondition(format!(
            "history start {} is after t0 = {t0}",
            hist.t1
        )));
    }
    let y0 = hist.eval(t0)?;
    let hist_derivs = [
        derivatives(&hist.u0),
        derivatives(&hist.v0),
        derivatives(&hist.w0),
    ];
    let mut st = Stepper {
        spec,
        traj: Trajectory {
            ts: vec![t0],
            ys: vec![y0],
            ds: vec![[0.0; 3]],
            dt,
            history: hist.clone(),
            hist_derivs,
            truncated: None,
            clamp_activations: 0,
        },
        used_pending: Cell::new(false),
        clamped: Cell::new(false),
    };
    let d0 = st.rhs(t0, y0, None)?;
    st.traj.ds[0] = d0;
    if st.clamped.replace(false) {
        st.traj.clamp_activations += 1;
    }
    let steps = ((t_end - t0) / dt - 1e-9).ceil().max(0.0) as usize;
    for n in 0..steps {
        let ta = st.traj.t_end();
        let tb = if n + 1 == steps { t_end } else { t0 + (n + 1) as f64 * dt };
        let h = tb - ta;
        let y = st.traj.ys[n];
        let k1 = st.traj.ds[n];
        let mut pending = if n >= 1 {
            let tr = &st.traj;
            let (tp, yp, dp) = (tr.ts[n - 1], tr.ys[n - 1], tr.ds[n - 1]);
            let ext = |c: usize| hermite(tp, ta, yp[c], y[c], dp[c], k1[c], tb);
            // slope of the extrapolated cubic is not needed to high accuracy
            Pending {
                t0: ta,
                t1: tb,
                y0: y,
                y1: [ext(0), ext(1), ext(2)],
                d0: k1,
                d1: k1,
            }
        } else {
            Pending {
                t0: ta,
                t1: tb,
                y0: y,
                y1: axpy(y, h, k1),
                d0: k1,
                d1: k1,
            }
        };
        let mut y1 = y;
        let mut d1 = k1;
        for _ in 0..SWEEPS {
            st.used_pending.set(false);
            st.clamped.set(false);
            let th = ta + 0.5 * h;
            let k2 = st.rhs(th, axpy(y, 0.5 * h, k1), Some(&pending))?;
            let k3 = st.rhs(th, axpy(y, 0.5 * h, k2), Some(&pending))?;
            let k4 = st.rhs(tb, axpy(y, h, k3), Some(&pending))?;
            y1 = std::array::from_fn(|c| y[c] + h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]));
            d1 = st.rhs(tb, y1, Some(&pending))?;
            if !st.used_pending.get() {
                break;
            }
            let change = (0..3)
                .map(|c| (y1[c] - pending.y1[c]).abs() / (1.0 + y1[c].abs()))
                .fold(0.0, f64::max);
            pending.y1 = y1;
            pending.d1 = d1;
            if change <= SWEEP_TOL {
                break;
            }
        }
        let bad = |v: &[f64; 3]| v.iter().any(|x| !x.is_finite() || x.abs() > GUARD);
        if bad(&y1) || bad(&d1) {
            st.traj.truncated = Some(tb);
            break;
        }
        if st.clamped.get() {
            st.traj.clamp_activations += 1;
        }
        st.traj.ts.push(tb);
        st.traj.ys.push(y1);
        st.traj.ds.push(d1);
    }
    Ok(st.traj)
}
