use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::QuadError;
use crate::expr::ExprError;

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Accuracy request for [`integrate_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance {
            abs,
            rel,
            max_panels: 1 << 20,
        }
    }
}

/// Integral value with its error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn sample<F>(f: &F, x: f64) -> Result<f64, QuadError>
where
    F: Fn(f64) -> Result<f64, ExprError> + ?Sized,
{
    let y = f(x).map_err(|source| QuadError::Eval { at: x, source })?;
    if !y.is_finite() {
        return Err(QuadError::NonFinite { at: x, value: y });
    }
    Ok(y)
}

fn gk15<F>(f: &F, a: f64, b: f64) -> Result<Panel, QuadError>
where
    F: Fn(f64) -> Result<f64, ExprError> + ?Sized,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = sample(f, c)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = h * x;
        let pair = sample(f, c - dx)? + sample(f, c + dx)?;
        kronrod += wk * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Ok(Panel {
        a,
        b,
        value: kronrod * h,
        error: ((kronrod - gauss) * h).abs(),
    })
}

fn initial_cuts(a: f64, b: f64) -> Vec<f64> {
    // power-law integrands over many decades: start from a geometric mesh
    if a > 0.0 && b / a > 4.0 {
        let n = ((b / a).log2().ceil() as usize).min(64);
        let ratio = (b / a).powf(1.0 / n as f64);
        let mut cuts: Vec<f64> = (0..n).map(|i| a * ratio.powi(i as i32)).collect();
        cuts.push(b);
        cuts[0] = a;
        cuts
    } else {
        vec![a, b]
    }
}

/// Adaptive Gauss-Kronrod quadrature on `[a, b]` (`a <= b`).
///
/// Refines the panel with the largest error estimate until the total
/// estimate is below `max(tol.abs, tol.rel * |value|)`.
pub fn integrate_with<F>(f: &F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate, QuadError>
where
    F: Fn(f64) -> Result<f64, ExprError> + ?Sized,
{
    if !(a <= b) || !a.is_finite() || !b.is_finite() {
        return Err(QuadError::Interval { a, b });
    }
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            panels: 0,
        });
    }
    let cuts = initial_cuts(a, b);
    let mut heap = BinaryHeap::new();
    let mut done: Vec<Panel> = Vec::new();
    let (mut value, mut error) = (0.0, 0.0);
    for w in cuts.windows(2) {
        let p = gk15(f, w[0], w[1])?;
        value += p.value;
        error += p.error;
        heap.push(p);
    }
    let mut panels = heap.len();
    loop {
        if error <= tol.abs.max(tol.rel * value.abs()) {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if panels >= tol.max_panels || !(mid > worst.a && mid < worst.b) {
            // out of budget, or the panel can no longer be split
            done.push(worst);
            if panels >= tol.max_panels || heap.is_empty() {
                break;
            }
            continue;
        }
        let left = gk15(f, worst.a, mid)?;
        let right = gk15(f, mid, worst.b)?;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        panels += 1;
    }
    // re-sum to shed drift from the incremental updates
    let all = heap.iter().chain(done.iter());
    let (value, error) = all.fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    if error > tol.abs.max(tol.rel * value.abs()) {
        return Err(QuadError::NoConvergence {
            a,
            b,
            panels,
            estimate: value,
            error,
        });
    }
    Ok(Estimate {
        value,
        error,
        panels,
    })
}

/// `∫_a^b f` with absolute and relative tolerance `tol`.
pub fn integrate<F>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64, QuadError>
where
    F: Fn(f64) -> Result<f64, ExprError> + ?Sized,
{
    integrate_with(f, a, b, Tolerance::new(tol, tol)).map(|e| e.value)
}
