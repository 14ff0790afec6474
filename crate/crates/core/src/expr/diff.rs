use super::{Expr, Func, Var};

fn num(e: &Expr) -> Option<f64> {
    match e {
        Expr::Num(x) => Some(*x),
        _ => None,
    }
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    match (num(&a), num(&b)) {
        (Some(x), Some(y)) => Expr::Num(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => a + b,
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    match (num(&a), num(&b)) {
        (Some(x), Some(y)) => Expr::Num(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => a - b,
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    match (num(&a), num(&b)) {
        (Some(x), Some(y)) => Expr::Num(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Num(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        _ => a * b,
    }
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    match (num(&a), num(&b)) {
        (Some(x), _) if x == 0.0 => Expr::Num(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => a / b,
    }
}

pub(crate) fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(x) => Expr::Num(-x),
        Expr::Neg(inner) => *inner,
        other => -other,
    }
}

fn ratpow(base: Expr, n: i64, d: u64) -> Expr {
    match (n, d) {
        (0, _) => Expr::Num(1.0),
        (1, 1) => base,
        _ => Expr::RatPow(Box::new(base), n, d),
    }
}

pub(super) fn diff(e: &Expr, var: Var) -> Expr {
    match e {
        Expr::Num(_) | Expr::Const(_) => Expr::Num(0.0),
        Expr::Var(v) => Expr::Num(if *v == var { 1.0 } else { 0.0 }),
        Expr::Neg(a) => neg(diff(a, var)),
        Expr::Add(a, b) => add(diff(a, var), diff(b, var)),
        Expr::Sub(a, b) => sub(diff(a, var), diff(b, var)),
        Expr::Mul(a, b) => add(
            mul(diff(a, var), (**b).clone()),
            mul((**a).clone(), diff(b, var)),
        ),
        Expr::Div(a, b) => {
            let da = diff(a, var);
            let db = diff(b, var);
            if db.is_zero() {
                return div(da, (**b).clone());
            }
            let top = sub(mul(da, (**b).clone()), mul((**a).clone(), db));
            div(top, ratpow((**b).clone(), 2, 1))
        }
        Expr::RatPow(a, n, d) => {
            let da = diff(a, var);
            if da.is_zero() || *n == 0 {
                return Expr::Num(0.0);
            }
            let coef = Expr::Num(*n as f64 / *d as f64);
            let lowered = ratpow((**a).clone(), n - *d as i64, *d);
            mul(mul(coef, lowered), da)
        }
        Expr::Pow(a, b) => {
            let da = diff(a, var);
            let db = diff(b, var);
            if db.is_zero() {
                if da.is_zero() {
                    return Expr::Num(0.0);
                }
                // b * a^(b-1) * a'
                let lowered = Expr::Pow(a.clone(), Box::new(sub((**b).clone(), Expr::Num(1.0))));
                return mul(mul((**b).clone(), lowered), da);
            }
            // a^b * (b' ln a + b a'/a)
            let inner = add(
                mul(db, Expr::call(Func::Ln, (**a).clone())),
                div(mul((**b).clone(), da), (**a).clone()),
            );
            mul(e.clone(), inner)
        }
        Expr::Call(f, a) => {
            let da = diff(a, var);
            if da.is_zero() {
                return Expr::Num(0.0);
            }
            let a = (**a).clone();
            let outer = match f {
                Func::Sin => Expr::call(Func::Cos, a),
                Func::Cos => neg(Expr::call(Func::Sin, a)),
                Func::Exp => e.clone(),
                Func::Ln => return div(da, a),
                Func::Sqrt => return div(da, mul(Expr::Num(2.0), e.clone())),
                Func::Abs => return div(mul(a, da), e.clone()),
                Func::Cbrt => {
                    return div(da, mul(Expr::Num(3.0), ratpow(e.clone(), 2, 1)));
                }
            };
            mul(outer, da)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn central(e: &Expr, t: f64) -> f64 {
        let h = 1e-5 * t.abs().max(1.0);
        let f = |x| e.eval_at(Var::T, x).unwrap();
        (f(t + h) - f(t - h)) / (2.0 * h)
    }

    #[test]
    fn constants_fold_to_zero() {
        let rho = Expr::parse("16/0.2579", &[Var::T]).unwrap();
        assert_eq!(rho.diff(Var::T), Expr::Num(0.0));
        let mixed = Expr::parse_any("s*u").unwrap();
        assert_eq!(mixed.diff(Var::T), Expr::Num(0.0));
        assert_eq!(Expr::parse_any("t").unwrap().diff(Var::T), Expr::Num(1.0));
    }

    #[test]
    fn decaying_weight_derivative() {
        let e = Expr::parse("1/(t^(7/2)*exp(2*t))", &[Var::T]).unwrap();
        let d = e.diff(Var::T);
        let got = d.eval_at(Var::T, 2.0).unwrap();
        let want = central(&e, 2.0);
        assert!((got - want).abs() <= 1e-6 * want.abs(), "{got} vs {want}");
        let exact = -(3.5 / 2.0 + 2.0) * e.eval_at(Var::T, 2.0).unwrap();
        assert!((got - exact).abs() <= 1e-13 * exact.abs());
    }

    #[test]
    fn nonconstant_exponent() {
        let e = Expr::parse("t^(t)", &[Var::T]).unwrap();
        let got = e.diff(Var::T).eval_at(Var::T, 1.7).unwrap();
        let want = 1.7f64.powf(1.7) * (1.7f64.ln() + 1.0);
        assert!((got - want).abs() < 1e-13);
    }

    fn leaf() -> impl Strategy<Value = Expr> {
        prop_oneof![
            (0.5f64..3.0).prop_map(Expr::Num),
            Just(Expr::Var(Var::T)),
        ]
    }

    fn tree() -> impl Strategy<Value = Expr> {
        leaf().prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| a / (Expr::call(Func::Exp, b))),
                inner.clone().prop_map(|a| Expr::call(Func::Sin, a)),
                inner.clone().prop_map(|a| Expr::call(Func::Cos, a)),
                inner.clone().prop_map(|a| Expr::call(Func::Sqrt, 1.0 + a.clone() * a)),
                inner.clone().prop_map(|a| Expr::call(Func::Ln, 2.0 + Expr::call(Func::Sin, a))),
                (inner, 1i64..4, 1u64..4).prop_map(|(a, n, d)| (1.5 + Expr::call(Func::Cos, a)).ratpow(n, d)),
            ]
        })
    }

    proptest! {
        #[test]
        fn matches_finite_differences(e in tree(), t in 0.3f64..3.0) {
            let d = e.diff(Var::T).eval_at(Var::T, t).unwrap();
            let h = 1e-4;
            let f = |x: f64| e.eval_at(Var::T, x).unwrap();
            // fourth-order central difference
            let fd = (-f(t + 2.0 * h) + 8.0 * f(t + h) - 8.0 * f(t - h) + f(t - 2.0 * h)) / (12.0 * h);
            let scale = 1.0 + fd.abs() + d.abs();
            prop_assert!((d - fd).abs() <= 1e-5 * scale, "{e}: {d} vs {fd}");
        }
    }
}
