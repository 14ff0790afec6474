use super::{Expr, ExprError, Func};

pub(super) fn eval(e: &Expr, env: &[Option<f64>; 5]) -> Result<f64, ExprError> {
    Ok(match e {
        Expr::Num(x) => *x,
        Expr::Const(c) => c.value(),
        Expr::Var(v) => env[v.index()].ok_or(ExprError::Unbound(*v))?,
        Expr::Neg(a) => -eval(a, env)?,
        Expr::Add(a, b) => eval(a, env)? + eval(b, env)?,
        Expr::Sub(a, b) => eval(a, env)? - eval(b, env)?,
        Expr::Mul(a, b) => eval(a, env)? * eval(b, env)?,
        Expr::Div(a, b) => {
            let num = eval(a, env)?;
            let den = eval(b, env)?;
            if den == 0.0 {
                return Err(ExprError::domain("division by zero", e));
            }
            num / den
        }
        Expr::Pow(a, b) => {
            let base = eval(a, env)?;
            let exponent = eval(b, env)?;
            real_pow(base, exponent).ok_or_else(|| pow_error(base, e))?
        }
        Expr::RatPow(a, num, den) => {
            let base = eval(a, env)?;
            rational_pow(base, *num, *den).ok_or_else(|| pow_error(base, e))?
        }
        Expr::Call(f, a) => {
            let x = eval(a, env)?;
            match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Ln => {
                    if x <= 0.0 {
                        return Err(ExprError::domain("logarithm of a non-positive value", e));
                    }
                    x.ln()
                }
                Func::Sqrt => {
                    if x < 0.0 {
                        return Err(ExprError::domain("square root of a negative value", e));
                    }
                    x.sqrt()
                }
                Func::Abs => x.abs(),
                Func::Cbrt => x.cbrt(),
            }
        }
    })
}

pub(super) fn pow_error(base: f64, e: &Expr) -> ExprError {
    if base == 0.0 {
        ExprError::domain("division by zero (zero base, negative exponent)", e)
    } else {
        ExprError::domain("non-integer power of a negative value", e)
    }
}

/// `base^exponent`; integer exponents allow any base.
pub(super) fn real_pow(base: f64, exponent: f64) -> Option<f64> {
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        if base == 0.0 && exponent < 0.0 {
            return None;
        }
        return Some(base.powi(exponent as i32));
    }
    if base < 0.0 || (base == 0.0 && exponent < 0.0) {
        return None;
    }
    Some(base.powf(exponent))
}

/// `base^(num/den)` through the real root when `den` is odd.
pub(super) fn rational_pow(base: f64, num: i64, den: u64) -> Option<f64> {
    if base == 0.0 && num < 0 {
        return None;
    }
    if den == 1 {
        return Some(if num.unsigned_abs() <= i32::MAX as u64 {
            base.powi(num as i32)
        } else {
            base.powf(num as f64)
        });
    }
    if base < 0.0 {
        if den.is_multiple_of(2) {
            return None;
        }
        let magnitude = (-base).powf(num as f64 / den as f64);
        return Some(if num % 2 == 0 { magnitude } else { -magnitude });
    }
    Some(base.powf(num as f64 / den as f64))
}
