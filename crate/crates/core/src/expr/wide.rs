use std::f64::consts::LN_2;

use super::eval::{pow_error, rational_pow, real_pow};
use super::{Expr, ExprError, Func};

/// Real number `mant * 2^exp` with an `i64` exponent.
///
/// `mant` is kept in `[0.5, 1)` in magnitude (or is zero / non-finite), so
/// long products of huge and tiny factors do not leave the `f64` range
/// until the final conversion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wide {
    mant: f64,
    exp: i64,
}

fn frexp(x: f64) -> (f64, i64) {
    if x == 0.0 || !x.is_finite() {
        return (x, 0);
    }
    let (x, bias) = if x.abs() < f64::MIN_POSITIVE {
        (x * 2f64.powi(64), -64)
    } else {
        (x, 0)
    };
    let bits = x.to_bits();
    let raw = ((bits >> 52) & 0x7ff) as i64;
    let e = raw - 1022;
    let m = f64::from_bits((bits & !(0x7ff << 52)) | (1022u64 << 52));
    (m, e + bias)
}

fn ldexp(m: f64, e: i64) -> f64 {
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    if e > 1100 {
        return m.signum() * f64::INFINITY;
    }
    if e < -1200 {
        return 0.0 * m.signum();
    }
    let half = (e / 2) as i32;
    let rest = (e - half as i64) as i32;
    m * 2f64.powi(half) * 2f64.powi(rest)
}

impl Wide {
    pub const ZERO: Wide = Wide { mant: 0.0, exp: 0 };

    pub fn from_f64(x: f64) -> Wide {
        let (mant, exp) = frexp(x);
        Wide { mant, exp }
    }

    fn norm(mant: f64, exp: i64) -> Wide {
        let (m, e) = frexp(mant);
        if m == 0.0 || !m.is_finite() {
            return Wide { mant: m, exp: 0 };
        }
        Wide {
            mant: m,
            exp: exp.saturating_add(e),
        }
    }

    /// Nearest `f64`; saturates to `±inf` or `±0`.
    pub fn to_f64(self) -> f64 {
        ldexp(self.mant, self.exp)
    }

    pub fn is_zero(self) -> bool {
        self.mant == 0.0
    }

    pub fn is_finite(self) -> bool {
        self.mant.is_finite()
    }

    pub fn signum(self) -> f64 {
        if self.mant == 0.0 {
            0.0
        } else {
            self.mant.signum()
        }
    }

    /// Natural log of the magnitude.
    pub fn ln_abs(self) -> f64 {
        self.mant.abs().ln() + self.exp as f64 * LN_2
    }

    pub fn neg(self) -> Wide {
        Wide {
            mant: -self.mant,
            exp: self.exp,
        }
    }

    pub fn abs(self) -> Wide {
        Wide {
            mant: self.mant.abs(),
            exp: self.exp,
        }
    }

    pub fn mul(self, rhs: Wide) -> Wide {
        Wide::norm(self.mant * rhs.mant, self.exp.saturating_add(rhs.exp))
    }

    pub fn div(self, rhs: Wide) -> Wide {
        Wide::norm(self.mant / rhs.mant, self.exp.saturating_sub(rhs.exp))
    }

    pub fn add(self, rhs: Wide) -> Wide {
        if self.mant == 0.0 {
            return rhs;
        }
        if rhs.mant == 0.0 {
            return self;
        }
        if !self.mant.is_finite() || !rhs.mant.is_finite() {
            return Wide::from_f64(self.mant + rhs.mant);
        }
        let (big, small) = if self.exp >= rhs.exp {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let shift = big.exp - small.exp;
        if shift > 110 {
            return big;
        }
        Wide::norm(big.mant + ldexp(small.mant, -shift), big.exp)
    }

    pub fn sub(self, rhs: Wide) -> Wide {
        self.add(rhs.neg())
    }

    pub fn exp_of(x: Wide) -> Wide {
        let xf = x.to_f64();
        if xf.is_nan() {
            return Wide::from_f64(f64::NAN);
        }
        if xf.abs() < 700.0 {
            return Wide::from_f64(xf.exp());
        }
        if xf.is_infinite() || xf.abs() > 1e18 {
            return Wide::from_f64(if xf > 0.0 { f64::INFINITY } else { 0.0 });
        }
        // split ln 2 so that `k * LN2_HI` is exact
        const LN2_HI: f64 = 6.931_471_803_691_238e-1;
        const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
        let k = (xf / LN_2).floor();
        let r = (xf - k * LN2_HI) - k * LN2_LO;
        Wide::norm(r.exp(), k as i64)
    }

    /// `|self|^y`.
    fn abs_powf(self, y: f64) -> Wide {
        let a = self.abs();
        let direct = a.to_f64();
        if direct.is_normal() {
            let p = direct.powf(y);
            if p.is_normal() {
                return Wide::from_f64(p);
            }
        }
        Wide::exp_of(Wide::from_f64(y * a.ln_abs()))
    }

    fn powi(self, k: i64) -> Wide {
        let mut base = if k < 0 {
            Wide::from_f64(1.0).div(self)
        } else {
            self
        };
        let mut n = k.unsigned_abs();
        let mut acc = Wide::from_f64(1.0);
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            n >>= 1;
        }
        acc
    }

    fn sqrt(self) -> Wide {
        let (m, e) = if self.exp % 2 != 0 {
            (self.mant * 2.0, self.exp - 1)
        } else {
            (self.mant, self.exp)
        };
        Wide::norm(m.sqrt(), e / 2)
    }

    fn cbrt(self) -> Wide {
        let r = self.exp.rem_euclid(3);
        let m = self.mant * 2f64.powi(r as i32);
        Wide::norm(m.cbrt(), (self.exp - r) / 3)
    }
}

pub(super) fn eval(e: &Expr, env: &[Option<f64>; 5]) -> Result<Wide, ExprError> {
    Ok(match e {
        Expr::Num(x) => Wide::from_f64(*x),
        Expr::Const(c) => Wide::from_f64(c.value()),
        Expr::Var(v) => Wide::from_f64(env[v.index()].ok_or(ExprError::Unbound(*v))?),
        Expr::Neg(a) => eval(a, env)?.neg(),
        Expr::Add(a, b) => eval(a, env)?.add(eval(b, env)?),
        Expr::Sub(a, b) => eval(a, env)?.sub(eval(b, env)?),
        Expr::Mul(a, b) => eval(a, env)?.mul(eval(b, env)?),
        Expr::Div(a, b) => {
            let num = eval(a, env)?;
            let den = eval(b, env)?;
            if den.is_zero() {
                return Err(ExprError::domain("division by zero", e));
            }
            num.div(den)
        }
        Expr::Pow(a, b) => {
            let base = eval(a, env)?;
            let exponent = eval(b, env)?.to_f64();
            let integral = exponent.fract() == 0.0 && exponent.abs() <= 1e6;
            if base.is_zero() || !base.is_finite() {
                Wide::from_f64(
                    real_pow(base.to_f64(), exponent).ok_or_else(|| pow_error(0.0, e))?,
                )
            } else if integral {
                base.powi(exponent as i64)
            } else if base.signum() < 0.0 {
                return Err(pow_error(-1.0, e));
            } else {
                base.abs_powf(exponent)
            }
        }
        Expr::RatPow(a, num, den) => {
            let base = eval(a, env)?;
            if base.is_zero() || !base.is_finite() {
                Wide::from_f64(
                    rational_pow(base.to_f64(), *num, *den).ok_or_else(|| pow_error(0.0, e))?,
                )
            } else if *den == 1 {
                base.powi(*num)
            } else {
                if base.signum() < 0.0 && den % 2 == 0 {
                    return Err(pow_error(-1.0, e));
                }
                let magnitude = base.abs_powf(*num as f64 / *den as f64);
                if base.signum() < 0.0 && num % 2 != 0 {
                    magnitude.neg()
                } else {
                    magnitude
                }
            }
        }
        Expr::Call(f, a) => {
            let x = eval(a, env)?;
            match f {
                Func::Sin => Wide::from_f64(x.to_f64().sin()),
                Func::Cos => Wide::from_f64(x.to_f64().cos()),
                Func::Exp => Wide::exp_of(x),
                Func::Ln => {
                    if x.signum() <= 0.0 {
                        return Err(ExprError::domain("logarithm of a non-positive value", e));
                    }
                    Wide::from_f64(x.ln_abs())
                }
                Func::Sqrt => {
                    if x.signum() < 0.0 {
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
