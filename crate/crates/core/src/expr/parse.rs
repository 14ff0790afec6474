use super::{Constant, Expr, ExprError, Func, Var};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    Open,
    Close,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Result<(Tok, usize), ExprError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = bytes.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        let tok = match c {
            b'0'..=b'9' | b'.' => return self.number(start),
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while self.pos < bytes.len()
                    && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                return Ok((Tok::Ident(self.src[start..self.pos].to_string()), start));
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
            b'(' => Tok::Open,
            b')' => Tok::Close,
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        self.pos += 1;
        Ok((tok, start))
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize), ExprError> {
        let bytes = self.src.as_bytes();
        let digits = |pos: &mut usize| {
            let from = *pos;
            while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
                *pos += 1;
            }
            *pos - from
        };
        let mut pos = self.pos;
        let mut mantissa = digits(&mut pos);
        if pos < bytes.len() && bytes[pos] == b'.' {
            pos += 1;
            mantissa += digits(&mut pos);
        }
        if mantissa == 0 {
            return Err(ExprError::Syntax {
                offset: start,
                message: "malformed number".into(),
            });
        }
        if pos < bytes.len() && (bytes[pos] == b'e' || bytes[pos] == b'E') {
            // only an exponent if digits follow; otherwise `e` is the constant
            let mut probe = pos + 1;
            if probe < bytes.len() && (bytes[probe] == b'+' || bytes[probe] == b'-') {
                probe += 1;
            }
            if probe < bytes.len() && bytes[probe].is_ascii_digit() {
                pos = probe;
                digits(&mut pos);
            }
        }
        let text = &self.src[start..pos];
        let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
            offset: start,
            message: format!("malformed number `{text}`"),
        })?;
        self.pos = pos;
        Ok((Tok::Num(value), start))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    offset: usize,
    allowed: &'a [Var],
}

pub(super) fn parse(text: &str, allowed: &[Var]) -> Result<Expr, ExprError> {
    let mut lexer = Lexer { src: text, pos: 0 };
    let (tok, offset) = lexer.next()?;
    let mut p = Parser {
        lexer,
        tok,
        offset,
        allowed,
    };
    if p.tok == Tok::End {
        return Err(ExprError::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.unexpected("end of input"));
    }
    Ok(e)
}

impl Parser<'_> {
    fn bump(&mut self) -> Result<(), ExprError> {
        let (tok, offset) = self.lexer.next()?;
        self.tok = tok;
        self.offset = offset;
        Ok(())
    }

    fn unexpected(&self, expected: &str) -> ExprError {
        let found = match &self.tok {
            Tok::Num(x) => format!("number {x}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::Open => "`(`".into(),
            Tok::Close => "`)`".into(),
            Tok::End => "end of input".into(),
        };
        ExprError::Syntax {
            offset: self.offset,
            message: format!("expected {expected}, found {found}"),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.tok {
                Tok::Op('+') => {
                    self.bump()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Op('-') => {
                    self.bump()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.tok {
                Tok::Op('*') => {
                    self.bump()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Op('/') => {
                    self.bump()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.tok == Tok::Op('-') {
            self.bump()?;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if self.tok != Tok::Op('^') {
            return Ok(base);
        }
        self.bump()?;
        let exponent = self.unary()?;
        Ok(match literal_ratio(&exponent) {
            Some((num, den)) => Expr::RatPow(Box::new(base), num, den),
            None => Expr::Pow(Box::new(base), Box::new(exponent)),
        })
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        match self.tok.clone() {
            Tok::Num(x) => {
                self.bump()?;
                Ok(Expr::Num(x))
            }
            Tok::Open => {
                self.bump()?;
                let inner = self.expr()?;
                if self.tok != Tok::Close {
                    return Err(self.unexpected("`)`"));
                }
                self.bump()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let at = self.offset;
                self.bump()?;
                if let Some(func) = Func::from_name(&name) {
                    if self.tok != Tok::Open {
                        return Err(self.unexpected(&format!("`(` after `{name}`")));
                    }
                    self.bump()?;
                    let arg = self.expr()?;
                    if self.tok != Tok::Close {
                        return Err(self.unexpected("`)`"));
                    }
                    self.bump()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                match name.as_str() {
                    "pi" => return Ok(Expr::Const(Constant::Pi)),
                    "e" => return Ok(Expr::Const(Constant::E)),
                    _ => {}
                }
                match Var::from_name(&name) {
                    Some(v) if self.allowed.contains(&v) => Ok(Expr::Var(v)),
                    _ => Err(ExprError::UnknownIdentifier {
                        name,
                        offset: at,
                        allowed: self.allowed_names(),
                    }),
                }
            }
            _ => Err(self.unexpected("a number, name or `(`")),
        }
    }

    fn allowed_names(&self) -> String {
        let mut names: Vec<&str> = self.allowed.iter().map(|v| v.name()).collect();
        names.extend(["pi", "e"]);
        names.extend(Func::ALL.iter().map(|f| f.name()));
        names.join(", ")
    }
}

fn integer(x: f64) -> Option<i64> {
    (x.fract() == 0.0 && x.abs() < 1e15).then_some(x as i64)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `k`, `-k`, `k/q`, `-k/q`, `-(k/q)` for integer literals.
fn literal_ratio(e: &Expr) -> Option<(i64, u64)> {
    match e {
        Expr::Num(x) => integer(*x).map(|k| (k, 1)),
        Expr::Neg(inner) => literal_ratio(inner).map(|(k, q)| (-k, q)),
        Expr::Div(a, b) => {
            let (k, one) = literal_ratio(a)?;
            let q = match **b {
                Expr::Num(x) => integer(x)?,
                _ => return None,
            };
            if one != 1 || q <= 0 {
                return None;
            }
            let q = q as u64;
            let g = gcd(k.unsigned_abs(), q).max(1);
            Some((k / g as i64, q / g))
        }
        _ => None,
    }
}
