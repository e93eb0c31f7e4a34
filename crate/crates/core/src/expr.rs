//! Coordinate expressions used by metric specs.
//!
//! Grammar (usual precedence, `^` binds tightest and takes an integer):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' ['-'] integer)?
//! atom  := number | var | func '(' expr ')' | '(' expr ')'
//! var   := x1..x9 | y1..y9 | r | r2 | u | v | pi
//! func  := sqrt | ln | log | exp
//! ```
//!
//! `r = |x|`, `r2 = |x|^2`, `u = |y|`, `v = <x, y>`.

use std::fmt;

use crate::error::{Error, Result};
use crate::jet::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X(usize),
    Y(usize),
    R,
    R2,
    U,
    V,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Powi(Box<Expr>, i32),
    Sqrt(Box<Expr>),
    Ln(Box<Expr>),
    Exp(Box<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(Var::X(i)) => write!(f, "x{}", i + 1),
            Expr::Var(Var::Y(i)) => write!(f, "y{}", i + 1),
            Expr::Var(Var::R) => write!(f, "r"),
            Expr::Var(Var::R2) => write!(f, "r2"),
            Expr::Var(Var::U) => write!(f, "u"),
            Expr::Var(Var::V) => write!(f, "v"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Powi(a, k) => write!(f, "({a}^{k})"),
            Expr::Sqrt(a) => write!(f, "sqrt({a})"),
            Expr::Ln(a) => write!(f, "ln({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

/// Which variable groups an expression reads.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Uses {
    pub x: bool,
    pub y: bool,
    pub r: bool,
    pub max_index: usize,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let toks = lex(src)?;
        let mut p = Parser { toks, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(Error::Expr(format!(
                "unexpected `{}` in `{src}`",
                p.toks[p.pos]
            )));
        }
        Ok(e)
    }

    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn uses(&self) -> Uses {
        let mut u = Uses::default();
        self.walk(&mut |e| {
            if let Expr::Var(v) = e {
                match *v {
                    Var::X(i) => {
                        u.x = true;
                        u.max_index = u.max_index.max(i + 1);
                    }
                    Var::Y(i) => {
                        u.y = true;
                        u.max_index = u.max_index.max(i + 1);
                    }
                    Var::R => {
                        u.x = true;
                        u.r = true;
                    }
                    Var::R2 => u.x = true,
                    Var::U => u.y = true,
                    Var::V => {
                        u.x = true;
                        u.y = true;
                    }
                }
            }
        });
        u
    }

    fn walk(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Const(_) | Expr::Var(_) => {}
            Expr::Neg(a) | Expr::Powi(a, _) | Expr::Sqrt(a) | Expr::Ln(a) | Expr::Exp(a) => {
                a.walk(f)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.walk(f);
                b.walk(f);
            }
        }
    }

    /// Constant value if the expression reads no variables.
    pub fn as_constant(&self) -> Option<f64> {
        let u = self.uses();
        if u.x || u.y {
            return None;
        }
        self.eval::<f64>(&[0.0], &[]).ok()
    }

    /// Evaluates at `(x, y)`; `x` and `y` may be empty if unused.
    pub fn eval<T: Scalar>(&self, x: &[T], y: &[T]) -> Result<T> {
        let one = x
            .first()
            .or(y.first())
            .map(|t| t.lift(1.0));
        let env = Env { x, y, one };
        self.ev(&env)
    }

    fn ev<T: Scalar>(&self, env: &Env<'_, T>) -> Result<T> {
        Ok(match self {
            Expr::Const(c) => env.constant(*c)?,
            Expr::Var(v) => env.var(*v)?,
            Expr::Neg(a) => -a.ev(env)?,
            Expr::Add(a, b) => a.ev(env)? + b.ev(env)?,
            Expr::Sub(a, b) => a.ev(env)? - b.ev(env)?,
            Expr::Mul(a, b) => a.ev(env)? * b.ev(env)?,
            Expr::Div(a, b) => a.ev(env)? * b.ev(env)?.try_recip()?,
            Expr::Powi(a, k) => a.ev(env)?.powi(*k)?,
            Expr::Sqrt(a) => a.ev(env)?.try_sqrt()?,
            Expr::Ln(a) => a.ev(env)?.try_ln()?,
            Expr::Exp(a) => a.ev(env)?.exp(),
        })
    }
}

struct Env<'a, T> {
    x: &'a [T],
    y: &'a [T],
    one: Option<T>,
}

impl<T: Scalar> Env<'_, T> {
    fn constant(&self, c: f64) -> Result<T> {
        match &self.one {
            Some(o) => Ok(o.lift(c)),
            None => Err(Error::Expr("no variables to evaluate against".into())),
        }
    }

    fn var(&self, v: Var) -> Result<T> {
        let get = |s: &[T], i: usize, name: &str| -> Result<T> {
            s.get(i)
                .cloned()
                .ok_or_else(|| Error::Expr(format!("{name}{} out of range", i + 1)))
        };
        let sq = |s: &[T]| -> Result<T> {
            let mut acc = self.constant(0.0)?;
            for t in s {
                acc = acc + t.clone() * t.clone();
            }
            Ok(acc)
        };
        match v {
            Var::X(i) => get(self.x, i, "x"),
            Var::Y(i) => get(self.y, i, "y"),
            Var::R2 => sq(self.x),
            Var::R => sq(self.x)?.try_sqrt(),
            Var::U => sq(self.y)?.try_sqrt(),
            Var::V => {
                let mut acc = self.constant(0.0)?;
                for (a, b) in self.x.iter().zip(self.y) {
                    acc = acc + a.clone() * b.clone();
                }
                Ok(acc)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "{v}"),
            Tok::Ident(s) => write!(f, "{s}"),
            Tok::Op(c) => write!(f, "{c}"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| Error::Expr(format!("bad number `{s}`")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Expr(format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek_op(&self) -> Option<char> {
        match self.toks.get(self.pos) {
            Some(Tok::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek_op() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Expr(format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.peek_op() == Some('+') {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek_op() != Some('^') {
            return Ok(base);
        }
        self.pos += 1;
        let mut sign = 1;
        let mut parens = false;
        if self.peek_op() == Some('(') {
            parens = true;
            self.pos += 1;
        }
        if self.peek_op() == Some('-') {
            sign = -1;
            self.pos += 1;
        }
        let k = match self.toks.get(self.pos) {
            Some(Tok::Num(v)) if v.fract() == 0.0 && v.abs() < 64.0 => *v as i32,
            Some(t) => return Err(Error::Expr(format!("exponent must be an integer, got `{t}`"))),
            None => return Err(Error::Expr("missing exponent".into())),
        };
        self.pos += 1;
        if parens {
            self.expect(')')?;
        }
        Ok(Expr::Powi(Box::new(base), sign * k))
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self
            .toks
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Expr("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Op(c) => Err(Error::Expr(format!("unexpected `{c}`"))),
            Tok::Ident(name) => {
                if let Some(f) = func(&name) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(f(Box::new(arg)));
                }
                variable(&name)
            }
        }
    }
}

fn func(name: &str) -> Option<fn(Box<Expr>) -> Expr> {
    match name {
        "sqrt" => Some(Expr::Sqrt),
        "ln" | "log" => Some(Expr::Ln),
        "exp" => Some(Expr::Exp),
        _ => None,
    }
}

fn variable(name: &str) -> Result<Expr> {
    let indexed = |prefix: char| -> Option<usize> {
        let rest = name.strip_prefix(prefix)?;
        let i: usize = rest.parse().ok()?;
        (1..=9).contains(&i).then_some(i - 1)
    };
    if let Some(i) = indexed('x') {
        return Ok(Expr::Var(Var::X(i)));
    }
    if let Some(i) = indexed('y') {
        return Ok(Expr::Var(Var::Y(i)));
    }
    match name {
        "r" => Ok(Expr::Var(Var::R)),
        "r2" => Ok(Expr::Var(Var::R2)),
        "u" => Ok(Expr::Var(Var::U)),
        "v" => Ok(Expr::Var(Var::V)),
        "pi" => Ok(Expr::Const(std::f64::consts::PI)),
        _ => Err(Error::Expr(format!("unknown identifier `{name}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: &[f64], y: &[f64]) -> f64 {
        Expr::parse(s).unwrap().eval(x, y).unwrap()
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("1 + 2*3", &[0.0], &[]), 7.0);
        assert_eq!(ev("-2^2", &[0.0], &[]), -4.0);
        assert_eq!(ev("(1+1)^-2", &[0.0], &[]), 0.25);
        assert_eq!(ev("2^(-1)", &[0.0], &[]), 0.5);
        assert_eq!(ev("8/2/2", &[0.0], &[]), 2.0);
    }

    #[test]
    fn variables() {
        let x = [0.3, 0.4];
        let y = [1.0, 2.0];
        assert!((ev("r", &x, &y) - 0.5).abs() < 1e-15);
        assert!((ev("r2", &x, &y) - 0.25).abs() < 1e-15);
        assert!((ev("v", &x, &y) - 1.1).abs() < 1e-15);
        assert!((ev("u^2", &x, &y) - 5.0).abs() < 1e-14);
        assert!((ev("x2*y1 + exp(0)", &x, &y) - 1.4).abs() < 1e-15);
        assert!((ev("4/(1+r2)^2", &x, &y) - 4.0 / 1.5625).abs() < 1e-15);
    }

    #[test]
    fn rejects_unknown_input() {
        assert!(Expr::parse("abs(x1)").is_err());
        assert!(Expr::parse("x1^0.5").is_err());
        assert!(Expr::parse("x1 +").is_err());
        assert!(Expr::parse("sin(x1)").is_err());
        assert!(Expr::parse("z").is_err());
        assert!(Expr::parse("(x1").is_err());
    }

    #[test]
    fn uses_and_constants() {
        let e = Expr::parse("x1*y2").unwrap();
        let u = e.uses();
        assert!(u.x && u.y && u.max_index == 2);
        assert_eq!(Expr::parse("2*3").unwrap().as_constant(), Some(6.0));
        assert_eq!(Expr::parse("x1").unwrap().as_constant(), None);
    }

    #[test]
    fn domain_errors_propagate() {
        let e = Expr::parse("sqrt(x1)").unwrap();
        assert!(e.eval(&[-1.0], &[]).is_err());
        let e = Expr::parse("ln(x1)").unwrap();
        assert!(e.eval(&[0.0], &[]).is_err());
    }
}
