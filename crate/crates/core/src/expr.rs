//! A small arithmetic expression language used for custom bivectors,
//! custom Hamiltonians and time profiles.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Identifiers: `x1..xn` (coordinates, 1-based), `t` (time), `p1..pk`
//! (family parameters), `pi`. Functions: `pow`, `exp`, `sin`, `cos`,
//! `sqrt`, `log`. The unicode operators `·`, `×` and `−` are accepted.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    /// Zero-based coordinate index.
    X(usize),
    T,
    /// Zero-based parameter index.
    P(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Sqrt,
    Log,
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
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Variable bindings for evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Env<'a> {
    pub x: &'a [f64],
    pub t: f64,
    pub p: &'a [f64],
}

impl<'a> Env<'a> {
    pub fn point(x: &'a [f64]) -> Self {
        Env { x, t: 0.0, p: &[] }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut parser = Parser { tokens, pos: 0 };
        let e = parser.expr()?;
        if let Some(tok) = parser.tokens.get(parser.pos) {
            return Err(Error::Parse {
                offset: tok.offset,
                message: format!("unexpected trailing token {:?}", tok.kind),
            });
        }
        Ok(e)
    }

    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn eval(&self, env: &Env<'_>) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(Var::X(i)) => env.x.get(*i).copied().unwrap_or(f64::NAN),
            Expr::Var(Var::T) => env.t,
            Expr::Var(Var::P(i)) => env.p.get(*i).copied().unwrap_or(f64::NAN),
            Expr::Neg(a) => -a.eval(env),
            Expr::Add(a, b) => a.eval(env) + b.eval(env),
            Expr::Sub(a, b) => a.eval(env) - b.eval(env),
            Expr::Mul(a, b) => a.eval(env) * b.eval(env),
            Expr::Div(a, b) => a.eval(env) / b.eval(env),
            Expr::Pow(a, b) => {
                let base = a.eval(env);
                match b.as_ref() {
                    Expr::Const(c) if c.fract() == 0.0 && c.abs() < 64.0 => base.powi(*c as i32),
                    _ => base.powf(b.eval(env)),
                }
            }
            Expr::Call(f, a) => {
                let v = a.eval(env);
                match f {
                    Func::Exp => v.exp(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Sqrt => v.sqrt(),
                    Func::Log => v.ln(),
                }
            }
        }
    }

    /// Largest coordinate index referenced plus one (0 if none).
    pub fn coordinate_arity(&self) -> usize {
        self.fold_vars(0, &|acc, v| match v {
            Var::X(i) => acc.max(i + 1),
            _ => acc,
        })
    }

    /// Largest parameter index referenced plus one (0 if none).
    pub fn parameter_arity(&self) -> usize {
        self.fold_vars(0, &|acc, v| match v {
            Var::P(i) => acc.max(i + 1),
            _ => acc,
        })
    }

    pub fn uses_time(&self) -> bool {
        self.fold_vars(false, &|acc, v| acc || v == Var::T)
    }

    fn fold_vars<A: Copy>(&self, acc: A, f: &dyn Fn(A, Var) -> A) -> A {
        match self {
            Expr::Const(_) => acc,
            Expr::Var(v) => f(acc, *v),
            Expr::Neg(a) | Expr::Call(_, a) => a.fold_vars(acc, f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                let acc = a.fold_vars(acc, f);
                b.fold_vars(acc, f)
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(Var::X(i)) => write!(f, "x{}", i + 1),
            Expr::Var(Var::T) => write!(f, "t"),
            Expr::Var(Var::P(i)) => write!(f, "p{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "pow({a}, {b})"),
            Expr::Call(func, a) => {
                let name = match func {
                    Func::Exp => "exp",
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                    Func::Sqrt => "sqrt",
                    Func::Log => "log",
                };
                write!(f, "{name}({a})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    while let Some(&(offset, c)) = chars.peek() {
        let kind = match c {
            c if c.is_whitespace() => {
                chars.next();
                continue;
            }
            '+' => TokenKind::Plus,
            '-' | '−' => TokenKind::Minus,
            '*' | '·' | '×' => TokenKind::Star,
            '/' => TokenKind::Slash,
            '^' => TokenKind::Caret,
            '(' => TokenKind::LParen,
            ')' => TokenKind::RParen,
            ',' => TokenKind::Comma,
            c if c.is_ascii_digit() || c == '.' => {
                let mut end = offset;
                let mut prev = ' ';
                while let Some(&(i, d)) = chars.peek() {
                    let exp_sign = (d == '+' || d == '-') && (prev == 'e' || prev == 'E');
                    if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                        end = i + d.len_utf8();
                        prev = d;
                        chars.next();
                    } else {
                        break;
                    }
                }
                let text = &src[offset..end];
                let v: f64 = text.parse().map_err(|_| Error::Parse {
                    offset,
                    message: format!("bad number `{text}`"),
                })?;
                out.push(Token {
                    kind: TokenKind::Num(v),
                    offset,
                });
                continue;
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut end = offset;
                while let Some(&(i, d)) = chars.peek() {
                    if d.is_alphanumeric() || d == '_' {
                        end = i + d.len_utf8();
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(Token {
                    kind: TokenKind::Ident(src[offset..end].to_string()),
                    offset,
                });
                continue;
            }
            other => {
                return Err(Error::Parse {
                    offset,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        chars.next();
        out.push(Token { kind, offset });
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|t| t.offset)
            .or_else(|| self.tokens.last().map(|t| t.offset + 1))
            .unwrap_or(0)
    }

    fn expect(&mut self, kind: TokenKind) -> Result<()> {
        if self.peek() == Some(&kind) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Parse {
                offset: self.offset(),
                message: format!("expected {kind:?}"),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(TokenKind::Plus) => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(TokenKind::Minus) => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(TokenKind::Star) => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(TokenKind::Slash) => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(&TokenKind::Minus) {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(&TokenKind::Caret) {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let offset = self.offset();
        let tok = self.tokens.get(self.pos).cloned().ok_or(Error::Parse {
            offset,
            message: "unexpected end of expression".into(),
        })?;
        self.pos += 1;
        match tok.kind {
            TokenKind::Num(v) => Ok(Expr::Const(v)),
            TokenKind::LParen => {
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            TokenKind::Ident(name) => {
                if self.peek() == Some(&TokenKind::LParen) {
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while self.peek() == Some(&TokenKind::Comma) {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(TokenKind::RParen)?;
                    return call(&name, args, tok.offset);
                }
                variable(&name, tok.offset)
            }
            other => Err(Error::Parse {
                offset: tok.offset,
                message: format!("unexpected token {other:?}"),
            }),
        }
    }
}

fn call(name: &str, mut args: Vec<Expr>, offset: usize) -> Result<Expr> {
    let arity_err = |n: usize| Error::Parse {
        offset,
        message: format!("`{name}` takes {n} argument(s)"),
    };
    if name == "pow" {
        if args.len() != 2 {
            return Err(arity_err(2));
        }
        let exp = args.pop().unwrap();
        let base = args.pop().unwrap();
        return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
    }
    let func = match name {
        "exp" => Func::Exp,
        "sin" => Func::Sin,
        "cos" => Func::Cos,
        "sqrt" => Func::Sqrt,
        "log" | "ln" => Func::Log,
        _ => {
            return Err(Error::Parse {
                offset,
                message: format!("unknown function `{name}`"),
            })
        }
    };
    if args.len() != 1 {
        return Err(arity_err(1));
    }
    Ok(Expr::Call(func, Box::new(args.pop().unwrap())))
}

fn variable(name: &str, offset: usize) -> Result<Expr> {
    let indexed = |prefix: char| -> Option<usize> {
        let rest = name.strip_prefix(prefix)?;
        let i: usize = rest.parse().ok()?;
        (i >= 1).then(|| i - 1)
    };
    match name {
        "t" => Ok(Expr::Var(Var::T)),
        "pi" => Ok(Expr::Const(std::f64::consts::PI)),
        _ => {
            if let Some(i) = indexed('x') {
                Ok(Expr::Var(Var::X(i)))
            } else if let Some(i) = indexed('p') {
                Ok(Expr::Var(Var::P(i)))
            } else {
                Err(Error::Parse {
                    offset,
                    message: format!("unknown identifier `{name}`"),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: &[f64]) -> f64 {
        Expr::parse(src).unwrap().eval(&Env::point(x))
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", &[]), 7.0);
        assert_eq!(ev("(1 + 2) * 3", &[]), 9.0);
        assert_eq!(ev("8 / 4 / 2", &[]), 1.0);
        assert_eq!(ev("2 ^ 3 ^ 2", &[]), 512.0);
        assert_eq!(ev("-2 ^ 2", &[]), -4.0);
        assert_eq!(ev("x1 - x2 - x3", &[1.0, 2.0, 3.0]), -4.0);
    }

    #[test]
    fn unicode_operators() {
        assert_eq!(ev("x1 · x2 − 1", &[2.0, 3.0]), 5.0);
    }

    #[test]
    fn functions_and_constants() {
        assert!((ev("sin(pi / 2) + cos(0) + exp(0)", &[]) - 3.0).abs() < 1e-15);
        assert_eq!(ev("pow(x1, 2)", &[3.0]), 9.0);
        assert_eq!(ev("sqrt(16)", &[]), 4.0);
        assert!((ev("1.5e-1 + 2E1", &[]) - 20.15).abs() < 1e-12);
    }

    #[test]
    fn arity_bookkeeping() {
        let e = Expr::parse("x3 * p2 + t").unwrap();
        assert_eq!(e.coordinate_arity(), 3);
        assert_eq!(e.parameter_arity(), 2);
        assert!(e.uses_time());
    }

    #[test]
    fn parse_errors_carry_offsets() {
        match Expr::parse("1 + $") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Expr::parse("foo(1)").is_err());
        assert!(Expr::parse("x0").is_err());
        assert!(Expr::parse("(1 + 2").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("pow(1)").is_err());
    }

    #[test]
    fn display_round_trips_through_parse() {
        let e = Expr::parse("x1 * exp(-(x1^2 + x2^2)) / (1 + t)").unwrap();
        let again = Expr::parse(&e.to_string()).unwrap();
        let env = Env {
            x: &[0.3, -0.7],
            t: 0.25,
            p: &[],
        };
        assert_eq!(e.eval(&env), again.eval(&env));
    }
}
