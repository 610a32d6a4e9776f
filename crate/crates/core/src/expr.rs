//! Minimal arithmetic expressions in `x` (= `x1`), `x2` and `t`, used by
//! configuration files for `R`, `b`, `c` and `f`.
//!
//! Grammar: numbers, `+ - * /`, right-associative `^`, unary minus,
//! parentheses, the functions `sin cos exp sqrt abs log` and the constants
//! `pi` and `e`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::solvers::TimeFactor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X1,
    X2,
    T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Log,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Log => "log",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
            Func::Log => v.ln(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
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
            // exponent part, e.g. 1e-3
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
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| Error::Expression(format!("bad number '{text}'")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else if c == '(' {
            out.push(Token::LParen);
            i += 1;
        } else if c == ')' {
            out.push(Token::RParen);
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character '{c}' in '{src}'")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(op @ ('+' | '-'))) = self.peek().cloned() {
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

    // term := unary (('*' | '/') unary)*
    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(op @ ('*' | '/'))) = self.peek().cloned() {
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

    // unary := '-' unary | power
    fn unary(&mut self) -> Result<Expr> {
        if let Some(Token::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if let Some(Token::Op('+')) = self.peek() {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    // power := atom ('^' unary)?
    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Expr::Num(v)),
            Some(Token::LParen) => {
                let e = self.expr()?;
                match self.next() {
                    Some(Token::RParen) => Ok(e),
                    _ => Err(Error::Expression("missing ')'".into())),
                }
            }
            Some(Token::Ident(name)) => {
                let func = match name.as_str() {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "exp" => Some(Func::Exp),
                    "sqrt" => Some(Func::Sqrt),
                    "abs" => Some(Func::Abs),
                    "log" | "ln" => Some(Func::Log),
                    _ => None,
                };
                if let Some(f) = func {
                    match self.next() {
                        Some(Token::LParen) => {}
                        _ => return Err(Error::Expression(format!("'{name}' must be followed by '('"))),
                    }
                    let arg = self.expr()?;
                    match self.next() {
                        Some(Token::RParen) => {}
                        _ => return Err(Error::Expression("missing ')'".into())),
                    }
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                match name.as_str() {
                    "x" | "x1" => Ok(Expr::Var(Var::X1)),
                    "y" | "x2" => Ok(Expr::Var(Var::X2)),
                    "t" => Ok(Expr::Var(Var::T)),
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    "e" => Ok(Expr::Num(std::f64::consts::E)),
                    _ => Err(Error::Expression(format!("unknown identifier '{name}'"))),
                }
            }
            Some(tok) => Err(Error::Expression(format!("unexpected token {tok:?}"))),
            None => Err(Error::Expression("unexpected end of expression".into())),
        }
    }
}

fn num(v: f64) -> Expr {
    Expr::Num(v)
}

fn b(e: Expr) -> Box<Expr> {
    Box::new(e)
}

// Constructors folding trivial constants so derivatives stay readable.
fn add(a: Expr, c: Expr) -> Expr {
    match (&a, &c) {
        (Expr::Num(x), _) if *x == 0.0 => c,
        (_, Expr::Num(y)) if *y == 0.0 => a,
        (Expr::Num(x), Expr::Num(y)) => num(x + y),
        _ => Expr::Add(b(a), b(c)),
    }
}

fn sub(a: Expr, c: Expr) -> Expr {
    match (&a, &c) {
        (_, Expr::Num(y)) if *y == 0.0 => a,
        (Expr::Num(x), _) if *x == 0.0 => neg(c),
        (Expr::Num(x), Expr::Num(y)) => num(x - y),
        _ => Expr::Sub(b(a), b(c)),
    }
}

fn mul(a: Expr, c: Expr) -> Expr {
    match (&a, &c) {
        (Expr::Num(x), _) | (_, Expr::Num(x)) if *x == 0.0 => num(0.0),
        (Expr::Num(x), _) if *x == 1.0 => c,
        (_, Expr::Num(y)) if *y == 1.0 => a,
        (Expr::Num(x), Expr::Num(y)) => num(x * y),
        _ => Expr::Mul(b(a), b(c)),
    }
}

fn div(a: Expr, c: Expr) -> Expr {
    match (&a, &c) {
        (Expr::Num(x), _) if *x == 0.0 => num(0.0),
        (_, Expr::Num(y)) if *y == 1.0 => a,
        _ => Expr::Div(b(a), b(c)),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(x) => num(-x),
        other => Expr::Neg(b(other)),
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        if tokens.is_empty() {
            return Err(Error::Expression("empty expression".into()));
        }
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expression(format!("trailing input in '{src}'")));
        }
        Ok(e)
    }

    pub fn eval(&self, x: &Point, t: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X1) => x[0],
            Expr::Var(Var::X2) => x[1],
            Expr::Var(Var::T) => t,
            Expr::Neg(a) => -a.eval(x, t),
            Expr::Add(a, c) => a.eval(x, t) + c.eval(x, t),
            Expr::Sub(a, c) => a.eval(x, t) - c.eval(x, t),
            Expr::Mul(a, c) => a.eval(x, t) * c.eval(x, t),
            Expr::Div(a, c) => a.eval(x, t) / c.eval(x, t),
            Expr::Pow(a, c) => a.eval(x, t).powf(c.eval(x, t)),
            Expr::Call(f, a) => f.apply(a.eval(x, t)),
        }
    }

    pub fn depends_on(&self, v: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(v),
            Expr::Add(a, c) | Expr::Sub(a, c) | Expr::Mul(a, c) | Expr::Div(a, c) | Expr::Pow(a, c) => {
                a.depends_on(v) || c.depends_on(v)
            }
        }
    }

    /// Symbolic partial derivative.
    pub fn diff(&self, v: Var) -> Expr {
        if !self.depends_on(v) {
            return num(0.0);
        }
        match self {
            Expr::Num(_) => num(0.0),
            Expr::Var(w) => num(if *w == v { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff(v)),
            Expr::Add(a, c) => add(a.diff(v), c.diff(v)),
            Expr::Sub(a, c) => sub(a.diff(v), c.diff(v)),
            Expr::Mul(a, c) => add(mul(a.diff(v), (**c).clone()), mul((**a).clone(), c.diff(v))),
            Expr::Div(a, c) => div(
                sub(mul(a.diff(v), (**c).clone()), mul((**a).clone(), c.diff(v))),
                Expr::Pow(c.clone(), b(num(2.0))),
            ),
            Expr::Pow(a, c) => {
                if !c.depends_on(v) {
                    // c a^(c - 1) a'
                    mul(
                        mul((**c).clone(), Expr::Pow(a.clone(), b(sub((**c).clone(), num(1.0))))),
                        a.diff(v),
                    )
                } else {
                    // a^c (c' ln a + c a' / a)
                    mul(
                        self.clone(),
                        add(
                            mul(c.diff(v), Expr::Call(Func::Log, a.clone())),
                            div(mul((**c).clone(), a.diff(v)), (**a).clone()),
                        ),
                    )
                }
            }
            Expr::Call(f, a) => {
                let inner = a.diff(v);
                let outer = match f {
                    Func::Sin => Expr::Call(Func::Cos, a.clone()),
                    Func::Cos => neg(Expr::Call(Func::Sin, a.clone())),
                    Func::Exp => self.clone(),
                    Func::Sqrt => div(num(0.5), self.clone()),
                    Func::Abs => div((**a).clone(), self.clone()),
                    Func::Log => div(num(1.0), (**a).clone()),
                };
                mul(outer, inner)
            }
        }
    }

    /// `R(x, t)` with its exact time derivative.
    pub fn time_factor(&self, label: &str) -> TimeFactor {
        let r = self.clone();
        let r_t = self.diff(Var::T);
        TimeFactor::new(
            label,
            Arc::new(move |x: &Point, t: f64| r.eval(x, t)),
            Arc::new(move |x: &Point, t: f64| r_t.eval(x, t)),
        )
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(Var::X1) => write!(f, "x1"),
            Expr::Var(Var::X2) => write!(f, "x2"),
            Expr::Var(Var::T) => write!(f, "t"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, c) => write!(f, "({a} + {c})"),
            Expr::Sub(a, c) => write!(f, "({a} - {c})"),
            Expr::Mul(a, c) => write!(f, "({a} * {c})"),
            Expr::Div(a, c) => write!(f, "({a} / {c})"),
            Expr::Pow(a, c) => write!(f, "({a} ^ {c})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}
