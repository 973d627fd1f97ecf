//! Metric component expressions: a small recursive-descent parser, a
//! pretty-printer that reparses to the same tree, and evaluation to plain
//! floats or to jets.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := base ('^' '-'? number)?
//! base   := number | ident | func '(' expr ')' | '(' expr ')' | '-' base
//! ```
//!
//! `pi` is a predefined constant; every other identifier must be one of the
//! four chart coordinates.

use std::fmt;

use thiserror::Error;

use crate::jet::{Elementary, Jet, JetError, MAX_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
    ];

    pub fn name(self) -> &'static str {
        self.elementary().name()
    }

    fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }

    fn elementary(self) -> Elementary {
        match self {
            Func::Sin => Elementary::Sin,
            Func::Cos => Elementary::Cos,
            Func::Tan => Elementary::Tan,
            Func::Exp => Elementary::Exp,
            Func::Log => Elementary::Log,
            Func::Sqrt => Elementary::Sqrt,
            Func::Sinh => Elementary::Sinh,
            Func::Cosh => Elementary::Cosh,
            Func::Tanh => Elementary::Tanh,
        }
    }

    fn apply_f64(self, x: f64) -> Result<f64, JetError> {
        let domain = |func| JetError::Domain { func, value: x };
        Ok(match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Exp => x.exp(),
            Func::Log if x > 0.0 => x.ln(),
            Func::Log => return Err(domain("log")),
            Func::Sqrt if x > 0.0 => x.sqrt(),
            Func::Sqrt => return Err(domain("sqrt")),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Tanh => x.tanh(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

/// Expression tree. Coordinates are stored by chart axis.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Coord(usize),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// Base raised to a literal exponent.
    Pow(Box<Expr>, f64),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at {pos}: {message}; expected {expected}")]
    Syntax {
        pos: usize,
        message: String,
        expected: String,
    },
    #[error("unbalanced parenthesis at end")]
    UnbalancedParen,
    #[error("unknown identifier \"{0}\"")]
    UnknownIdentifier(String),
    #[error("unknown function \"{0}\"")]
    UnknownFunction(String),
    #[error("exponent at {0} must be a literal number")]
    NonLiteralExponent(usize),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                pos: start,
                message: format!("malformed number \"{text}\""),
                expected: "a number".into(),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => {
                    return Err(ParseError::Syntax {
                        pos: start,
                        message: format!("unexpected character '{c}'"),
                        expected: "an operator, number, identifier or parenthesis".into(),
                    })
                }
            };
            i += 1;
            out.push((start, tok));
        }
    }
    out.push((src.len(), Tok::End));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    coords: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn at(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax(&self, expected: &str) -> ParseError {
        if *self.peek() == Tok::End {
            let opens = self.toks.iter().filter(|t| t.1 == Tok::LParen).count();
            let closes = self.toks.iter().filter(|t| t.1 == Tok::RParen).count();
            if opens > closes {
                return ParseError::UnbalancedParen;
            }
        }
        ParseError::Syntax {
            pos: self.at(),
            message: format!("unexpected {}", describe(self.peek())),
            expected: expected.into(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Tok::Op(c @ ('+' | '-')) = *self.peek() {
            self.bump();
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        while let Tok::Op(c @ ('*' | '/')) = *self.peek() {
            self.bump();
            let rhs = self.factor()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.base()?;
        if *self.peek() != Tok::Op('^') {
            return Ok(base);
        }
        self.bump();
        let at = self.at();
        let negative = if *self.peek() == Tok::Op('-') {
            self.bump();
            true
        } else {
            false
        };
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Pow(Box::new(base), if negative { -v } else { v })),
            Tok::End => Err(self.syntax("a literal exponent")),
            _ => Err(ParseError::NonLiteralExponent(at)),
        }
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::Op('-') => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.base()?)))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.syntax("')'"));
                }
                self.bump();
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    let func = Func::from_name(&name)
                        .ok_or_else(|| ParseError::UnknownFunction(name.clone()))?;
                    self.bump();
                    let arg = self.expr()?;
                    if *self.peek() != Tok::RParen {
                        return Err(self.syntax("')'"));
                    }
                    self.bump();
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                if let Some(axis) = self.coords.iter().position(|c| *c == name) {
                    Ok(Expr::Coord(axis))
                } else if name == "pi" {
                    Ok(Expr::Num(std::f64::consts::PI))
                } else if Func::from_name(&name).is_some() {
                    Err(self.syntax("'(' after a function name"))
                } else {
                    Err(ParseError::UnknownIdentifier(name))
                }
            }
            _ => Err(self.syntax("a number, identifier, '(' or '-'")),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier \"{s}\""),
        Tok::Op(c) => format!("'{c}'"),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::End => "end of input".into(),
    }
}

/// Parse `source` with the given coordinate names (axis order).
pub fn parse_expr(source: &str, coords: &[String]) -> Result<Expr, ParseError> {
    if source.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let toks = lex(source)?;
    let mut p = Parser {
        toks,
        pos: 0,
        coords,
    };
    let e = p.expr()?;
    match p.peek() {
        Tok::End => Ok(e),
        Tok::RParen => Err(ParseError::Syntax {
            pos: p.at(),
            message: "unmatched ')'".into(),
            expected: "an operator or end of input".into(),
        }),
        _ => Err(p.syntax("an operator or end of input")),
    }
}

/// Convenience for the ubiquitous `&[&str]` coordinate lists.
pub fn parse_with(source: &str, coords: &[&str]) -> Result<Expr, ParseError> {
    let owned: Vec<String> = coords.iter().map(|s| s.to_string()).collect();
    parse_expr(source, &owned)
}

/// Which chart axes carry a jet variable during evaluation.
pub type ActiveAxes = [bool; MAX_DIM];

pub const ALL_AXES: ActiveAxes = [true; MAX_DIM];
pub const TANGENTIAL_AXES: ActiveAxes = [false, true, true, true];

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Binary(BinOp::Add, Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Binary(BinOp::Mul, Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    /// True when the tree is the literal zero.
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    /// Highest coordinate axis referenced, if any.
    pub fn max_axis(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Coord(a) => Some(*a),
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Call(_, e) => e.max_axis(),
            Expr::Binary(_, a, b) => match (a.max_axis(), b.max_axis()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    pub fn uses_axis(&self, axis: usize) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Coord(a) => *a == axis,
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Call(_, e) => e.uses_axis(axis),
            Expr::Binary(_, a, b) => a.uses_axis(axis) || b.uses_axis(axis),
        }
    }

    /// Replace coordinate `axis` by a fixed value.
    pub fn substitute(&self, axis: usize, value: f64) -> Expr {
        match self {
            Expr::Coord(a) if *a == axis => Expr::Num(value),
            Expr::Num(_) | Expr::Coord(_) => self.clone(),
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute(axis, value))),
            Expr::Pow(e, p) => Expr::Pow(Box::new(e.substitute(axis, value)), *p),
            Expr::Call(f, e) => Expr::Call(*f, Box::new(e.substitute(axis, value))),
            Expr::Binary(op, a, b) => Expr::Binary(
                *op,
                Box::new(a.substitute(axis, value)),
                Box::new(b.substitute(axis, value)),
            ),
        }
    }

    pub fn eval(&self, x: &[f64; MAX_DIM]) -> Result<f64, JetError> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Coord(a) => x[*a],
            Expr::Neg(e) => -e.eval(x)?,
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval(x)?, b.eval(x)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div if b.abs() < 1e-300 => return Err(JetError::Singular(b)),
                    BinOp::Div => a / b,
                }
            }
            Expr::Pow(e, p) => {
                let b = e.eval(x)?;
                if p.fract() != 0.0 && b <= 0.0 {
                    return Err(JetError::Domain { func: "pow", value: b });
                }
                if p.fract() == 0.0 && p.abs() <= 64.0 {
                    b.powi(*p as i32)
                } else {
                    b.powf(*p)
                }
            }
            Expr::Call(f, e) => f.apply_f64(e.eval(x)?)?,
        })
    }

    /// Jet of the expression at `x` with seeds on the `active` axes.
    pub fn eval_jet(
        &self,
        x: &[f64; MAX_DIM],
        order: usize,
        active: ActiveAxes,
    ) -> Result<Jet, JetError> {
        let seeds = seed_jets(x, order, active)?;
        self.eval_with(&seeds)
    }

    /// Evaluate with precomputed coordinate jets (one per chart axis).
    pub fn eval_with(&self, seeds: &[Jet; MAX_DIM]) -> Result<Jet, JetError> {
        let order = seeds[0].order();
        Ok(match self {
            Expr::Num(v) => Jet::constant_unchecked(*v, MAX_DIM, order),
            Expr::Coord(a) => seeds[*a].clone(),
            Expr::Neg(e) => -e.eval_with(seeds)?,
            Expr::Binary(op, a, b) => {
                // constant operands are common (coefficients in components)
                if let (BinOp::Mul, Expr::Num(c)) = (op, a.as_ref()) {
                    return Ok(b.eval_with(seeds)?.scale(*c));
                }
                let (a, b) = (a.eval_with(seeds)?, b.eval_with(seeds)?);
                match op {
                    BinOp::Add => &a + &b,
                    BinOp::Sub => &a - &b,
                    BinOp::Mul => &a * &b,
                    BinOp::Div => a.checked_div(&b)?,
                }
            }
            Expr::Pow(e, p) => e.eval_with(seeds)?.powf(*p)?,
            Expr::Call(f, e) => {
                crate::jet::jet_elementary(f.elementary(), &e.eval_with(seeds)?, None)?
            }
        })
    }

    /// Render with the given coordinate names; the output reparses to the
    /// same tree.
    pub fn display<'a>(&'a self, coords: &'a [String]) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, coords }
    }
}

/// Coordinate jets at `x`; inactive axes become constants.
pub fn seed_jets(
    x: &[f64; MAX_DIM],
    order: usize,
    active: ActiveAxes,
) -> Result<[Jet; MAX_DIM], JetError> {
    let mk = |a: usize| -> Result<Jet, JetError> {
        if active[a] {
            Jet::variable(x, a, MAX_DIM, order)
        } else {
            Jet::constant(x[a], MAX_DIM, order)
        }
    };
    Ok([mk(0)?, mk(1)?, mk(2)?, mk(3)?])
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    coords: &'a [String],
}

impl ExprDisplay<'_> {
    fn write(&self, e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match e {
            Expr::Num(v) if *v < 0.0 => write!(f, "(-{})", -v),
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Coord(a) => match self.coords.get(*a) {
                Some(name) => write!(f, "{name}"),
                None => write!(f, "x{a}"),
            },
            Expr::Neg(inner) => {
                write!(f, "-")?;
                self.atom(inner, f)
            }
            Expr::Binary(op, a, b) => {
                write!(f, "(")?;
                self.write(a, f)?;
                write!(f, " {} ", op.symbol())?;
                self.write(b, f)?;
                write!(f, ")")
            }
            Expr::Pow(b, p) => {
                self.atom(b, f)?;
                if *p < 0.0 {
                    write!(f, "^-{}", -p)
                } else {
                    write!(f, "^{p}")
                }
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                self.write(a, f)?;
                write!(f, ")")
            }
        }
    }

    /// Write `e` so that it binds as a `base`.
    fn atom(&self, e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match e {
            Expr::Num(v) if *v >= 0.0 => self.write(e, f),
            Expr::Coord(_) | Expr::Call(..) | Expr::Binary(..) => self.write(e, f),
            _ => {
                write!(f, "(")?;
                self.write(e, f)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.expr, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn coords() -> Vec<String> {
        ["r", "a", "b", "c"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_power_of_call() {
        let e = parse_expr("cos(r)^2", &coords()).unwrap();
        assert_eq!(
            e,
            Expr::Pow(Box::new(Expr::Call(Func::Cos, Box::new(Expr::Coord(0)))), 2.0)
        );
    }

    #[test]
    fn reports_unbalanced_paren() {
        let err = parse_expr("1/(1 - a^2", &coords()).unwrap_err();
        assert_eq!(err, ParseError::UnbalancedParen);
        assert_eq!(err.to_string(), "unbalanced parenthesis at end");
    }

    #[test]
    fn reports_unknown_identifier_and_function() {
        assert_eq!(
            parse_expr("2*pi*q", &coords()).unwrap_err(),
            ParseError::UnknownIdentifier("q".into())
        );
        assert_eq!(
            parse_expr("erf(r)", &coords()).unwrap_err(),
            ParseError::UnknownFunction("erf".into())
        );
        assert!(matches!(
            parse_expr("r^a", &coords()).unwrap_err(),
            ParseError::NonLiteralExponent(_)
        ));
        assert!(matches!(
            parse_expr("r + * a", &coords()).unwrap_err(),
            ParseError::Syntax { pos: 4, .. }
        ));
        assert_eq!(parse_expr("   ", &coords()).unwrap_err(), ParseError::Empty);
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = parse_expr("-a^2 + 2*b/c - (r)", &coords()).unwrap();
        let x = [0.5, 3.0, 2.0, 4.0];
        // '-' base binds tighter than '^': (-a)^2
        assert_relative_eq!(e.eval(&x).unwrap(), 9.0 + 1.0 - 0.5);
    }

    #[test]
    fn evaluates_cos_squared_series() {
        let e = parse_expr("cos(r)^2", &coords()).unwrap();
        let j = e.eval_jet(&[0.0; 4], 4, ALL_AXES).unwrap();
        assert_relative_eq!(j.value(), 1.0);
        let c = |ex| j.coeff(&crate::jet::MultiIndex(ex)).unwrap();
        assert_relative_eq!(c([2, 0, 0, 0]), -1.0, epsilon = 1e-15);
        assert_relative_eq!(c([4, 0, 0, 0]), 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(c([1, 0, 0, 0]), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn exp_of_zero_is_constant_one() {
        let e = parse_expr("exp(0*r)", &coords()).unwrap();
        let j = e.eval_jet(&[0.7, 0.1, 0.2, 0.3], 3, ALL_AXES).unwrap();
        assert_eq!(j.value(), 1.0);
        assert!(j.coeffs()[1..].iter().all(|c| *c == 0.0));
    }

    #[test]
    fn domain_error_propagates() {
        let e = parse_expr("sqrt(r-1)", &coords()).unwrap();
        assert!(matches!(
            e.eval_jet(&[0.0; 4], 2, ALL_AXES),
            Err(JetError::Domain { func: "sqrt", .. })
        ));
    }

    #[test]
    fn display_reparses() {
        let c = coords();
        for src in ["-a^2", "(-a)^-3", "exp(-(r*a))/2", "1e-3*b - 2.5", "sin(-r)^2*c"] {
            let e = parse_expr(src, &c).unwrap();
            let printed = e.display(&c).to_string();
            assert_eq!(parse_expr(&printed, &c).unwrap(), e, "{src} -> {printed}");
        }
    }
}
