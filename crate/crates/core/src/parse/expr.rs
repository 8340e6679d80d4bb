//! Arithmetic expressions and boolean conditions shared by both input formats.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use super::lexer::{Cursor, Tok};
use crate::error::ParseError;
use crate::poly::{Polynomial, Rational, Var};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Int(BigInt),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// Division by a nonzero integer literal (rational coefficients).
    Div(Box<Expr>, BigInt),
    Pow(Box<Expr>, u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    fn from_sym(s: &str) -> Option<CmpOp> {
        Some(match s {
            "<" => CmpOp::Lt,
            "<=" => CmpOp::Le,
            ">" => CmpOp::Gt,
            ">=" => CmpOp::Ge,
            "==" => CmpOp::Eq,
            "!=" => CmpOp::Ne,
            _ => return None,
        })
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    fn negate(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Cond {
    True,
    False,
    Cmp(Expr, CmpOp, Expr),
    Not(Box<Cond>),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

pub struct ExprOptions {
    pub allow_div: bool,
}

pub fn parse_expr(c: &mut Cursor, opts: &ExprOptions) -> Result<Expr, ParseError> {
    let mut lhs = parse_term(c, opts)?;
    loop {
        if c.is_sym("+") {
            c.bump();
            lhs = Expr::Add(Box::new(lhs), Box::new(parse_term(c, opts)?));
        } else if c.is_sym("-") {
            c.bump();
            lhs = Expr::Sub(Box::new(lhs), Box::new(parse_term(c, opts)?));
        } else {
            return Ok(lhs);
        }
    }
}

fn parse_term(c: &mut Cursor, opts: &ExprOptions) -> Result<Expr, ParseError> {
    let mut lhs = parse_unary(c, opts)?;
    loop {
        if c.eat_sym("*") {
            lhs = Expr::Mul(Box::new(lhs), Box::new(parse_unary(c, opts)?));
        } else if c.is_sym("/") {
            if !opts.allow_div {
                let (line, col) = c.here();
                return Err(ParseError::Unsupported {
                    line,
                    col,
                    what: "division".into(),
                });
            }
            c.bump();
            match c.bump() {
                Tok::Int(n) if !n.is_zero() => lhs = Expr::Div(Box::new(lhs), n),
                _ => return Err(c.err("division is only allowed by a nonzero integer literal")),
            }
        } else {
            return Ok(lhs);
        }
    }
}

fn parse_unary(c: &mut Cursor, opts: &ExprOptions) -> Result<Expr, ParseError> {
    if c.eat_sym("-") {
        return Ok(Expr::Neg(Box::new(parse_unary(c, opts)?)));
    }
    let base = parse_atom(c, opts)?;
    if c.eat_sym("^") {
        let e = match c.bump() {
            Tok::Int(n) => n.to_u32().ok_or_else(|| c.err("exponent too large"))?,
            _ => return Err(c.err("expected integer exponent")),
        };
        return Ok(Expr::Pow(Box::new(base), e));
    }
    Ok(base)
}

fn parse_atom(c: &mut Cursor, opts: &ExprOptions) -> Result<Expr, ParseError> {
    match c.peek().clone() {
        Tok::Int(n) => {
            c.bump();
            Ok(Expr::Int(n))
        }
        Tok::Ident(s) => {
            c.bump();
            if c.is_sym("(") {
                let (line, col) = c.here();
                return Err(ParseError::Unsupported {
                    line,
                    col,
                    what: format!("function call `{s}(...)`"),
                });
            }
            if c.is_sym("[") {
                let (line, col) = c.here();
                return Err(ParseError::Unsupported {
                    line,
                    col,
                    what: format!("array access `{s}[...]`"),
                });
            }
            Ok(Expr::Var(s))
        }
        Tok::Sym("(") => {
            c.bump();
            let e = parse_expr(c, opts)?;
            c.expect_sym(")")?;
            Ok(e)
        }
        _ => Err(c.err(format!("expected expression, found {}", c.describe()))),
    }
}

pub fn parse_cond(c: &mut Cursor, opts: &ExprOptions) -> Result<Cond, ParseError> {
    let mut lhs = parse_conj(c, opts)?;
    while c.eat_sym("||") {
        lhs = Cond::Or(Box::new(lhs), Box::new(parse_conj(c, opts)?));
    }
    Ok(lhs)
}

fn parse_conj(c: &mut Cursor, opts: &ExprOptions) -> Result<Cond, ParseError> {
    let mut lhs = parse_cond_atom(c, opts)?;
    while c.eat_sym("&&") {
        lhs = Cond::And(Box::new(lhs), Box::new(parse_cond_atom(c, opts)?));
    }
    Ok(lhs)
}

fn parse_cond_atom(c: &mut Cursor, opts: &ExprOptions) -> Result<Cond, ParseError> {
    if c.eat_sym("!") {
        return Ok(Cond::Not(Box::new(parse_cond_atom(c, opts)?)));
    }
    if c.eat_kw("true") {
        return Ok(Cond::True);
    }
    if c.eat_kw("false") {
        return Ok(Cond::False);
    }
    if c.is_sym("(") {
        // Either a parenthesized condition or a comparison whose left
        // operand starts with a parenthesis; try the former first.
        let save = c.pos;
        c.bump();
        if let Ok(inner) = parse_cond(c, opts) {
            if c.eat_sym(")") && !continues_expression(c) {
                return Ok(inner);
            }
        }
        c.pos = save;
    }
    let lhs = parse_expr(c, opts)?;
    let op = match c.peek() {
        Tok::Sym(s) => CmpOp::from_sym(s),
        _ => None,
    }
    .ok_or_else(|| c.err(format!("expected comparison operator, found {}", c.describe())))?;
    c.bump();
    let rhs = parse_expr(c, opts)?;
    Ok(Cond::Cmp(lhs, op, rhs))
}

fn continues_expression(c: &Cursor) -> bool {
    match c.peek() {
        Tok::Sym(s) => CmpOp::from_sym(s).is_some() || matches!(*s, "+" | "-" | "*" | "/" | "^"),
        _ => false,
    }
}

impl Expr {
    pub fn to_poly(&self) -> Polynomial {
        match self {
            Expr::Int(n) => Polynomial::constant(Rational::from_integer(n.clone())),
            Expr::Var(v) => Polynomial::var(Var::new(v)),
            Expr::Neg(e) => -e.to_poly(),
            Expr::Add(a, b) => a.to_poly() + b.to_poly(),
            Expr::Sub(a, b) => a.to_poly() - b.to_poly(),
            Expr::Mul(a, b) => &a.to_poly() * &b.to_poly(),
            Expr::Div(a, n) => a.to_poly().scale(&Rational::new(BigInt::from(1), n.clone())),
            Expr::Pow(a, e) => a.to_poly().pow(*e),
        }
    }

    pub fn vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Int(_) => {}
            Expr::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone())
                }
            }
            Expr::Neg(e) | Expr::Div(e, _) | Expr::Pow(e, _) => e.vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Int(_) | Expr::Var(_) => 5,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, child: &Expr, right: bool) -> fmt::Result {
        let p = self.prec();
        let cp = child.prec();
        let paren = cp < p || (cp == p && right) || (p == 4 && cp < 5) || (p == 3 && cp < 4 && cp != 3);
        if paren {
            write!(f, "({child})")
        } else {
            write!(f, "{child}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(n) => write!(f, "{n}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Neg(e) => {
                f.write_str("-")?;
                self.fmt_child(f, e, false)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                let op = match self {
                    Expr::Add(..) => " + ",
                    Expr::Sub(..) => " - ",
                    _ => " * ",
                };
                self.fmt_child(f, a, false)?;
                f.write_str(op)?;
                self.fmt_child(f, b, true)
            }
            Expr::Div(a, n) => {
                self.fmt_child(f, a, false)?;
                write!(f, " / {n}")
            }
            Expr::Pow(a, e) => {
                self.fmt_child(f, a, false)?;
                write!(f, "^{e}")
            }
        }
    }
}

impl Cond {
    pub fn vars(&self, out: &mut Vec<String>) {
        match self {
            Cond::True | Cond::False => {}
            Cond::Cmp(a, _, b) => {
                a.vars(out);
                b.vars(out);
            }
            Cond::Not(c) => c.vars(out),
            Cond::And(a, b) | Cond::Or(a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }

    /// Disjunctive normal form over atoms `p >= 0`, using integer semantics
    /// for strict comparisons (`a < b` becomes `b - a - 1 >= 0`). Constant
    /// atoms are kept; callers simplify after substitution.
    pub fn dnf(&self) -> Vec<Vec<Polynomial>> {
        self.dnf_signed(false)
    }

    fn dnf_signed(&self, negated: bool) -> Vec<Vec<Polynomial>> {
        match (self, negated) {
            (Cond::True, false) | (Cond::False, true) => vec![vec![]],
            (Cond::True, true) | (Cond::False, false) => vec![],
            (Cond::Not(c), n) => c.dnf_signed(!n),
            (Cond::And(a, b), false) | (Cond::Or(a, b), true) => {
                let da = a.dnf_signed(negated);
                let db = b.dnf_signed(negated);
                let mut out = Vec::new();
                for x in &da {
                    for y in &db {
                        let mut conj = x.clone();
                        conj.extend(y.iter().cloned());
                        out.push(conj);
                    }
                }
                out
            }
            (Cond::Or(a, b), false) | (Cond::And(a, b), true) => {
                let mut out = a.dnf_signed(negated);
                out.extend(b.dnf_signed(negated));
                out
            }
            (Cond::Cmp(a, op, b), n) => {
                let op = if n { op.negate() } else { *op };
                comparison_dnf(&a.to_poly(), op, &b.to_poly())
            }
        }
    }
}

/// `p > 0` over integers as `normalized(p) - 1 >= 0`.
fn strict(p: Polynomial) -> Polynomial {
    p.normalized_nonneg() - Polynomial::int(1)
}

fn comparison_dnf(a: &Polynomial, op: CmpOp, b: &Polynomial) -> Vec<Vec<Polynomial>> {
    match op {
        CmpOp::Ge => vec![vec![a - b]],
        CmpOp::Le => vec![vec![b - a]],
        CmpOp::Gt => vec![vec![strict(a - b)]],
        CmpOp::Lt => vec![vec![strict(b - a)]],
        CmpOp::Eq => vec![vec![a - b, b - a]],
        CmpOp::Ne => vec![vec![strict(b - a)], vec![strict(a - b)]],
    }
}

impl fmt::Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn prec(c: &Cond) -> u8 {
            match c {
                Cond::Or(..) => 1,
                Cond::And(..) => 2,
                _ => 3,
            }
        }
        let child = |f: &mut fmt::Formatter<'_>, c: &Cond, min: u8| {
            if prec(c) < min {
                write!(f, "({c})")
            } else {
                write!(f, "{c}")
            }
        };
        match self {
            Cond::True => f.write_str("true"),
            Cond::False => f.write_str("false"),
            Cond::Cmp(a, op, b) => write!(f, "{a} {} {b}", op.symbol()),
            Cond::Not(c) => match **c {
                Cond::Not(_) | Cond::True | Cond::False => write!(f, "!{c}"),
                _ => write!(f, "!({c})"),
            },
            Cond::And(a, b) => {
                child(f, a, 2)?;
                f.write_str(" && ")?;
                child(f, b, 3)
            }
            Cond::Or(a, b) => {
                child(f, a, 1)?;
                f.write_str(" || ")?;
                child(f, b, 2)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::lexer::{tokenize, CommentStyle};
    use super::*;

    fn cursor(s: &str) -> Cursor {
        Cursor::new(tokenize(s, CommentStyle::CLike).unwrap())
    }

    const OPTS: ExprOptions = ExprOptions { allow_div: true };

    #[test]
    fn expression_printing_reparses() {
        for src in ["a - (b - c)", "-(x + 1) * y", "(x + y)^2 - 3 * x * y", "-x^2", "a * (b * c)", "x / 2 + 1"] {
            let e = parse_expr(&mut cursor(src), &OPTS).unwrap();
            let printed = e.to_string();
            let again = parse_expr(&mut cursor(&printed), &OPTS).unwrap();
            assert_eq!(e, again, "{src} -> {printed}");
        }
    }

    #[test]
    fn parenthesized_comparisons() {
        let c = parse_cond(&mut cursor("(x + 1) < n && (y >= 0 || !(z == 1))"), &OPTS).unwrap();
        let again = parse_cond(&mut cursor(&c.to_string()), &OPTS).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.dnf().len(), 3);
    }

    #[test]
    fn strict_integer_semantics() {
        let c = parse_cond(&mut cursor("x < n"), &OPTS).unwrap();
        let d = c.dnf();
        let x = Polynomial::var(Var::new("x"));
        let n = Polynomial::var(Var::new("n"));
        assert_eq!(d, vec![vec![n - x - Polynomial::int(1)]]);
        let neg = Cond::Not(Box::new(c)).dnf();
        assert_eq!(neg.len(), 1);
        let ne = parse_cond(&mut cursor("x != 0"), &OPTS).unwrap().dnf();
        assert_eq!(ne.len(), 2);
    }
}
