//! The `.imp` mini-language: abstract syntax, parser and printer.

use std::fmt::{self, Write as _};

use super::expr::{parse_cond, parse_expr, Cond, Expr, ExprOptions};
use super::lexer::{tokenize, CommentStyle, Cursor, Tok};
use crate::error::ParseError;

const OPTS: ExprOptions = ExprOptions { allow_div: false };

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    pub returns_int: bool,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rhs {
    Expr(Expr),
    /// `nondet()` or `nondet(lo, hi)`.
    Nondet(Option<Expr>, Option<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    Assume(Cond),
    Decl(String, Option<Rhs>),
    Assign(String, Rhs),
    If(Cond, Vec<Stmt>, Vec<Stmt>),
    While(Cond, Vec<Stmt>),
    For {
        init: Option<Box<Stmt>>,
        cond: Option<Cond>,
        step: Option<Box<Stmt>>,
        body: Vec<Stmt>,
    },
    Block(Vec<Stmt>),
    Labeled(String, Box<Stmt>),
    Break,
    Return(Option<Expr>),
}

const UNSUPPORTED_TYPES: &[&str] = &[
    "bool", "_Bool", "float", "double", "char", "long", "short", "unsigned", "signed", "struct",
];

fn unsupported(c: &Cursor, what: impl Into<String>) -> ParseError {
    let (line, col) = c.here();
    ParseError::Unsupported {
        line,
        col,
        what: what.into(),
    }
}

pub fn parse_program_ast(text: &str) -> Result<Program, ParseError> {
    let mut c = Cursor::new(tokenize(text, CommentStyle::CLike)?);
    let returns_int = if c.eat_kw("void") {
        false
    } else if c.eat_kw("int") {
        true
    } else {
        return Err(c.err(format!("expected `void` or `int`, found {}", c.describe())));
    };
    let name = c.ident()?;
    c.expect_sym("(")?;
    let mut params = Vec::new();
    if !c.is_sym(")") {
        loop {
            check_type(&c)?;
            c.expect_kw("int")?;
            if c.is_sym("*") || c.is_sym("&") {
                return Err(unsupported(&c, "pointer or reference parameter"));
            }
            let p = c.ident()?;
            if c.is_sym("[") {
                return Err(unsupported(&c, format!("array parameter `{p}`")));
            }
            params.push(p);
            if !c.eat_sym(",") {
                break;
            }
        }
    }
    c.expect_sym(")")?;
    let body = parse_block(&mut c)?;
    if !c.at_eof() {
        return Err(c.err(format!("unexpected {} after function body", c.describe())));
    }
    Ok(Program {
        name,
        returns_int,
        params,
        body,
    })
}

fn check_type(c: &Cursor) -> Result<(), ParseError> {
    if let Tok::Ident(s) = c.peek() {
        if UNSUPPORTED_TYPES.contains(&s.as_str()) {
            return Err(unsupported(c, format!("type `{s}`")));
        }
    }
    Ok(())
}

fn parse_block(c: &mut Cursor) -> Result<Vec<Stmt>, ParseError> {
    c.expect_sym("{")?;
    let mut out = Vec::new();
    while !c.eat_sym("}") {
        if c.at_eof() {
            return Err(c.err("unexpected end of input, expected `}`"));
        }
        parse_stmt_into(c, &mut out)?;
    }
    Ok(out)
}

/// Statement body of `if`/`while`/`for`: a braced block or a single statement.
fn parse_body(c: &mut Cursor) -> Result<Vec<Stmt>, ParseError> {
    if c.is_sym("{") {
        parse_block(c)
    } else {
        let mut out = Vec::new();
        parse_stmt_into(c, &mut out)?;
        Ok(out)
    }
}

fn parse_stmt_into(c: &mut Cursor, out: &mut Vec<Stmt>) -> Result<(), ParseError> {
    // Declarations may introduce several statements (`int a = 0, b;`).
    if c.is_kw("int") {
        c.bump();
        if c.is_sym("*") {
            return Err(unsupported(c, "pointer declaration"));
        }
        loop {
            let name = c.ident()?;
            if c.is_sym("[") {
                return Err(unsupported(c, format!("array declaration `{name}`")));
            }
            let init = if c.eat_sym("=") { Some(parse_rhs(c)?) } else { None };
            out.push(Stmt::Decl(name, init));
            if !c.eat_sym(",") {
                break;
            }
        }
        c.expect_sym(";")?;
        return Ok(());
    }
    out.push(parse_stmt(c)?);
    Ok(())
}

fn parse_rhs(c: &mut Cursor) -> Result<Rhs, ParseError> {
    if c.is_kw("nondet") && matches!(c.peek_at(1), Tok::Sym("(")) {
        c.bump();
        c.bump();
        if c.eat_sym(")") {
            return Ok(Rhs::Nondet(None, None));
        }
        let lo = parse_expr(c, &OPTS)?;
        c.expect_sym(",")?;
        let hi = parse_expr(c, &OPTS)?;
        c.expect_sym(")")?;
        return Ok(Rhs::Nondet(Some(lo), Some(hi)));
    }
    Ok(Rhs::Expr(parse_expr(c, &OPTS)?))
}

fn parse_stmt(c: &mut Cursor) -> Result<Stmt, ParseError> {
    check_type(c)?;
    if c.is_sym("{") {
        return Ok(Stmt::Block(parse_block(c)?));
    }
    if c.eat_kw("assume") {
        c.expect_sym("(")?;
        let cond = parse_cond(c, &OPTS)?;
        c.expect_sym(")")?;
        c.eat_sym(";");
        return Ok(Stmt::Assume(cond));
    }
    if c.eat_kw("if") {
        c.expect_sym("(")?;
        let cond = parse_cond(c, &OPTS)?;
        c.expect_sym(")")?;
        let then = parse_body(c)?;
        let els = if c.eat_kw("else") { parse_body(c)? } else { vec![] };
        return Ok(Stmt::If(cond, then, els));
    }
    if c.eat_kw("while") {
        c.expect_sym("(")?;
        let cond = parse_cond(c, &OPTS)?;
        c.expect_sym(")")?;
        return Ok(Stmt::While(cond, parse_body(c)?));
    }
    if c.eat_kw("for") {
        c.expect_sym("(")?;
        let init = if c.is_sym(";") {
            None
        } else if c.eat_kw("int") {
            let name = c.ident()?;
            c.expect_sym("=")?;
            Some(Box::new(Stmt::Decl(name, Some(parse_rhs(c)?))))
        } else {
            Some(Box::new(parse_simple(c)?))
        };
        c.expect_sym(";")?;
        let cond = if c.is_sym(";") { None } else { Some(parse_cond(c, &OPTS)?) };
        c.expect_sym(";")?;
        let step = if c.is_sym(")") { None } else { Some(Box::new(parse_simple(c)?)) };
        c.expect_sym(")")?;
        let body = parse_body(c)?;
        return Ok(Stmt::For { init, cond, step, body });
    }
    if c.eat_kw("break") {
        c.expect_sym(";")?;
        return Ok(Stmt::Break);
    }
    if c.eat_kw("return") {
        let e = if c.is_sym(";") { None } else { Some(parse_expr(c, &OPTS)?) };
        c.expect_sym(";")?;
        return Ok(Stmt::Return(e));
    }
    for kw in ["goto", "continue", "do", "switch"] {
        if c.is_kw(kw) {
            return Err(unsupported(c, format!("`{kw}` statement")));
        }
    }
    if let (Tok::Ident(name), Tok::Sym(":")) = (c.peek().clone(), c.peek_at(1).clone()) {
        c.bump();
        c.bump();
        let inner = if c.is_sym("}") {
            Stmt::Block(vec![])
        } else {
            let mut one = Vec::new();
            parse_stmt_into(c, &mut one)?;
            if one.len() == 1 {
                one.pop().unwrap()
            } else {
                Stmt::Block(one)
            }
        };
        return Ok(Stmt::Labeled(name, Box::new(inner)));
    }
    let s = parse_simple(c)?;
    c.expect_sym(";")?;
    Ok(s)
}

/// Assignment forms without the trailing semicolon: `x = e`, `x += e`,
/// `x -= e`, `x++`, `++x`, `x--`, `--x`. Sugar is desugared to `x = ...`.
fn parse_simple(c: &mut Cursor) -> Result<Stmt, ParseError> {
    let inc = |name: &str, op: &str| {
        let v = Box::new(Expr::Var(name.to_string()));
        let one = Box::new(Expr::Int(1.into()));
        Stmt::Assign(
            name.to_string(),
            Rhs::Expr(if op == "++" { Expr::Add(v, one) } else { Expr::Sub(v, one) }),
        )
    };
    for op in ["++", "--"] {
        if c.eat_sym(op) {
            let name = c.ident()?;
            return Ok(inc(&name, op));
        }
    }
    let name = c.ident()?;
    if c.is_sym("[") {
        return Err(unsupported(c, format!("array access `{name}[...]`")));
    }
    if c.is_sym("(") {
        return Err(unsupported(c, format!("function call `{name}(...)`")));
    }
    for op in ["++", "--"] {
        if c.eat_sym(op) {
            return Ok(inc(&name, op));
        }
    }
    for op in ["+=", "-="] {
        if c.eat_sym(op) {
            let rhs = parse_expr(c, &OPTS)?;
            let v = Box::new(Expr::Var(name.clone()));
            let e = if op == "+=" { Expr::Add(v, Box::new(rhs)) } else { Expr::Sub(v, Box::new(rhs)) };
            return Ok(Stmt::Assign(name, Rhs::Expr(e)));
        }
    }
    c.expect_sym("=")?;
    Ok(Stmt::Assign(name, parse_rhs(c)?))
}

impl fmt::Display for Rhs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rhs::Expr(e) => write!(f, "{e}"),
            Rhs::Nondet(Some(lo), Some(hi)) => write!(f, "nondet({lo}, {hi})"),
            Rhs::Nondet(..) => f.write_str("nondet()"),
        }
    }
}

fn simple_to_string(s: &Stmt) -> String {
    match s {
        Stmt::Assign(v, r) => format!("{v} = {r}"),
        Stmt::Decl(v, Some(r)) => format!("int {v} = {r}"),
        Stmt::Decl(v, None) => format!("int {v}"),
        other => panic!("not a simple statement: {other:?}"),
    }
}

fn write_block(out: &mut String, stmts: &[Stmt], depth: usize) {
    for s in stmts {
        write_stmt(out, s, depth);
    }
}

fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    let pad = "    ".repeat(depth);
    match s {
        Stmt::Assume(c) => {
            let _ = writeln!(out, "{pad}assume({c});");
        }
        Stmt::Decl(..) | Stmt::Assign(..) => {
            let _ = writeln!(out, "{pad}{};", simple_to_string(s));
        }
        Stmt::If(c, t, e) => {
            let _ = writeln!(out, "{pad}if ({c}) {{");
            write_block(out, t, depth + 1);
            if e.is_empty() {
                let _ = writeln!(out, "{pad}}}");
            } else {
                let _ = writeln!(out, "{pad}}} else {{");
                write_block(out, e, depth + 1);
                let _ = writeln!(out, "{pad}}}");
            }
        }
        Stmt::While(c, b) => {
            let _ = writeln!(out, "{pad}while ({c}) {{");
            write_block(out, b, depth + 1);
            let _ = writeln!(out, "{pad}}}");
        }
        Stmt::For { init, cond, step, body } => {
            let i = init.as_deref().map(simple_to_string).unwrap_or_default();
            let c = cond.as_ref().map(|c| c.to_string()).unwrap_or_default();
            let st = step.as_deref().map(simple_to_string).unwrap_or_default();
            let _ = writeln!(out, "{pad}for ({i}; {c}; {st}) {{");
            write_block(out, body, depth + 1);
            let _ = writeln!(out, "{pad}}}");
        }
        Stmt::Block(b) => {
            let _ = writeln!(out, "{pad}{{");
            write_block(out, b, depth + 1);
            let _ = writeln!(out, "{pad}}}");
        }
        Stmt::Labeled(l, inner) => {
            let _ = writeln!(out, "{pad}{l}:");
            write_stmt(out, inner, depth);
        }
        Stmt::Break => {
            let _ = writeln!(out, "{pad}break;");
        }
        Stmt::Return(e) => {
            let _ = match e {
                Some(e) => writeln!(out, "{pad}return {e};"),
                None => writeln!(out, "{pad}return;"),
            };
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params: Vec<String> = self.params.iter().map(|p| format!("int {p}")).collect();
        let ret = if self.returns_int { "int" } else { "void" };
        writeln!(f, "{ret} {}({}) {{", self.name, params.join(", "))?;
        let mut body = String::new();
        write_block(&mut body, &self.body, 1);
        f.write_str(&body)?;
        writeln!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sugar_desugars() {
        let p = parse_program_ast("void f(int n) { int i = 0; i++; --n; i += 2 * n; }").unwrap();
        assert_eq!(p.body.len(), 4);
        assert_eq!(p.body[1], parse_program_ast("void f(int n) { i = i + 1; }").unwrap().body[0]);
    }

    #[test]
    fn rejects_out_of_scope_constructs() {
        for src in [
            "void f(int A[], int n) { }",
            "void f(int n) { int a[3]; }",
            "void f(int n) { bool b; }",
            "void f(int n) { g(n); }",
            "void f(int *p) { }",
            "void f(int n) { l: goto l; }",
        ] {
            let err = parse_program_ast(src).unwrap_err();
            assert!(matches!(err, ParseError::Unsupported { .. }), "{src}: {err}");
        }
    }

    #[test]
    fn print_parse_round_trip() {
        let src = "int f(int x, int n) {
            assume(n >= 1 && n <= 10)
            int i = 0, k;
            for (int j = 0; j < n; j++) { if (i < j || i > j) k = nondet(0, n); else { break; } }
            loop: while (i < n) { x += k * 5; }
            return x;
        }";
        let p = parse_program_ast(src).unwrap();
        let printed = p.to_string();
        assert_eq!(parse_program_ast(&printed).unwrap(), p, "{printed}");
    }
}
