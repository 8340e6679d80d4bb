//! Line-oriented `.ts` transition-system format.

use std::collections::BTreeMap;

use super::expr::{parse_cond, parse_expr, Cond, ExprOptions};
use super::lexer::{tokenize, CommentStyle, Cursor, Tok};
use crate::error::{ModelError, ParseError};
use crate::poly::{AffineExpr, Polynomial, Rational, Var};
use crate::ts::{with_cost_zero, Assertion, Transition, TransitionSystem, Update, UpdateEntry};

const OPTS: ExprOptions = ExprOptions { allow_div: true };

/// Parses a comma-separated list of conjunctive affine comparisons.
pub(crate) fn parse_assertion(c: &mut Cursor) -> Result<Assertion, ParseError> {
    let mut conjuncts = Vec::new();
    loop {
        let (line, col) = c.here();
        let cond = parse_cond(c, &OPTS)?;
        conjuncts.extend(conjunctive_atoms(&cond, line, col)?);
        if !c.eat_sym(",") {
            return Ok(Assertion::new(conjuncts));
        }
    }
}

fn conjunctive_atoms(cond: &Cond, line: usize, col: usize) -> Result<Vec<AffineExpr>, ParseError> {
    if *cond == Cond::True {
        return Ok(vec![]);
    }
    if *cond == Cond::False {
        return Ok(vec![AffineExpr::constant(Rational::from_integer((-1).into()))]);
    }
    let mut dnf = cond.dnf();
    if dnf.len() != 1 {
        return Err(ParseError::syntax(line, col, "disjunctions are not allowed in assertions"));
    }
    dnf.pop()
        .unwrap()
        .into_iter()
        .map(|p| AffineExpr::new(p).map_err(|e| ParseError::syntax(line, col, e.to_string())))
        .collect()
}

fn parse_affine(c: &mut Cursor) -> Result<AffineExpr, ParseError> {
    let (line, col) = c.here();
    let p = parse_expr(c, &OPTS)?.to_poly();
    AffineExpr::new(p).map_err(|e| ParseError::syntax(line, col, e.to_string()))
}

struct RawTrans {
    id: Option<String>,
    source: String,
    target: String,
    guard: Assertion,
    updates: Vec<(String, UpdateEntry, (usize, usize))>,
}

pub fn parse_transition_system(text: &str) -> Result<TransitionSystem, ParseError> {
    let mut c = Cursor::new(tokenize(text, CommentStyle::Hash)?);
    let mut vars: Option<Vec<Var>> = None;
    let mut locations: Option<Vec<String>> = None;
    let mut init = None;
    let mut terminal = None;
    let mut theta0 = None;
    let mut raw = Vec::new();
    while !c.at_eof() {
        let (line, col) = c.here();
        let kw = c.ident()?;
        match kw.as_str() {
            "vars" => {
                let mut vs = Vec::new();
                while !c.is_sym(";") {
                    vs.push(Var::new(&c.ident()?));
                }
                set_once(&mut vars, vs, "vars", line, col)?;
            }
            "locations" => {
                let mut ls = Vec::new();
                while !c.is_sym(";") {
                    ls.push(c.ident()?);
                }
                set_once(&mut locations, ls, "locations", line, col)?;
            }
            "init" => set_once(&mut init, c.ident()?, "init", line, col)?,
            "terminal" => set_once(&mut terminal, c.ident()?, "terminal", line, col)?,
            "theta0" => {
                let a = parse_assertion(&mut c)?;
                set_once(&mut theta0, a, "theta0", line, col)?;
            }
            "trans" => raw.push(parse_trans(&mut c)?),
            other => return Err(ParseError::syntax(line, col, format!("unknown statement `{other}`"))),
        }
        c.expect_sym(";")?;
    }
    let (l, col) = c.here();
    let vars = vars.ok_or_else(|| ParseError::syntax(l, col, "missing `vars` declaration"))?;
    let init = init.ok_or_else(|| ParseError::syntax(l, col, "missing `init` declaration"))?;
    let terminal = terminal.ok_or_else(|| ParseError::syntax(l, col, "missing `terminal` declaration"))?;
    if !vars.contains(&crate::ts::cost_var()) {
        return Err(ModelError::MissingCost.into());
    }
    let locations = locations.unwrap_or_else(|| {
        let mut ls: Vec<String> = Vec::new();
        let mut push = |l: &String| {
            if !ls.contains(l) {
                ls.push(l.clone());
            }
        };
        push(&init);
        for t in &raw {
            push(&t.source);
            push(&t.target);
        }
        push(&terminal);
        ls
    });
    let mut transitions = Vec::new();
    for (k, r) in raw.into_iter().enumerate() {
        let mut update = Update::identity(&vars);
        let mut seen = BTreeMap::new();
        for (v, e, (line, col)) in r.updates {
            let var = Var::new(&v);
            if !vars.contains(&var) {
                return Err(ModelError::UnknownVariable(v).into());
            }
            if seen.insert(v.clone(), ()).is_some() {
                return Err(ParseError::syntax(line, col, format!("`{v}` updated twice")));
            }
            update.set(var, e);
        }
        transitions.push(Transition {
            id: r.id.unwrap_or_else(|| format!("t{k}")),
            source: r.source,
            target: r.target,
            guard: r.guard,
            update,
        });
    }
    let has_loop = transitions.iter().any(|t| t.source == terminal);
    if !has_loop {
        let mut k = transitions.len();
        while transitions.iter().any(|t| t.id == format!("t{k}")) {
            k += 1;
        }
        transitions.push(Transition {
            id: format!("t{k}"),
            source: terminal.clone(),
            target: terminal.clone(),
            guard: Assertion::truth(),
            update: Update::identity(&vars),
        });
    }
    let ts = TransitionSystem {
        locations,
        variables: vars,
        transitions,
        initial: init,
        terminal,
        theta0: with_cost_zero(theta0.unwrap_or_default()),
    };
    ts.validate()?;
    Ok(ts)
}

fn set_once<T>(slot: &mut Option<T>, v: T, what: &str, line: usize, col: usize) -> Result<(), ParseError> {
    if slot.is_some() {
        return Err(ParseError::syntax(line, col, format!("duplicate `{what}` declaration")));
    }
    *slot = Some(v);
    Ok(())
}

fn parse_trans(c: &mut Cursor) -> Result<RawTrans, ParseError> {
    let first = c.ident()?;
    let (id, source) = if c.eat_sym(":") {
        (Some(first), c.ident()?)
    } else {
        (None, first)
    };
    c.expect_sym("->")?;
    let target = c.ident()?;
    let guard = if c.eat_kw("guard") {
        parse_assertion(c)?
    } else {
        Assertion::truth()
    };
    let mut updates = Vec::new();
    if c.eat_kw("update") {
        loop {
            let pos = c.here();
            let v = c.ident()?;
            c.expect_sym(":=")?;
            let entry = if c.is_kw("nondet") && matches!(c.peek_at(1), Tok::Sym(";") | Tok::Sym(",") | Tok::Ident(_)) {
                c.bump();
                if c.eat_kw("in") {
                    c.expect_sym("[")?;
                    let lower = parse_bound(c)?;
                    c.expect_sym(",")?;
                    let upper = parse_bound(c)?;
                    c.expect_sym("]")?;
                    UpdateEntry::Nondeterministic { lower, upper }
                } else {
                    UpdateEntry::Nondeterministic { lower: None, upper: None }
                }
            } else {
                UpdateEntry::Deterministic(parse_expr(c, &OPTS)?.to_poly())
            };
            updates.push((v, entry, pos));
            if !c.eat_sym(",") {
                break;
            }
        }
    }
    Ok(RawTrans {
        id,
        source,
        target,
        guard,
        updates,
    })
}

fn parse_bound(c: &mut Cursor) -> Result<Option<AffineExpr>, ParseError> {
    if c.eat_sym("*") {
        Ok(None)
    } else {
        parse_affine(c).map(Some)
    }
}

/// Parses a polynomial written in the `.ts` expression syntax.
pub fn parse_polynomial(text: &str) -> Result<Polynomial, ParseError> {
    let mut c = Cursor::new(tokenize(text, CommentStyle::Hash)?);
    let p = parse_expr(&mut c, &OPTS)?.to_poly();
    if !c.at_eof() {
        return Err(c.err(format!("unexpected {}", c.describe())));
    }
    Ok(p)
}

/// Parses a valuation such as `lenA=100, lenB=100`.
pub fn parse_valuation(text: &str) -> Result<crate::ts::Valuation, ParseError> {
    let mut c = Cursor::new(tokenize(text, CommentStyle::Hash)?);
    let mut val = crate::ts::Valuation::new();
    while !c.at_eof() {
        let v = c.ident()?;
        c.expect_sym("=")?;
        let neg = c.eat_sym("-");
        let n = match c.bump() {
            Tok::Int(n) => n,
            _ => return Err(c.err("expected integer")),
        };
        val.set(Var::new(&v), if neg { -n } else { n });
        if !c.eat_sym(",") {
            break;
        }
    }
    if !c.at_eof() {
        return Err(c.err(format!("unexpected {}", c.describe())));
    }
    Ok(val)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_single_location() {
        let ts = parse_transition_system("vars cost; init l; terminal l;").unwrap();
        assert_eq!(ts.locations, vec!["l"]);
        assert_eq!(ts.transitions.len(), 1);
        assert!(ts.transitions[0].update.is_identity());
    }

    #[test]
    fn location_without_outgoing_is_rejected() {
        let err = parse_transition_system("vars x cost; locations a b lout; init a; terminal lout; trans a -> lout;")
            .unwrap_err();
        assert_eq!(err, ParseError::Semantic(ModelError::NoOutgoing("b".into())));
    }

    #[test]
    fn missing_cost_is_semantic_error() {
        let err = parse_transition_system("vars x; init l; terminal l;").unwrap_err();
        assert_eq!(err, ParseError::Semantic(ModelError::MissingCost));
    }

    #[test]
    fn nondet_bounds_and_positions() {
        let ts = parse_transition_system(
            "vars y cost;\ninit a; terminal b;\ntrans a -> b update y := nondet in [0, *], cost := cost + y;",
        )
        .unwrap();
        match ts.transitions[0].update.get(&Var::new("y")).unwrap() {
            UpdateEntry::Nondeterministic { lower: Some(l), upper: None } => assert!(l.is_constant()),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_transition_system("vars cost;\ninit a;\n  bogus;").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 3, col: 3, .. }));
    }

    #[test]
    fn valuation_syntax() {
        let v = parse_valuation("lenA=100, lenB=-2").unwrap();
        assert_eq!(v.get(&Var::new("lenB")).unwrap(), &(-2).into());
    }
}
