//! Plain-text interchange format for linear systems and solutions.
//!
//! ```text
//! # comment
//! var <name>
//! min <const> <coef> <name> <coef> <name> ...
//! eq  <const> <coef> <name> ...      # const + Σ coef·name = 0
//! ge  <const> <coef> <name> ...      # const + Σ coef·name ≥ 0
//! end
//! ```
//!
//! `max` may replace `min`. Names are any run of non-whitespace characters.
//! Numbers are integers, fractions `p/q`, or decimals with an optional
//! exponent. A solution file has a `status` line (`optimal`, `feasible`,
//! `infeasible`, `unbounded`), an optional `objective <number>` line, and
//! one `value <name> <number>` line per variable.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use super::LpStatus;
use crate::handelman::{LinearSystem, Sense};
use crate::linear::{LinearCombo, Sym};
use crate::poly::{fmt_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {msg}")]
pub struct FormatError {
    pub line: usize,
    pub msg: String,
}

fn err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError { line, msg: msg.into() }
}

/// Parses an integer, `p/q`, or a decimal like `-1.25e3`, exactly.
pub fn parse_number(s: &str) -> Option<Rational> {
    if let Some((p, q)) = s.split_once('/') {
        let p = BigInt::from_str(p).ok()?;
        let q = BigInt::from_str(q).ok()?;
        return (!q.is_zero()).then(|| Rational::new(p, q));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all = format!("{int_part}{frac_part}");
    let n = BigInt::from_str(if all.is_empty() { "0" } else { &all }).ok()?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut r = Rational::from_integer(n);
    if scale >= 0 {
        r *= Rational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= Rational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -r } else { r })
}

fn write_combo(out: &mut String, l: &LinearCombo) {
    out.push_str(&fmt_rational(&l.constant));
    for (s, c) in l.terms() {
        let _ = write!(out, " {} {}", fmt_rational(c), s);
    }
}

pub fn write_lp(sys: &LinearSystem) -> String {
    let mut out = String::new();
    for v in &sys.variables {
        let _ = writeln!(out, "var {v}");
    }
    if let Some((sense, o)) = &sys.objective {
        out.push_str(match sense {
            Sense::Minimize => "min ",
            Sense::Maximize => "max ",
        });
        write_combo(&mut out, o);
        out.push('\n');
    }
    for e in &sys.equalities {
        out.push_str("eq ");
        write_combo(&mut out, e);
        out.push('\n');
    }
    for i in &sys.inequalities {
        out.push_str("ge ");
        write_combo(&mut out, i);
        out.push('\n');
    }
    out.push_str("end\n");
    out
}

fn parse_combo(words: &[&str], line: usize) -> Result<LinearCombo, FormatError> {
    let Some((first, rest)) = words.split_first() else {
        return Err(err(line, "missing constant"));
    };
    let mut l = LinearCombo::constant(parse_number(first).ok_or_else(|| err(line, format!("bad number `{first}`")))?);
    if rest.len() % 2 != 0 {
        return Err(err(line, "terms must be `<coef> <name>` pairs"));
    }
    for pair in rest.chunks(2) {
        let c = parse_number(pair[0]).ok_or_else(|| err(line, format!("bad number `{}`", pair[0])))?;
        l.add_term(Sym::new(pair[1]), c);
    }
    Ok(l)
}

pub fn parse_lp(text: &str) -> Result<LinearSystem, FormatError> {
    let mut sys = LinearSystem::default();
    let mut seen = std::collections::BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let words: Vec<&str> = content.split_whitespace().collect();
        let Some((kw, rest)) = words.split_first() else { continue };
        match *kw {
            "var" => {
                let [name] = rest else {
                    return Err(err(line, "expected `var <name>`"));
                };
                sys.add_var(&Sym::new(name), &mut seen);
            }
            "min" | "max" => {
                let sense = if *kw == "min" { Sense::Minimize } else { Sense::Maximize };
                sys.objective = Some((sense, parse_combo(rest, line)?));
            }
            "eq" => sys.equalities.push(parse_combo(rest, line)?),
            "ge" => sys.inequalities.push(parse_combo(rest, line)?),
            "end" => break,
            other => return Err(err(line, format!("unknown keyword `{other}`"))),
        }
    }
    let referenced: Vec<Sym> = sys
        .equalities
        .iter()
        .chain(&sys.inequalities)
        .chain(sys.objective.as_ref().map(|(_, o)| o))
        .flat_map(|l| l.terms().keys().cloned())
        .collect();
    for s in referenced {
        sys.add_var(&s, &mut seen);
    }
    Ok(sys)
}

/// A solution as read from an external solver.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionText {
    pub status: LpStatus,
    pub objective: Option<Rational>,
    pub values: BTreeMap<Sym, Rational>,
}

pub fn write_solution(sol: &SolutionText) -> String {
    let mut out = format!("status {}\n", sol.status.keyword());
    if let Some(o) = &sol.objective {
        let _ = writeln!(out, "objective {}", fmt_rational(o));
    }
    for (s, v) in &sol.values {
        let _ = writeln!(out, "value {s} {}", fmt_rational(v));
    }
    out
}

pub fn parse_solution(text: &str) -> Result<SolutionText, FormatError> {
    let mut status = None;
    let mut objective = None;
    let mut values = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let words: Vec<&str> = raw.split_whitespace().collect();
        match words.as_slice() {
            [] => {}
            ["status", s] => {
                status = Some(match *s {
                    "optimal" => LpStatus::Optimal,
                    "feasible" => LpStatus::Feasible,
                    "infeasible" => LpStatus::Infeasible,
                    "unbounded" => LpStatus::Unbounded,
                    other => return Err(err(line, format!("unknown status `{other}`"))),
                })
            }
            ["objective", v] => objective = Some(parse_number(v).ok_or_else(|| err(line, "bad objective"))?),
            ["value", name, v] => {
                values.insert(Sym::new(name), parse_number(v).ok_or_else(|| err(line, "bad value"))?);
            }
            _ => return Err(err(line, format!("unrecognized line `{}`", raw.trim()))),
        }
    }
    Ok(SolutionText {
        status: status.ok_or_else(|| err(0, "missing status line"))?,
        objective,
        values,
    })
}

/// Nearest rational with denominator 1 when within `tol`, else `x`.
pub fn snap_integer(x: &Rational, tol: &Rational) -> Rational {
    let r = x.round();
    if (&r - x).abs() <= *tol {
        r
    } else {
        x.clone()
    }
}

pub fn tolerance() -> Rational {
    Rational::new(BigInt::one(), BigInt::from(1_000_000))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{rat, ratio};

    #[test]
    fn numbers() {
        assert_eq!(parse_number("3"), Some(rat(3)));
        assert_eq!(parse_number("-7/2"), Some(ratio(-7, 2)));
        assert_eq!(parse_number("1.25"), Some(ratio(5, 4)));
        assert_eq!(parse_number("-2.5e-1"), Some(ratio(-1, 4)));
        assert_eq!(parse_number("1e3"), Some(rat(1000)));
        assert_eq!(parse_number(".5"), Some(ratio(1, 2)));
        assert_eq!(parse_number("x"), None);
        assert_eq!(parse_number("1/0"), None);
    }

    #[test]
    fn lp_round_trip() {
        let mut sys = LinearSystem::default();
        let mut seen = Default::default();
        let a = Sym::new("new:l0:lenA*lenB");
        let c = Sym::new("c[pf:new:t1]3");
        sys.add_var(&a, &mut seen);
        sys.add_var(&c, &mut seen);
        let mut e = LinearCombo::constant(ratio(1, 3));
        e.add_term(a.clone(), rat(-2));
        e.add_term(c.clone(), rat(1));
        sys.equalities.push(e);
        sys.inequalities.push(LinearCombo::sym(c));
        sys.objective = Some((Sense::Minimize, LinearCombo::sym(a)));
        let text = write_lp(&sys);
        let back = parse_lp(&text).unwrap();
        assert_eq!(back.variables, sys.variables);
        assert_eq!(back.equalities, sys.equalities);
        assert_eq!(back.inequalities, sys.inequalities);
        assert_eq!(back.objective, sys.objective);
    }

    #[test]
    fn solution_round_trip() {
        let mut values = BTreeMap::new();
        values.insert(Sym::new("t"), ratio(9, 2));
        let s = SolutionText {
            status: LpStatus::Optimal,
            objective: Some(ratio(9, 2)),
            values,
        };
        assert_eq!(parse_solution(&write_solution(&s)).unwrap(), s);
        assert!(parse_solution("value t 1\n").is_err());
    }
}
