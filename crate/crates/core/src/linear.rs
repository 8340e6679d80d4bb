//! Symbols (LP unknowns) and linear combinations over them.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};

use crate::poly::{fmt_rational, Rational};

/// An LP unknown: a template coefficient, the threshold, or a Handelman
/// multiplier. Names are derived deterministically from their role.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sym(Arc<str>);

impl Sym {
    pub fn new(name: &str) -> Self {
        Sym(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// `constant + Σ coeff · sym`, with no zero coefficients stored.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct LinearCombo {
    pub constant: Rational,
    terms: BTreeMap<Sym, Rational>,
}

impl LinearCombo {
    pub fn zero() -> Self {
        LinearCombo::default()
    }

    pub fn constant(c: Rational) -> Self {
        LinearCombo {
            constant: c,
            terms: BTreeMap::new(),
        }
    }

    pub fn sym(s: Sym) -> Self {
        Self::term(s, Rational::one())
    }

    pub fn term(s: Sym, c: Rational) -> Self {
        let mut l = LinearCombo::zero();
        l.add_term(s, c);
        l
    }

    pub fn add_term(&mut self, s: Sym, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(s) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add_scaled(&mut self, other: &LinearCombo, k: &Rational) {
        if k.is_zero() {
            return;
        }
        self.constant += &other.constant * k;
        for (s, c) in &other.terms {
            self.add_term(s.clone(), c * k);
        }
    }

    pub fn scale(&self, k: &Rational) -> LinearCombo {
        let mut out = LinearCombo::zero();
        out.add_scaled(self, k);
        out
    }

    pub fn terms(&self) -> &BTreeMap<Sym, Rational> {
        &self.terms
    }

    pub fn coeff(&self, s: &Sym) -> Rational {
        self.terms.get(s).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.constant.is_zero() && self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    /// Value under an assignment; unassigned symbols count as zero.
    pub fn eval(&self, assignment: &BTreeMap<Sym, Rational>) -> Rational {
        let mut acc = self.constant.clone();
        for (s, c) in &self.terms {
            if let Some(v) = assignment.get(s) {
                acc += c * v;
            }
        }
        acc
    }
}

impl std::ops::Add for LinearCombo {
    type Output = LinearCombo;
    fn add(mut self, rhs: LinearCombo) -> LinearCombo {
        self.add_scaled(&rhs, &Rational::one());
        self
    }
}

impl std::ops::Sub for LinearCombo {
    type Output = LinearCombo;
    fn sub(mut self, rhs: LinearCombo) -> LinearCombo {
        self.add_scaled(&rhs, &-Rational::one());
        self
    }
}

impl std::ops::Neg for LinearCombo {
    type Output = LinearCombo;
    fn neg(self) -> LinearCombo {
        self.scale(&-Rational::one())
    }
}

impl fmt::Display for LinearCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (s, c) in &self.terms {
            let sign = if c.is_negative() { "-" } else { "+" };
            if first {
                if c.is_negative() {
                    f.write_str("-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let a = c.abs();
            if a.is_one() {
                write!(f, "{s}")?;
            } else {
                write!(f, "{}*{s}", fmt_rational(&a))?;
            }
        }
        if first {
            return f.write_str(&fmt_rational(&self.constant));
        }
        if !self.constant.is_zero() {
            let sign = if self.constant.is_negative() { "-" } else { "+" };
            write!(f, " {sign} {}", fmt_rational(&self.constant.abs()))?;
        }
        Ok(())
    }
}

impl fmt::Debug for LinearCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::rat;

    #[test]
    fn cancellation_removes_terms() {
        let a = Sym::new("a");
        let l = LinearCombo::sym(a.clone()) - LinearCombo::sym(a.clone());
        assert!(l.is_zero());
        let m = LinearCombo::term(a, rat(2)) + LinearCombo::constant(rat(-3));
        assert_eq!(m.to_string(), "2*a - 3");
    }
}
