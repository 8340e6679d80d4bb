//! Sparse multivariate polynomials with exact rational coefficients.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::EvalError;

pub type Rational = BigRational;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Renders a rational as `n` or `n/d`.
pub fn fmt_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// A program (or fresh) variable name.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: &str) -> Self {
        Var(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Fresh variable standing for the value chosen by a nondeterministic
    /// update of `self` on transition `transition_id`.
    pub fn fresh(&self, transition_id: &str) -> Var {
        Var::new(&format!("{}@{}", self.0, transition_id))
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Self {
        Var::new(s)
    }
}

/// A power product of variables. Exponents are strictly positive and the
/// factors are sorted by variable name.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial {
    factors: Vec<(Var, u32)>,
}

impl Monomial {
    pub fn one() -> Self {
        Monomial::default()
    }

    pub fn var(v: Var) -> Self {
        Monomial { factors: vec![(v, 1)] }
    }

    /// Builds a monomial from `(variable, exponent)` pairs; zero exponents
    /// are dropped and repeated variables are merged.
    pub fn from_pairs<I: IntoIterator<Item = (Var, u32)>>(pairs: I) -> Self {
        let mut map: BTreeMap<Var, u32> = BTreeMap::new();
        for (v, e) in pairs {
            if e > 0 {
                *map.entry(v).or_insert(0) += e;
            }
        }
        Monomial {
            factors: map.into_iter().collect(),
        }
    }

    pub fn degree(&self) -> u32 {
        self.factors.iter().map(|(_, e)| e).sum()
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn factors(&self) -> &[(Var, u32)] {
        &self.factors
    }

    pub fn exponent(&self, v: &Var) -> u32 {
        self.factors
            .iter()
            .find(|(w, _)| w == v)
            .map(|(_, e)| *e)
            .unwrap_or(0)
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.factors.iter().map(|(v, _)| v)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.factors.len() + other.factors.len());
        let (mut i, mut j) = (0, 0);
        while i < self.factors.len() && j < other.factors.len() {
            let (a, ea) = &self.factors[i];
            let (b, eb) = &other.factors[j];
            match a.cmp(b) {
                Ordering::Less => {
                    out.push((a.clone(), *ea));
                    i += 1;
                }
                Ordering::Greater => {
                    out.push((b.clone(), *eb));
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a.clone(), ea + eb));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.factors[i..]);
        out.extend_from_slice(&other.factors[j..]);
        Monomial { factors: out }
    }

    pub fn eval(&self, lookup: &impl Fn(&Var) -> Option<Rational>) -> Result<Rational, EvalError> {
        let mut acc = Rational::one();
        for (v, e) in &self.factors {
            let x = lookup(v).ok_or_else(|| EvalError::Unbound(v.to_string()))?;
            acc *= num_traits::pow(x, *e as usize);
        }
        Ok(acc)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.factors.cmp(&other.factors))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return f.write_str("1");
        }
        for (k, (v, e)) in self.factors.iter().enumerate() {
            if k > 0 {
                f.write_str("*")?;
            }
            if *e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// All monomials of total degree at most `d` over `vars`, in graded
/// lexicographic order with respect to the given variable order.
pub fn monomials(vars: &[Var], d: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    for deg in 0..=d {
        let mut exps = vec![0u32; vars.len()];
        graded_rec(vars, deg, 0, &mut exps, &mut out);
    }
    out
}

fn graded_rec(vars: &[Var], remaining: u32, idx: usize, exps: &mut Vec<u32>, out: &mut Vec<Monomial>) {
    if idx == vars.len() {
        if remaining == 0 {
            out.push(Monomial::from_pairs(
                vars.iter().cloned().zip(exps.iter().copied()),
            ));
        }
        return;
    }
    if idx + 1 == vars.len() {
        exps[idx] = remaining;
        graded_rec(vars, 0, idx + 1, exps, out);
        exps[idx] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        exps[idx] = e;
        graded_rec(vars, remaining - e, idx + 1, exps, out);
    }
    exps[idx] = 0;
}

/// Multivariate polynomial with rational coefficients. Zero coefficients
/// are never stored.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, Rational>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial::default()
    }

    pub fn constant(c: Rational) -> Self {
        let mut p = Polynomial::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn int(c: i64) -> Self {
        Polynomial::constant(rat(c))
    }

    pub fn var(v: Var) -> Self {
        Polynomial::monomial(Monomial::var(v), Rational::one())
    }

    pub fn monomial(m: Monomial, c: Rational) -> Self {
        let mut p = Polynomial::zero();
        p.add_term(m, c);
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, Rational)>>(terms: I) -> Self {
        let mut p = Polynomial::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
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

    pub fn terms(&self) -> &BTreeMap<Monomial, Rational> {
        &self.terms
    }

    pub fn into_terms(self) -> BTreeMap<Monomial, Rational> {
        self.terms
    }

    pub fn coeff(&self, m: &Monomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn constant_term(&self) -> Rational {
        self.coeff(&Monomial::one())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(Monomial::is_one)
    }

    /// Degree of the polynomial; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.terms
            .keys()
            .flat_map(|m| m.vars().cloned())
            .collect()
    }

    pub fn mentions(&self, v: &Var) -> bool {
        self.terms.keys().any(|m| m.exponent(v) > 0)
    }

    pub fn scale(&self, c: &Rational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero();
        }
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|(m, k)| (m.clone(), k * c))
                .collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut acc = Polynomial::int(1);
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    pub fn eval_with(&self, lookup: &impl Fn(&Var) -> Option<Rational>) -> Result<Rational, EvalError> {
        let mut acc = Rational::zero();
        for (m, c) in &self.terms {
            acc += m.eval(lookup)? * c;
        }
        Ok(acc)
    }

    /// Exact evaluation at an integer valuation.
    pub fn eval(&self, x: &crate::ts::Valuation) -> Result<Rational, EvalError> {
        self.eval_with(&|v| x.get(v).map(|n| Rational::from_integer(n.clone())))
    }

    /// Replaces each variable that has an entry in `subst`; other variables
    /// are kept.
    pub fn substitute(&self, subst: &impl Fn(&Var) -> Option<Polynomial>) -> Polynomial {
        let mut cache: BTreeMap<(Var, u32), Polynomial> = BTreeMap::new();
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            let mut term = Polynomial::constant(c.clone());
            for (v, e) in m.factors() {
                let factor = match cache.get(&(v.clone(), *e)) {
                    Some(p) => p.clone(),
                    None => {
                        let base = subst(v).unwrap_or_else(|| Polynomial::var(v.clone()));
                        let p = base.pow(*e);
                        cache.insert((v.clone(), *e), p.clone());
                        p
                    }
                };
                term = &term * &factor;
            }
            out = out + term;
        }
        out
    }

    /// Rescales to integer coefficients with gcd 1 (positive factor), so
    /// that `p >= 0` and `canonical(p) >= 0` describe the same set.
    pub fn normalized_nonneg(&self) -> Polynomial {
        if self.is_zero() {
            return self.clone();
        }
        let lcm = self
            .terms
            .values()
            .fold(BigInt::one(), |acc, c| num_integer::Integer::lcm(&acc, c.denom()));
        let ints: Vec<BigInt> = self
            .terms
            .values()
            .map(|c| (c * Rational::from_integer(lcm.clone())).to_integer())
            .collect();
        let g = ints
            .iter()
            .fold(BigInt::zero(), |acc, c| num_integer::Integer::gcd(&acc, c));
        let factor = Rational::new(lcm, g.abs());
        self.scale(&factor)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if k == 0 {
                if neg {
                    f.write_str("-")?;
                }
            } else if neg {
                f.write_str(" - ")?;
            } else {
                f.write_str(" + ")?;
            }
            if m.is_one() {
                f.write_str(&fmt_rational(&abs))?;
            } else if abs.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{}*{m}", fmt_rational(&abs))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Add for Polynomial {
    type Output = Polynomial;
    fn add(mut self, rhs: Polynomial) -> Polynomial {
        for (m, c) in rhs.terms {
            self.add_term(m, c);
        }
        self
    }
}

impl<'a> Add<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.clone() + rhs.clone()
    }
}

impl Sub for Polynomial {
    type Output = Polynomial;
    fn sub(mut self, rhs: Polynomial) -> Polynomial {
        for (m, c) in rhs.terms {
            self.add_term(m, -c);
        }
        self
    }
}

impl<'a> Sub<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.clone() - rhs.clone()
    }
}

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial {
            terms: self.terms.into_iter().map(|(m, c)| (m, -c)).collect(),
        }
    }
}

impl<'a> Mul<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl Mul for Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: Polynomial) -> Polynomial {
        &self * &rhs
    }
}

/// A polynomial of degree at most one.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AffineExpr(PolyKey);

// Wrapper so that affine expressions can be ordered (for deduplication in
// sorted containers) by their term list.
#[derive(Clone, PartialEq, Eq, Hash)]
struct PolyKey(Polynomial);

impl Ord for PolyKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.terms.iter().cmp(other.0.terms.iter())
    }
}

impl PartialOrd for PolyKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl AffineExpr {
    pub fn new(p: Polynomial) -> Result<Self, crate::error::ModelError> {
        if p.degree() > 1 {
            return Err(crate::error::ModelError::NotAffine(p.to_string()));
        }
        Ok(AffineExpr(PolyKey(p)))
    }

    pub fn var(v: Var) -> Self {
        AffineExpr(PolyKey(Polynomial::var(v)))
    }

    pub fn constant(c: Rational) -> Self {
        AffineExpr(PolyKey(Polynomial::constant(c)))
    }

    pub fn poly(&self) -> &Polynomial {
        &self.0 .0
    }

    pub fn into_poly(self) -> Polynomial {
        self.0 .0
    }

    pub fn coeff(&self, v: &Var) -> Rational {
        self.poly().coeff(&Monomial::var(v.clone()))
    }

    pub fn constant_term(&self) -> Rational {
        self.poly().constant_term()
    }

    pub fn is_constant(&self) -> bool {
        self.poly().is_constant()
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.poly().vars()
    }

    /// Linear part as `(variable, coefficient)` pairs.
    pub fn linear_terms(&self) -> impl Iterator<Item = (&Var, &Rational)> {
        self.poly()
            .terms()
            .iter()
            .filter(|(m, _)| !m.is_one())
            .map(|(m, c)| (&m.factors()[0].0, c))
    }

    pub fn normalized(&self) -> AffineExpr {
        AffineExpr(PolyKey(self.poly().normalized_nonneg()))
    }

    pub fn neg(&self) -> AffineExpr {
        AffineExpr(PolyKey(-self.poly().clone()))
    }

    pub fn add_const(&self, c: Rational) -> AffineExpr {
        AffineExpr(PolyKey(self.poly().clone() + Polynomial::constant(c)))
    }
}

impl fmt::Display for AffineExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.poly())
    }
}

impl fmt::Debug for AffineExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.poly())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> Polynomial {
        Polynomial::var(Var::new(s))
    }

    #[test]
    fn graded_lex_enumeration() {
        let vars = [Var::new("x"), Var::new("y")];
        let ms: Vec<String> = monomials(&vars, 2).iter().map(|m| m.to_string()).collect();
        assert_eq!(ms, ["1", "x", "y", "x^2", "x*y", "y^2"]);
        assert_eq!(monomials(&[Var::new("x")], 0), vec![Monomial::one()]);
    }

    #[test]
    fn monomial_count_matches_binomial() {
        // C(6,3) = 20, cross-checked by brute-force enumeration of exponent triples.
        let vars = [Var::new("a"), Var::new("b"), Var::new("c")];
        let mut brute = 0;
        for i in 0..=3 {
            for j in 0..=3 {
                for k in 0..=3 {
                    if i + j + k <= 3 {
                        brute += 1;
                    }
                }
            }
        }
        assert_eq!(brute, 20);
        assert_eq!(monomials(&vars, 3).len(), 20);
    }

    #[test]
    fn binomial_expansion() {
        let p = v("x").pow(2);
        let q = p.substitute(&|var| {
            (var.as_str() == "x").then(|| v("x") + Polynomial::int(1))
        });
        assert_eq!(q, v("x").pow(2) + v("x").scale(&rat(2)) + Polynomial::int(1));
    }

    #[test]
    fn display_is_stable() {
        let p = (v("lenA") * v("lenB")).scale(&rat(2)) - v("j").scale(&rat(2)) + Polynomial::constant(ratio(1, 2));
        assert_eq!(p.to_string(), "2*lenA*lenB - 2*j + 1/2");
        assert_eq!(Polynomial::zero().to_string(), "0");
        assert_eq!((-v("x")).to_string(), "-x");
    }

    #[test]
    fn normalization_divides_gcd() {
        let p = v("x").scale(&rat(4)) - Polynomial::int(6);
        assert_eq!(p.normalized_nonneg(), v("x").scale(&rat(2)) - Polynomial::int(3));
        let q = v("x").scale(&ratio(1, 2)) - Polynomial::constant(ratio(1, 3));
        assert_eq!(q.normalized_nonneg(), v("x").scale(&rat(3)) - Polynomial::int(2));
    }

    #[test]
    fn affine_rejects_quadratic() {
        assert!(AffineExpr::new(v("x") * v("y")).is_err());
        assert!(AffineExpr::new(v("x") + Polynomial::int(3)).is_ok());
    }
}
