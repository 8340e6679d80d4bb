//! Integer intervals with rational endpoints and interval arithmetic.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, Zero};

use crate::poly::{fmt_rational, AffineExpr, Polynomial, Rational, Var};

/// `[lo, hi]`, where a missing endpoint is infinite.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: Option<Rational>,
    pub hi: Option<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Ext {
    NegInf,
    Fin(Rational),
    PosInf,
}

impl Ext {
    fn mul(&self, other: &Ext) -> Ext {
        use Ext::*;
        match (self, other) {
            (Fin(a), Fin(b)) => Fin(a * b),
            (Fin(a), inf) | (inf, Fin(a)) => {
                if a.is_zero() {
                    Fin(Rational::zero())
                } else if a.is_positive() == (*inf == PosInf) {
                    PosInf
                } else {
                    NegInf
                }
            }
            (a, b) => {
                if a == b {
                    PosInf
                } else {
                    NegInf
                }
            }
        }
    }
}

impl Interval {
    pub fn top() -> Self {
        Interval { lo: None, hi: None }
    }

    pub fn point(c: Rational) -> Self {
        Interval {
            lo: Some(c.clone()),
            hi: Some(c),
        }
    }

    pub fn new(lo: Option<Rational>, hi: Option<Rational>) -> Self {
        Interval { lo, hi }
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_some() && self.hi.is_some()
    }

    pub fn is_empty(&self) -> bool {
        matches!((&self.lo, &self.hi), (Some(l), Some(h)) if l > h)
    }

    pub fn contains(&self, x: &Rational) -> bool {
        self.lo.as_ref().map_or(true, |l| l <= x) && self.hi.as_ref().map_or(true, |h| x <= h)
    }

    fn lo_ext(&self) -> Ext {
        self.lo.clone().map_or(Ext::NegInf, Ext::Fin)
    }

    fn hi_ext(&self) -> Ext {
        self.hi.clone().map_or(Ext::PosInf, Ext::Fin)
    }

    fn from_ext(lo: Ext, hi: Ext) -> Self {
        let f = |e: Ext| match e {
            Ext::Fin(r) => Some(r),
            _ => None,
        };
        Interval { lo: f(lo), hi: f(hi) }
    }

    pub fn add(&self, o: &Interval) -> Interval {
        let lo = match (&self.lo, &o.lo) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        let hi = match (&self.hi, &o.hi) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        Interval { lo, hi }
    }

    pub fn neg(&self) -> Interval {
        Interval {
            lo: self.hi.as_ref().map(|h| -h),
            hi: self.lo.as_ref().map(|l| -l),
        }
    }

    pub fn mul(&self, o: &Interval) -> Interval {
        let cands = [
            self.lo_ext().mul(&o.lo_ext()),
            self.lo_ext().mul(&o.hi_ext()),
            self.hi_ext().mul(&o.lo_ext()),
            self.hi_ext().mul(&o.hi_ext()),
        ];
        let lo = cands.iter().min().unwrap().clone();
        let hi = cands.iter().max().unwrap().clone();
        Interval::from_ext(lo, hi)
    }

    pub fn scale(&self, c: &Rational) -> Interval {
        self.mul(&Interval::point(c.clone()))
    }

    pub fn pow(&self, e: u32) -> Interval {
        if e == 0 {
            return Interval::point(Rational::from_integer(1.into()));
        }
        let p = |x: &Rational| num_traits::pow(x.clone(), e as usize);
        if e % 2 == 1 {
            return Interval {
                lo: self.lo.as_ref().map(p),
                hi: self.hi.as_ref().map(p),
            };
        }
        let nonneg = self.lo.as_ref().map_or(false, |l| !l.is_negative());
        let nonpos = self.hi.as_ref().map_or(false, |h| !h.is_positive());
        if nonneg {
            Interval {
                lo: self.lo.as_ref().map(p),
                hi: self.hi.as_ref().map(p),
            }
        } else if nonpos {
            Interval {
                lo: self.hi.as_ref().map(p),
                hi: self.lo.as_ref().map(p),
            }
        } else {
            let hi = match (&self.lo, &self.hi) {
                (Some(l), Some(h)) => Some(p(l).max(p(h))),
                _ => None,
            };
            Interval {
                lo: Some(Rational::zero()),
                hi,
            }
        }
    }

    pub fn meet(&self, o: &Interval) -> Interval {
        let lo = match (&self.lo, &o.lo) {
            (Some(a), Some(b)) => Some(a.max(b).clone()),
            (a, b) => a.clone().or_else(|| b.clone()),
        };
        let hi = match (&self.hi, &o.hi) {
            (Some(a), Some(b)) => Some(a.min(b).clone()),
            (a, b) => a.clone().or_else(|| b.clone()),
        };
        Interval { lo, hi }
    }

    pub fn join(&self, o: &Interval) -> Interval {
        let lo = match (&self.lo, &o.lo) {
            (Some(a), Some(b)) => Some(a.min(b).clone()),
            _ => None,
        };
        let hi = match (&self.hi, &o.hi) {
            (Some(a), Some(b)) => Some(a.max(b).clone()),
            _ => None,
        };
        Interval { lo, hi }
    }

    /// Standard widening: any endpoint that moved outward becomes infinite.
    pub fn widen(&self, newer: &Interval) -> Interval {
        let lo = match (&self.lo, &newer.lo) {
            (Some(a), Some(b)) if b >= a => Some(a.clone()),
            _ => None,
        };
        let hi = match (&self.hi, &newer.hi) {
            (Some(a), Some(b)) if b <= a => Some(a.clone()),
            _ => None,
        };
        Interval { lo, hi }
    }

    /// Tightens endpoints to integers (variables are integer-valued).
    pub fn to_integer(&self) -> Interval {
        Interval {
            lo: self.lo.as_ref().map(|l| l.ceil()),
            hi: self.hi.as_ref().map(|h| h.floor()),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lo = self.lo.as_ref().map_or("-inf".to_string(), fmt_rational);
        let hi = self.hi.as_ref().map_or("+inf".to_string(), fmt_rational);
        write!(f, "[{lo}, {hi}]")
    }
}

pub type IntervalBox = BTreeMap<Var, Interval>;

fn get(b: &IntervalBox, v: &Var) -> Interval {
    b.get(v).cloned().unwrap_or_else(Interval::top)
}

/// Interval enclosure of `p` over the box (absent variables are top).
pub fn eval_poly(p: &Polynomial, b: &IntervalBox) -> Interval {
    let mut acc = Interval::point(Rational::zero());
    for (m, c) in p.terms() {
        let mut term = Interval::point(c.clone());
        for (v, e) in m.factors() {
            term = term.mul(&get(b, v).pow(*e));
        }
        acc = acc.add(&term);
    }
    acc
}

/// Refines the box with `a ≥ 0`. Returns `false` if the box becomes empty.
pub fn refine(b: &mut IntervalBox, a: &AffineExpr) -> bool {
    let terms: Vec<(Var, Rational)> = a.linear_terms().map(|(v, c)| (v.clone(), c.clone())).collect();
    if terms.is_empty() {
        return !a.constant_term().is_negative();
    }
    for (v, c) in &terms {
        // c·v + rest ≥ 0 with rest ≤ rest_hi  ⇒  c·v ≥ −rest_hi.
        let mut rest = Interval::point(a.constant_term());
        for (w, d) in &terms {
            if w != v {
                rest = rest.add(&get(b, w).scale(d));
            }
        }
        let Some(rest_hi) = rest.hi else { continue };
        let bound = -rest_hi / c;
        let cur = get(b, v);
        let refined = if c.is_positive() {
            cur.meet(&Interval::new(Some(bound), None))
        } else {
            cur.meet(&Interval::new(None, Some(bound)))
        }
        .to_integer();
        if refined.is_empty() {
            b.insert(v.clone(), refined);
            return false;
        }
        b.insert(v.clone(), refined);
    }
    true
}

/// Refines the box with every conjunct, a few rounds. `false` if empty.
pub fn refine_all(b: &mut IntervalBox, conjuncts: &[AffineExpr]) -> bool {
    for _ in 0..3 {
        let before = b.clone();
        for c in conjuncts {
            if !refine(b, c) {
                return false;
            }
        }
        if *b == before {
            break;
        }
    }
    true
}

/// Interval bounds implied by a conjunction (by propagation, not exact).
pub fn bounds_from_conjuncts(conjuncts: &[AffineExpr]) -> IntervalBox {
    let mut b = IntervalBox::new();
    if !refine_all(&mut b, conjuncts) {
        // Infeasible premises bound everything.
        for v in conjuncts.iter().flat_map(|c| c.vars()) {
            b.insert(v, Interval::point(Rational::zero()));
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{rat, ratio};

    fn iv(lo: i64, hi: i64) -> Interval {
        Interval::new(Some(rat(lo)), Some(rat(hi)))
    }

    #[test]
    fn arithmetic() {
        assert_eq!(iv(-2, 3).mul(&iv(4, 5)), iv(-10, 15));
        assert_eq!(iv(-2, 3).pow(2), iv(0, 9));
        assert_eq!(iv(-3, -2).pow(2), iv(4, 9));
        assert_eq!(iv(-2, 3).pow(3), iv(-8, 27));
        let half_open = Interval::new(Some(rat(1)), None);
        assert_eq!(half_open.mul(&iv(-1, 2)), Interval::top());
        assert_eq!(Interval::point(rat(0)).mul(&Interval::top()), iv(0, 0));
        assert_eq!(Interval::new(Some(ratio(1, 2)), Some(ratio(7, 2))).to_integer(), iv(1, 3));
    }

    #[test]
    fn widening_and_join() {
        assert_eq!(iv(0, 1).widen(&iv(0, 2)), Interval::new(Some(rat(0)), None));
        assert_eq!(iv(0, 1).join(&iv(3, 4)), iv(0, 4));
    }

    #[test]
    fn guard_refinement() {
        let x = Var::new("x");
        let n = Var::new("n");
        let mut b = IntervalBox::new();
        b.insert(n.clone(), iv(1, 100));
        b.insert(x.clone(), Interval::new(Some(rat(0)), None));
        // n - x - 1 >= 0
        let g = AffineExpr::new(Polynomial::var(n) - Polynomial::var(x.clone()) - Polynomial::int(1)).unwrap();
        assert!(refine(&mut b, &g));
        assert_eq!(b[&x], iv(0, 99));
        let bad = AffineExpr::new(Polynomial::var(x) - Polynomial::int(200)).unwrap();
        assert!(!refine(&mut b, &bad));
    }
}
