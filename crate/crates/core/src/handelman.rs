//! Handelman-style translation of polynomial implications with affine
//! premises into linear equalities over nonnegative multipliers.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{Signed, Zero};
use rayon::prelude::*;

use crate::constraints::ImplicationConstraint;
use crate::interval;
use crate::linear::{LinearCombo, Sym};
use crate::poly::{AffineExpr, Monomial, Polynomial, Rational, Var};

/// A product of at most K premises (indices into the premise list, as a
/// nondecreasing multiset) together with its expansion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductTerm {
    pub factors: Vec<usize>,
    pub expansion: Polynomial,
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of multisets of size at most `k_max` over `k` premises:
/// `Σ_{j≤K} C(k+j−1, j)`.
pub fn multiset_count(k: usize, k_max: u32) -> u64 {
    (0..=k_max as u64)
        .map(|j| if j == 0 { 1 } else if k == 0 { 0 } else { binomial(k as u64 + j - 1, j) })
        .sum()
}

/// All products of at most `k_max` premises, without deduplication.
pub fn prod_k_all(premises: &[AffineExpr], k_max: u32) -> Vec<ProductTerm> {
    let mut out = vec![ProductTerm {
        factors: vec![],
        expansion: Polynomial::int(1),
    }];
    let mut layer_start = 0;
    for _ in 0..k_max {
        let layer_end = out.len();
        for idx in layer_start..layer_end {
            let last = out[idx].factors.last().copied().unwrap_or(0);
            for (j, prem) in premises.iter().enumerate().skip(last) {
                let mut factors = out[idx].factors.clone();
                factors.push(j);
                let expansion = &out[idx].expansion * prem.poly();
                out.push(ProductTerm { factors, expansion });
            }
        }
        layer_start = layer_end;
    }
    out
}

/// All products of at most `k_max` premises, dropping products whose
/// expansion duplicates an earlier one.
pub fn prod_k(premises: &[AffineExpr], k_max: u32) -> Vec<ProductTerm> {
    let mut seen = BTreeSet::new();
    prod_k_all(premises, k_max)
        .into_iter()
        .filter(|t| seen.insert(t.expansion.terms().iter().map(|(m, c)| (m.clone(), c.clone())).collect::<Vec<_>>()))
        .collect()
}

/// Linear constraints produced for one implication.
#[derive(Clone, Debug, Default)]
pub struct Fragment {
    pub tag: String,
    /// Premises actually used, after normalization and deduplication.
    pub premises: Vec<AffineExpr>,
    pub multipliers: Vec<(Sym, ProductTerm)>,
    /// Each combination must equal zero.
    pub equalities: Vec<LinearCombo>,
    /// Premises are unsatisfiable by a constant conjunct; nothing to prove.
    pub vacuous: bool,
    pub warnings: Vec<String>,
    /// Variables left unbounded by the premises (the translation may then
    /// be incomplete).
    pub unbounded: Vec<Var>,
}

/// Deduplicates premises syntactically after normalization and drops
/// constant ones. Returns `None` if some premise is a negative constant.
pub fn clean_premises(premises: &[AffineExpr]) -> Option<Vec<AffineExpr>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for p in premises {
        let n = p.normalized();
        if n.is_constant() {
            if n.constant_term().is_negative() {
                return None;
            }
            continue;
        }
        if seen.insert(n.clone()) {
            out.push(n);
        }
    }
    Some(out)
}

pub fn translate(c: &ImplicationConstraint, k_max: u32) -> Fragment {
    let mut frag = Fragment {
        tag: c.tag.clone(),
        ..Fragment::default()
    };
    let Some(premises) = clean_premises(&c.premises) else {
        frag.vacuous = true;
        return frag;
    };
    if c.conclusion.is_zero() {
        frag.premises = premises;
        return frag;
    }
    if c.conclusion.degree() > k_max {
        frag.warnings.push(format!(
            "{}: conclusion has degree {} > K = {}; its top-degree coefficients are forced to zero",
            c.tag,
            c.conclusion.degree(),
            k_max
        ));
    }
    let mut vars: BTreeSet<Var> = premises.iter().flat_map(|p| p.vars()).collect();
    for m in c.conclusion.terms().keys() {
        vars.extend(m.vars().cloned());
    }
    let bounds = interval::bounds_from_conjuncts(&premises);
    frag.unbounded = vars
        .into_iter()
        .filter(|v| bounds.get(v).map_or(true, |b| !b.is_bounded()))
        .collect();

    let products = prod_k(&premises, k_max);
    let mut eqs: BTreeMap<Monomial, LinearCombo> = c.conclusion.terms().clone();
    for (k, g) in products.into_iter().enumerate() {
        let sym = Sym::new(&format!("c[{}]{}", c.tag, k));
        for (m, coef) in g.expansion.terms() {
            eqs.entry(m.clone()).or_default().add_term(sym.clone(), -coef.clone());
        }
        frag.multipliers.push((sym, g));
    }
    frag.equalities = eqs.into_values().filter(|l| !l.is_zero()).collect();
    frag.premises = premises;
    frag
}

/// Translates all constraints (in parallel), preserving order.
pub fn translate_all(cs: &[ImplicationConstraint], k_max: u32) -> Vec<Fragment> {
    cs.par_iter().map(|c| translate(c, k_max)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Linear program over symbols: `equalities = 0`, `inequalities ≥ 0`.
#[derive(Clone, Debug, Default)]
pub struct LinearSystem {
    pub variables: Vec<Sym>,
    pub equalities: Vec<LinearCombo>,
    pub inequalities: Vec<LinearCombo>,
    pub objective: Option<(Sense, LinearCombo)>,
}

impl LinearSystem {
    pub fn add_var(&mut self, s: &Sym, seen: &mut BTreeSet<Sym>) {
        if seen.insert(s.clone()) {
            self.variables.push(s.clone());
        }
    }

    /// Exact check of every constraint under `assignment` (missing
    /// variables count as zero).
    pub fn satisfied_by(&self, assignment: &BTreeMap<Sym, Rational>) -> bool {
        self.equalities.iter().all(|e| e.eval(assignment).is_zero())
            && self.inequalities.iter().all(|i| !i.eval(assignment).is_negative())
    }
}

/// Concatenates fragments into one system. `leading` symbols (template
/// unknowns, threshold) come first in the variable order.
pub fn assemble(
    fragments: &[Fragment],
    leading: &[Sym],
    extra_inequalities: Vec<LinearCombo>,
    objective: Option<(Sense, LinearCombo)>,
) -> LinearSystem {
    let mut sys = LinearSystem::default();
    let mut seen = BTreeSet::new();
    for s in leading {
        sys.add_var(s, &mut seen);
    }
    for f in fragments {
        for (s, _) in &f.multipliers {
            sys.add_var(s, &mut seen);
            sys.inequalities.push(LinearCombo::sym(s.clone()));
        }
        for e in &f.equalities {
            for s in e.terms().keys() {
                sys.add_var(s, &mut seen);
            }
            sys.equalities.push(e.clone());
        }
    }
    for i in &extra_inequalities {
        for s in i.terms().keys() {
            sys.add_var(s, &mut seen);
        }
    }
    sys.inequalities.extend(extra_inequalities);
    if let Some((_, o)) = &objective {
        for s in o.terms().keys() {
            sys.add_var(s, &mut seen);
        }
    }
    sys.objective = objective;
    sys
}

/// `Σ_g c_g · g` with the solved multiplier values.
pub fn reexpand(frag: &Fragment, assignment: &BTreeMap<Sym, Rational>) -> Polynomial {
    let mut acc = Polynomial::zero();
    for (s, g) in &frag.multipliers {
        if let Some(v) = assignment.get(s) {
            acc = acc + g.expansion.scale(v);
        }
    }
    acc
}

/// Re-expansion identity: the solved conclusion equals the nonnegative
/// combination of products, coefficient by coefficient.
pub fn reexpansion_holds(c: &ImplicationConstraint, frag: &Fragment, assignment: &BTreeMap<Sym, Rational>) -> bool {
    if frag.vacuous {
        return true;
    }
    let nonneg = frag
        .multipliers
        .iter()
        .all(|(s, _)| assignment.get(s).map_or(true, |v| !v.is_negative()));
    nonneg && c.conclusion.eval(assignment) == reexpand(frag, assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::SymPoly;
    use crate::poly::rat;

    fn v(s: &str) -> Polynomial {
        Polynomial::var(Var::new(s))
    }

    fn aff(p: Polynomial) -> AffineExpr {
        AffineExpr::new(p).unwrap()
    }

    #[test]
    fn multiset_counts() {
        let ps = [aff(v("a")), aff(v("b"))];
        assert_eq!(prod_k_all(&ps, 2).len(), 6);
        assert_eq!(multiset_count(2, 2), 6);
        assert_eq!(prod_k_all(&ps, 0).len(), 1);
        for k in 0..5 {
            let ps: Vec<AffineExpr> = (0..k).map(|i| aff(v(&format!("x{i}")))).collect();
            for kk in 0..4 {
                assert_eq!(prod_k_all(&ps, kk).len() as u64, multiset_count(k, kk));
            }
        }
    }

    #[test]
    fn product_expansion() {
        let ps = [aff(v("x")), aff(Polynomial::int(1) - v("x"))];
        let ts = prod_k(&ps, 2);
        assert_eq!(ts.len(), 6);
        let mixed = ts.iter().find(|t| t.factors == vec![0, 1]).unwrap();
        assert_eq!(mixed.expansion, v("x") - v("x").pow(2));
    }

    #[test]
    fn duplicate_expansions_keep_first() {
        // x and 2x normalize differently only before cleaning; feed raw duplicates.
        let ps = [aff(v("x")), aff(v("x"))];
        let all = prod_k_all(&ps, 1);
        let dedup = prod_k(&ps, 1);
        assert_eq!(all.len(), 3);
        assert_eq!(dedup.len(), 2);
        assert_eq!(dedup[1].factors, vec![0]);
    }

    #[test]
    fn vacuous_and_constant_premises() {
        assert_eq!(clean_premises(&[aff(Polynomial::int(-1))]), None);
        let cleaned = clean_premises(&[aff(Polynomial::int(3)), aff(v("x").scale(&rat(2))), aff(v("x"))]).unwrap();
        assert_eq!(cleaned, vec![aff(v("x"))]);
    }

    #[test]
    fn degree_warning() {
        let c = ImplicationConstraint {
            premises: vec![aff(v("x"))],
            conclusion: SymPoly::from_poly(&v("x").pow(2)),
            tag: "w".into(),
        };
        let f = translate(&c, 1);
        assert_eq!(f.warnings.len(), 1);
        assert_eq!(f.unbounded, vec![Var::new("x")]);
    }
}
