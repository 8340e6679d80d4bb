//! Symbolic templates and the implication constraints defining potential
//! functions, anti-potential functions and thresholds.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::invariants::InvariantMap;
use crate::linear::{LinearCombo, Sym};
use crate::poly::{monomials, AffineExpr, Monomial, Polynomial, Rational, Var};
use crate::ts::{cost_var, substitute_update, Assertion, Transition, TransitionSystem, UpdateEntry, Valuation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstraintError {
    #[error("transition `{0}` updates cost nondeterministically")]
    NondetCost(String),
    #[error("the two systems do not share the same variables")]
    VariableMismatch,
    #[error("bound has degree {degree} but templates have degree {d}")]
    DegreeTooHigh { degree: u32, d: u32 },
    #[error("witness input {0} does not satisfy the initial assertion")]
    WitnessOutsideTheta(String),
    #[error("witness input: {0}")]
    Eval(#[from] crate::error::EvalError),
}

/// Per-location symbolic polynomials `Σ u_f · f` over all monomials `f` of
/// degree at most `degree`.
#[derive(Clone, Debug)]
pub struct TemplateMap {
    pub tag: String,
    pub vars: Vec<Var>,
    pub degree: u32,
    pub locations: Vec<String>,
    templates: BTreeMap<String, Vec<(Monomial, Sym)>>,
}

pub fn fix_templates(ts: &TransitionSystem, d: u32, tag: &str, include_cost: bool) -> TemplateMap {
    let cost = cost_var();
    let vars: Vec<Var> = ts
        .variables
        .iter()
        .filter(|v| include_cost || **v != cost)
        .cloned()
        .collect();
    fix_templates_over(ts, vars, d, tag)
}

/// Templates over an explicit variable list.
pub fn fix_templates_over(ts: &TransitionSystem, vars: Vec<Var>, d: u32, tag: &str) -> TemplateMap {
    let monos = monomials(&vars, d);
    let templates = ts
        .locations
        .iter()
        .map(|l| {
            let terms = monos
                .iter()
                .map(|m| (m.clone(), Sym::new(&format!("{tag}:{l}:{m}"))))
                .collect();
            (l.clone(), terms)
        })
        .collect();
    TemplateMap {
        tag: tag.to_string(),
        vars,
        degree: d,
        locations: ts.locations.clone(),
        templates,
    }
}

impl TemplateMap {
    /// Whether premises over `v` may be kept. Cost premises are handled
    /// separately, and dropping premises only weakens the implication.
    fn covers(&self, v: &Var) -> bool {
        *v == cost_var() || self.vars.contains(v)
    }

    pub fn at(&self, loc: &str) -> &[(Monomial, Sym)] {
        self.templates.get(loc).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn var_count(&self) -> usize {
        self.templates.values().map(Vec::len).sum()
    }

    pub fn symbols(&self) -> impl Iterator<Item = &Sym> {
        self.locations.iter().flat_map(|l| self.at(l).iter().map(|(_, s)| s))
    }

    pub fn sym_poly(&self, loc: &str) -> SymPoly {
        let mut p = SymPoly::zero();
        for (m, s) in self.at(loc) {
            p.add(m.clone(), &LinearCombo::sym(s.clone()));
        }
        p
    }

    /// Template at `loc` with the transition's update substituted.
    pub fn after_update(&self, loc: &str, t: &Transition) -> SymPoly {
        let mut p = SymPoly::zero();
        for (m, s) in self.at(loc) {
            let q = substitute_update(&Polynomial::monomial(m.clone(), Rational::one()), &t.update, &t.id);
            p.add_poly_scaled(&q, &LinearCombo::sym(s.clone()));
        }
        p
    }

    /// Template at `loc` evaluated at a concrete valuation.
    pub fn at_point(&self, loc: &str, x: &Valuation) -> Result<LinearCombo, ConstraintError> {
        let mut l = LinearCombo::zero();
        for (m, s) in self.at(loc) {
            let v = m.eval(&|var| x.get(var).map(|n| Rational::from_integer(n.clone())))?;
            l.add_term(s.clone(), v);
        }
        Ok(l)
    }

    /// Concrete per-location polynomials under an assignment of the
    /// template unknowns (unassigned unknowns count as zero).
    pub fn instantiate(&self, assignment: &BTreeMap<Sym, Rational>) -> BTreeMap<String, Polynomial> {
        self.locations
            .iter()
            .map(|l| {
                let p = Polynomial::from_terms(
                    self.at(l)
                        .iter()
                        .map(|(m, s)| (m.clone(), assignment.get(s).cloned().unwrap_or_else(Rational::zero))),
                );
                (l.clone(), p)
            })
            .collect()
    }
}

/// Polynomial over program variables whose coefficients are linear in the
/// template unknowns.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct SymPoly {
    terms: BTreeMap<Monomial, LinearCombo>,
}

impl SymPoly {
    pub fn zero() -> Self {
        SymPoly::default()
    }

    pub fn from_poly(p: &Polynomial) -> Self {
        let mut s = SymPoly::zero();
        s.add_poly_scaled(p, &LinearCombo::constant(Rational::one()));
        s
    }

    pub fn constant(l: LinearCombo) -> Self {
        let mut s = SymPoly::zero();
        s.add(Monomial::one(), &l);
        s
    }

    pub fn add(&mut self, m: Monomial, l: &LinearCombo) {
        let e = self.terms.entry(m.clone()).or_default();
        e.add_scaled(l, &Rational::one());
        if e.is_zero() {
            self.terms.remove(&m);
        }
    }

    /// Adds `l · p`.
    pub fn add_poly_scaled(&mut self, p: &Polynomial, l: &LinearCombo) {
        for (m, c) in p.terms() {
            self.add(m.clone(), &l.scale(c));
        }
    }

    pub fn add_sympoly(&mut self, other: &SymPoly, k: &Rational) {
        for (m, l) in &other.terms {
            self.add(m.clone(), &l.scale(k));
        }
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, LinearCombo> {
        &self.terms
    }

    pub fn coeff(&self, m: &Monomial) -> LinearCombo {
        self.terms.get(m).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn vars(&self) -> std::collections::BTreeSet<Var> {
        self.terms.keys().flat_map(|m| m.vars().cloned()).collect()
    }

    pub fn mentions(&self, v: &Var) -> bool {
        self.terms.keys().any(|m| m.exponent(v) > 0)
    }

    pub fn eval(&self, assignment: &BTreeMap<Sym, Rational>) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().map(|(m, l)| (m.clone(), l.eval(assignment))))
    }
}

impl fmt::Debug for SymPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.terms.iter().map(|(m, l)| format!("({l})*{m}")).collect();
        if parts.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&parts.join(" + "))
        }
    }
}

/// `∀x. premises(x) ≥ 0 ⇒ conclusion(x) ≥ 0`.
#[derive(Clone, Debug)]
pub struct ImplicationConstraint {
    pub premises: Vec<AffineExpr>,
    pub conclusion: SymPoly,
    pub tag: String,
}

impl ImplicationConstraint {
    fn new(premises: Vec<AffineExpr>, conclusion: SymPoly, tag: String) -> Self {
        // Premises about cost only help when the conclusion mentions cost.
        let cost = cost_var();
        let premises = if conclusion.mentions(&cost) {
            premises
        } else {
            premises.into_iter().filter(|p| p.coeff(&cost).is_zero()).collect()
        };
        ImplicationConstraint {
            premises,
            conclusion,
            tag,
        }
    }
}

fn nondet_premises(t: &Transition) -> Vec<AffineExpr> {
    let mut out = Vec::new();
    for (v, e) in &t.update.entries {
        if let UpdateEntry::Nondeterministic { lower, upper } = e {
            let fresh = Polynomial::var(v.fresh(&t.id));
            if let Some(lo) = lower {
                out.push(AffineExpr::new(&fresh - lo.poly()).expect("affine"));
            }
            if let Some(hi) = upper {
                out.push(AffineExpr::new(hi.poly() - &fresh).expect("affine"));
            }
        }
    }
    out
}

fn transition_premises(inv: &InvariantMap, t: &Transition, tmpl: &TemplateMap) -> Vec<AffineExpr> {
    let mut premises = inv.get(&t.source).conjuncts.clone();
    premises.extend(t.guard.conjuncts.iter().cloned());
    premises.extend(nondet_premises(t));
    let fresh: Vec<Var> = tmpl.vars.iter().map(|v| v.fresh(&t.id)).collect();
    premises.retain(|p| p.vars().iter().all(|v| tmpl.covers(v) || fresh.contains(v)));
    premises
}

fn location_premises(a: &Assertion, tmpl: &TemplateMap) -> Vec<AffineExpr> {
    a.conjuncts
        .iter()
        .filter(|p| p.vars().iter().all(|v| tmpl.covers(v)))
        .cloned()
        .collect()
}

fn cost_delta(t: &Transition) -> Result<Polynomial, ConstraintError> {
    t.cost_delta().map_err(|_| ConstraintError::NondetCost(t.id.clone()))
}

/// Potential-function constraints: the template decreases by at least the
/// incurred cost along every transition and is nonnegative at termination.
pub fn collect_pf_constraints(
    ts: &TransitionSystem,
    inv: &InvariantMap,
    tmpl: &TemplateMap,
) -> Result<Vec<ImplicationConstraint>, ConstraintError> {
    let mut out = Vec::new();
    for t in &ts.transitions {
        let mut c = tmpl.sym_poly(&t.source);
        c.add_sympoly(&tmpl.after_update(&t.target, t), &-Rational::one());
        c.add_poly_scaled(&cost_delta(t)?, &LinearCombo::constant(-Rational::one()));
        out.push(ImplicationConstraint::new(
            transition_premises(inv, t, tmpl),
            c,
            format!("pf:{}:{}", tmpl.tag, t.id),
        ));
    }
    out.push(ImplicationConstraint::new(
        location_premises(inv.get(&ts.terminal), tmpl),
        tmpl.sym_poly(&ts.terminal),
        format!("pf:{}:term", tmpl.tag),
    ));
    Ok(out)
}

/// Anti-potential constraints: the template increases by at most the
/// incurred cost along every transition and is nonpositive at termination.
pub fn collect_antipf_constraints(
    ts: &TransitionSystem,
    inv: &InvariantMap,
    tmpl: &TemplateMap,
) -> Result<Vec<ImplicationConstraint>, ConstraintError> {
    let mut out = Vec::new();
    for t in &ts.transitions {
        let mut c = tmpl.after_update(&t.target, t);
        c.add_poly_scaled(&cost_delta(t)?, &LinearCombo::constant(Rational::one()));
        c.add_sympoly(&tmpl.sym_poly(&t.source), &-Rational::one());
        out.push(ImplicationConstraint::new(
            transition_premises(inv, t, tmpl),
            c,
            format!("anti:{}:{}", tmpl.tag, t.id),
        ));
    }
    let mut term = SymPoly::zero();
    term.add_sympoly(&tmpl.sym_poly(&ts.terminal), &-Rational::one());
    out.push(ImplicationConstraint::new(
        location_premises(inv.get(&ts.terminal), tmpl),
        term,
        format!("anti:{}:term", tmpl.tag),
    ));
    Ok(out)
}

fn same_vars(a: &TemplateMap, b: &TemplateMap) -> Result<(), ConstraintError> {
    let mut va = a.vars.clone();
    let mut vb = b.vars.clone();
    va.sort();
    vb.sort();
    if va == vb {
        Ok(())
    } else {
        Err(ConstraintError::VariableMismatch)
    }
}

/// `Θ0 ⇒ bound − (φ_new(ℓ0) − χ_old(ℓ0)) ≥ 0`.
fn difference_constraint(
    theta0: &Assertion,
    pf_new: &TemplateMap,
    init_new: &str,
    anti_old: &TemplateMap,
    init_old: &str,
    bound: SymPoly,
    tag: &str,
) -> Result<ImplicationConstraint, ConstraintError> {
    same_vars(pf_new, anti_old)?;
    let extra = bound.vars();
    let premises = theta0
        .conjuncts
        .iter()
        .filter(|p| p.vars().iter().all(|v| pf_new.covers(v) || extra.contains(v)))
        .cloned()
        .collect();
    let mut c = bound;
    c.add_sympoly(&pf_new.sym_poly(init_new), &-Rational::one());
    c.add_sympoly(&anti_old.sym_poly(init_old), &Rational::one());
    Ok(ImplicationConstraint::new(premises, c, tag.to_string()))
}

pub fn threshold_sym() -> Sym {
    Sym::new("t")
}

pub fn precision_sym() -> Sym {
    Sym::new("p")
}

pub fn collect_diffcost_constraint(
    theta0: &Assertion,
    tmpl_new: &TemplateMap,
    init_new: &str,
    tmpl_old: &TemplateMap,
    init_old: &str,
    t: &Sym,
) -> Result<ImplicationConstraint, ConstraintError> {
    let bound = SymPoly::constant(LinearCombo::sym(t.clone()));
    difference_constraint(theta0, tmpl_new, init_new, tmpl_old, init_old, bound, "diffcost")
}

pub fn collect_symbolic_bound_constraint(
    theta0: &Assertion,
    tmpl_new: &TemplateMap,
    init_new: &str,
    tmpl_old: &TemplateMap,
    init_old: &str,
    p: &Polynomial,
) -> Result<ImplicationConstraint, ConstraintError> {
    let d = tmpl_new.degree.min(tmpl_old.degree);
    if p.degree() > d {
        return Err(ConstraintError::DegreeTooHigh { degree: p.degree(), d });
    }
    difference_constraint(theta0, tmpl_new, init_new, tmpl_old, init_old, SymPoly::from_poly(p), "bound")
}

/// Constraints refuting threshold `t` at input `x0`: an anti-potential for
/// the new system, a potential for the old one, and the ground constraint
/// `χ_new(ℓ0, x0) − φ_old(ℓ0, x0) ≥ t + eps`.
#[allow(clippy::too_many_arguments)]
pub fn collect_refutation_constraints(
    new: &TransitionSystem,
    inv_new: &InvariantMap,
    anti_new: &TemplateMap,
    old: &TransitionSystem,
    inv_old: &InvariantMap,
    pf_old: &TemplateMap,
    x0: &Valuation,
    t: &Rational,
    eps: &Rational,
) -> Result<Vec<ImplicationConstraint>, ConstraintError> {
    same_vars(anti_new, pf_old)?;
    if !new.theta0.holds(x0)? {
        return Err(ConstraintError::WitnessOutsideTheta(x0.to_string()));
    }
    let mut out = collect_antipf_constraints(new, inv_new, anti_new)?;
    out.extend(collect_pf_constraints(old, inv_old, pf_old)?);
    let mut ground = anti_new.at_point(&new.initial, x0)? - pf_old.at_point(&old.initial, x0)?;
    ground.constant -= t + eps;
    out.push(ImplicationConstraint::new(vec![], SymPoly::constant(ground), "refute".into()));
    Ok(out)
}

/// Single-program precision: potential and anti-potential for the same
/// system with `Θ0 ⇒ p − (φ(ℓ0) − χ(ℓ0)) ≥ 0`.
pub fn collect_precision_constraints(
    ts: &TransitionSystem,
    inv: &InvariantMap,
    tmpl_pf: &TemplateMap,
    tmpl_anti: &TemplateMap,
    p: &Sym,
) -> Result<Vec<ImplicationConstraint>, ConstraintError> {
    let mut out = collect_pf_constraints(ts, inv, tmpl_pf)?;
    out.extend(collect_antipf_constraints(ts, inv, tmpl_anti)?);
    let bound = SymPoly::constant(LinearCombo::sym(p.clone()));
    out.push(difference_constraint(
        &ts.theta0,
        tmpl_pf,
        &ts.initial,
        tmpl_anti,
        &ts.initial,
        bound,
        "precision",
    )?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_transition_system;
    use crate::poly::rat;

    fn loop_ts() -> TransitionSystem {
        parse_transition_system(
            "vars x cost; init l; terminal out; trans l -> l update x := x + 1, cost := cost + 1; trans l -> out;",
        )
        .unwrap()
    }

    #[test]
    fn template_counts() {
        let ts = parse_transition_system(
            "vars x n cost; locations a b c; init a; terminal c; trans a -> b; trans b -> c;",
        )
        .unwrap();
        assert_eq!(fix_templates(&ts, 2, "new", false).var_count(), 18);
        assert_eq!(fix_templates(&ts, 0, "new", false).var_count(), 3);
        assert_eq!(fix_templates(&ts, 1, "new", true).var_count(), 3 * 4);
    }

    #[test]
    fn pf_and_anti_conclusions_by_hand() {
        let ts = loop_ts();
        let tmpl = fix_templates(&ts, 1, "n", false);
        let inv = InvariantMap::trivial(&ts);
        let a = Sym::new("n:l:x");
        let pf = collect_pf_constraints(&ts, &inv, &tmpl).unwrap();
        // (a x + b) - (a (x + 1) + b) - 1 = -a - 1
        let expect = LinearCombo::term(a.clone(), rat(-1)) + LinearCombo::constant(rat(-1));
        assert_eq!(pf[0].conclusion, SymPoly::constant(expect));
        let anti = collect_antipf_constraints(&ts, &inv, &tmpl).unwrap();
        let expect = LinearCombo::sym(a) + LinearCombo::constant(rat(1));
        assert_eq!(anti[0].conclusion, SymPoly::constant(expect));
        assert_eq!(pf.len(), ts.transitions.len() + 1);
    }

    #[test]
    fn nondet_fresh_variable_and_bounds() {
        let ts = parse_transition_system(
            "vars y cost; init l; terminal out; trans t3: l -> out update y := nondet in [0, 5], cost := cost + y;",
        )
        .unwrap();
        let tmpl = fix_templates(&ts, 1, "n", false);
        let pf = collect_pf_constraints(&ts, &InvariantMap::trivial(&ts), &tmpl).unwrap();
        let fresh = Var::new("y@t3");
        assert!(pf[0].conclusion.mentions(&fresh));
        assert_eq!(pf[0].premises.len(), 2);
        assert_eq!(pf[0].tag, "pf:n:t3");
    }

    #[test]
    fn symbolic_bound_degree_check() {
        let ts = loop_ts();
        let t1 = fix_templates(&ts, 1, "new", false);
        let t2 = fix_templates(&ts, 1, "old", false);
        let p = Polynomial::var(Var::new("x")).pow(2);
        let err = collect_symbolic_bound_constraint(&ts.theta0, &t1, "l", &t2, "l", &p).unwrap_err();
        assert_eq!(err, ConstraintError::DegreeTooHigh { degree: 2, d: 1 });
    }
}
