//! Transition-system program model.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use num_bigint::BigInt;
use num_traits::{One, Signed};

use crate::error::{EvalError, ModelError};
use crate::poly::{fmt_rational, AffineExpr, Polynomial, Rational, Var};

pub const COST: &str = "cost";

pub fn cost_var() -> Var {
    Var::new(COST)
}

/// Conjunction of affine constraints `expr >= 0`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Assertion {
    pub conjuncts: Vec<AffineExpr>,
}

impl Assertion {
    pub fn truth() -> Self {
        Assertion::default()
    }

    pub fn new(conjuncts: Vec<AffineExpr>) -> Self {
        Assertion { conjuncts }
    }

    pub fn is_true(&self) -> bool {
        self.conjuncts.is_empty()
    }

    pub fn holds(&self, x: &Valuation) -> Result<bool, EvalError> {
        for c in &self.conjuncts {
            if c.poly().eval(x)?.is_negative() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn holds_with(&self, lookup: &impl Fn(&Var) -> Option<Rational>) -> Result<bool, EvalError> {
        for c in &self.conjuncts {
            if c.poly().eval_with(lookup)?.is_negative() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.conjuncts.iter().flat_map(|c| c.vars()).collect()
    }

    /// Normalized, deduplicated copy preserving first-occurrence order.
    pub fn dedup(&self) -> Assertion {
        let mut seen = BTreeSet::new();
        let conjuncts = self
            .conjuncts
            .iter()
            .map(AffineExpr::normalized)
            .filter(|c| seen.insert(c.clone()))
            .collect();
        Assertion { conjuncts }
    }

    /// Drops conjuncts implied by another one with the same linear part:
    /// of `L + a >= 0` and `L + b >= 0` only the one with the smaller
    /// constant is kept.
    pub fn without_weaker(&self) -> Assertion {
        let mut best: Vec<(Polynomial, Rational, AffineExpr)> = Vec::new();
        for c in &self.conjuncts {
            let k = c.constant_term();
            let lin = c.poly() - &Polynomial::constant(k.clone());
            if lin.is_zero() {
                best.push((lin, k, c.clone()));
                continue;
            }
            let norm = lin.normalized_nonneg();
            let factor = norm.terms().iter().next().map(|(m, v)| v / lin.coeff(m)).unwrap_or_else(Rational::one);
            let k = k * factor;
            match best.iter_mut().find(|(l, _, _)| *l == norm) {
                Some(entry) if k < entry.1 => {
                    entry.1 = k;
                    entry.2 = c.clone();
                }
                Some(_) => {}
                None => best.push((norm, k, c.clone())),
            }
        }
        Assertion {
            conjuncts: best.into_iter().map(|(_, _, c)| c).collect(),
        }
    }

    pub fn and(&self, other: &Assertion) -> Assertion {
        let mut conjuncts = self.conjuncts.clone();
        conjuncts.extend(other.conjuncts.iter().cloned());
        Assertion { conjuncts }
    }
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.conjuncts.is_empty() {
            return f.write_str("true");
        }
        for (k, c) in self.conjuncts.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c} >= 0")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum UpdateEntry {
    Deterministic(Polynomial),
    /// Fresh integer value, optionally bounded by affine expressions over the
    /// pre-state.
    Nondeterministic {
        lower: Option<AffineExpr>,
        upper: Option<AffineExpr>,
    },
}

impl UpdateEntry {
    pub fn is_identity_for(&self, v: &Var) -> bool {
        matches!(self, UpdateEntry::Deterministic(p) if *p == Polynomial::var(v.clone()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Update {
    pub entries: BTreeMap<Var, UpdateEntry>,
}

impl Update {
    pub fn identity(vars: &[Var]) -> Self {
        Update {
            entries: vars
                .iter()
                .map(|v| (v.clone(), UpdateEntry::Deterministic(Polynomial::var(v.clone()))))
                .collect(),
        }
    }

    pub fn get(&self, v: &Var) -> Option<&UpdateEntry> {
        self.entries.get(v)
    }

    pub fn set(&mut self, v: Var, e: UpdateEntry) {
        self.entries.insert(v, e);
    }

    pub fn is_identity(&self) -> bool {
        self.entries.iter().all(|(v, e)| e.is_identity_for(v))
    }

    /// Variables assigned something other than themselves.
    pub fn written(&self) -> impl Iterator<Item = &Var> {
        self.entries
            .iter()
            .filter(|(v, e)| !e.is_identity_for(v))
            .map(|(v, _)| v)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Transition {
    pub id: String,
    pub source: String,
    pub target: String,
    pub guard: Assertion,
    pub update: Update,
}

fn entry_vars(e: &UpdateEntry) -> BTreeSet<Var> {
    match e {
        UpdateEntry::Deterministic(p) => p.vars(),
        UpdateEntry::Nondeterministic { lower, upper } => lower
            .iter()
            .chain(upper.iter())
            .flat_map(|a| a.vars())
            .collect(),
    }
}

impl Transition {
    /// Cost incurred by the transition, `Up(cost) - cost`, as a polynomial
    /// over the pre-state.
    pub fn cost_delta(&self) -> Result<Polynomial, ModelError> {
        match self.update.get(&cost_var()) {
            None => Ok(Polynomial::zero()),
            Some(UpdateEntry::Deterministic(p)) => Ok(p - &Polynomial::var(cost_var())),
            Some(UpdateEntry::Nondeterministic { .. }) => Err(ModelError::NondetCost(self.id.clone())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionSystem {
    pub locations: Vec<String>,
    pub variables: Vec<Var>,
    pub transitions: Vec<Transition>,
    pub initial: String,
    pub terminal: String,
    pub theta0: Assertion,
}

/// Integer valuation of program variables.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Valuation(pub BTreeMap<Var, BigInt>);

impl Valuation {
    pub fn new() -> Self {
        Valuation::default()
    }

    pub fn from_pairs<'a, I: IntoIterator<Item = (&'a str, i64)>>(pairs: I) -> Self {
        Valuation(
            pairs
                .into_iter()
                .map(|(k, v)| (Var::new(k), BigInt::from(v)))
                .collect(),
        )
    }

    pub fn get(&self, v: &Var) -> Option<&BigInt> {
        self.0.get(v)
    }

    pub fn set(&mut self, v: Var, value: BigInt) {
        self.0.insert(v, value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &BigInt)> {
        self.0.iter()
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, (v, n)) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}: {n}")?;
        }
        f.write_str("}")
    }
}

/// Replaces every variable of `p` by its image under `up`: deterministic
/// entries by their polynomial, nondeterministic ones by the fresh variable
/// `var@transition_id`.
pub fn substitute_update(p: &Polynomial, up: &Update, transition_id: &str) -> Polynomial {
    p.substitute(&|v| match up.get(v) {
        Some(UpdateEntry::Deterministic(q)) => Some(q.clone()),
        Some(UpdateEntry::Nondeterministic { .. }) => Some(Polynomial::var(v.fresh(transition_id))),
        None => None,
    })
}

impl TransitionSystem {
    /// Variables that can influence control flow or cost: those read by a
    /// guard or by a cost update, closed under the updates that write them.
    /// Cost itself is excluded.
    pub fn cost_relevant_vars(&self) -> BTreeSet<Var> {
        let cost = cost_var();
        let mut rel: BTreeSet<Var> = BTreeSet::new();
        for t in &self.transitions {
            rel.extend(t.guard.vars());
            if let Some(e) = t.update.get(&cost) {
                rel.extend(entry_vars(e));
            }
        }
        loop {
            let before = rel.len();
            for t in &self.transitions {
                for (v, e) in &t.update.entries {
                    if rel.contains(v) {
                        let read = entry_vars(e);
                        rel.extend(read);
                    }
                }
            }
            if rel.len() == before {
                break;
            }
        }
        rel.retain(|v| *v != cost && self.variables.contains(v));
        rel
    }

    pub fn outgoing<'a>(&'a self, loc: &'a str) -> impl Iterator<Item = &'a Transition> + 'a {
        self.transitions.iter().filter(move |t| t.source == loc)
    }

    pub fn has_location(&self, loc: &str) -> bool {
        self.locations.iter().any(|l| l == loc)
    }

    pub fn has_var(&self, v: &Var) -> bool {
        self.variables.contains(v)
    }

    /// Variables written (non-identity update) by some transition.
    pub fn written_vars(&self) -> BTreeSet<Var> {
        self.transitions
            .iter()
            .flat_map(|t| t.update.written().cloned())
            .collect()
    }

    pub fn is_deterministic(&self) -> bool {
        let no_nondet = self.transitions.iter().all(|t| {
            t.update
                .entries
                .values()
                .all(|e| matches!(e, UpdateEntry::Deterministic(_)))
        });
        no_nondet
    }

    /// Checks every structural invariant of the model.
    pub fn validate(&self) -> Result<(), ModelError> {
        let cost = cost_var();
        if !self.variables.contains(&cost) {
            return Err(ModelError::MissingCost);
        }
        let mut seen = BTreeSet::new();
        for v in &self.variables {
            if !seen.insert(v) {
                return Err(ModelError::DuplicateVariable(v.to_string()));
            }
        }
        let var_set: BTreeSet<&Var> = self.variables.iter().collect();
        for l in [&self.initial, &self.terminal] {
            if !self.has_location(l) {
                return Err(ModelError::UnknownLocation(l.clone()));
            }
        }
        let mut ids = BTreeSet::new();
        for t in &self.transitions {
            if !ids.insert(&t.id) {
                return Err(ModelError::DuplicateTransition(t.id.clone()));
            }
            for l in [&t.source, &t.target] {
                if !self.has_location(l) {
                    return Err(ModelError::UnknownLocation(l.clone()));
                }
            }
            for v in t.guard.vars() {
                if !var_set.contains(&v) {
                    return Err(ModelError::UnknownVariable(v.to_string()));
                }
            }
            for v in &self.variables {
                let entry = t.update.get(v).ok_or_else(|| ModelError::MissingUpdate {
                    id: t.id.clone(),
                    var: v.to_string(),
                })?;
                let used: BTreeSet<Var> = match entry {
                    UpdateEntry::Deterministic(p) => p.vars(),
                    UpdateEntry::Nondeterministic { lower, upper } => lower
                        .iter()
                        .chain(upper.iter())
                        .flat_map(|a| a.vars())
                        .collect(),
                };
                if let Some(u) = used.iter().find(|u| !var_set.contains(u)) {
                    return Err(ModelError::UnknownVariable(u.to_string()));
                }
            }
            if let Some(extra) = t.update.entries.keys().find(|k| !var_set.contains(k)) {
                return Err(ModelError::UnknownVariable(extra.to_string()));
            }
            t.cost_delta()?;
        }
        let term_out: Vec<&Transition> = self.outgoing(&self.terminal).collect();
        if term_out.len() != 1
            || term_out[0].target != self.terminal
            || !term_out[0].guard.is_true()
            || !term_out[0].update.is_identity()
        {
            return Err(ModelError::BadTerminal(self.terminal.clone()));
        }
        for l in &self.locations {
            if self.outgoing(l).next().is_none() {
                return Err(ModelError::NoOutgoing(l.clone()));
            }
        }
        for v in self.theta0.vars() {
            if !var_set.contains(&v) {
                return Err(ModelError::UnknownVariable(v.to_string()));
            }
        }
        if !theta_fixes_cost(&self.theta0) {
            return Err(ModelError::ThetaCost);
        }
        Ok(())
    }

    /// Renders the system in the line-oriented `.ts` format.
    pub fn to_ts_string(&self) -> String {
        let mut out = String::new();
        let vars: Vec<&str> = self.variables.iter().map(Var::as_str).collect();
        let _ = writeln!(out, "vars {};", vars.join(" "));
        let _ = writeln!(out, "locations {};", self.locations.join(" "));
        let _ = writeln!(out, "init {};", self.initial);
        let _ = writeln!(out, "terminal {};", self.terminal);
        let _ = writeln!(out, "theta0 {};", self.theta0);
        for t in &self.transitions {
            let _ = write!(out, "trans {}: {} -> {}", t.id, t.source, t.target);
            if !t.guard.is_true() {
                let _ = write!(out, " guard {}", t.guard);
            }
            let written: Vec<String> = t
                .update
                .entries
                .iter()
                .filter(|(v, e)| !e.is_identity_for(v))
                .map(|(v, e)| match e {
                    UpdateEntry::Deterministic(p) => format!("{v} := {p}"),
                    UpdateEntry::Nondeterministic { lower: None, upper: None } => format!("{v} := nondet"),
                    UpdateEntry::Nondeterministic { lower, upper } => {
                        let b = |a: &Option<AffineExpr>| a.as_ref().map_or("*".to_string(), |a| a.to_string());
                        format!("{v} := nondet in [{}, {}]", b(lower), b(upper))
                    }
                })
                .collect();
            if !written.is_empty() {
                let _ = write!(out, " update {}", written.join(", "));
            }
            out.push_str(";\n");
        }
        out
    }
}

pub fn theta_fixes_cost(theta: &Assertion) -> bool {
    let c = Polynomial::var(cost_var());
    let has = |p: &Polynomial| theta.conjuncts.iter().any(|a| a.normalized().poly() == p);
    has(&c) && has(&-c.clone())
}

/// Appends `cost >= 0` and `-cost >= 0` unless already present.
pub fn with_cost_zero(theta: Assertion) -> Assertion {
    if theta_fixes_cost(&theta) {
        return theta;
    }
    let mut conjuncts = theta.conjuncts;
    conjuncts.push(AffineExpr::var(cost_var()));
    conjuncts.push(AffineExpr::var(cost_var()).neg());
    Assertion { conjuncts }
}

pub(crate) fn rational_to_integer(var: &Var, r: Rational) -> Result<BigInt, EvalError> {
    if r.is_integer() {
        Ok(r.to_integer())
    } else {
        Err(EvalError::NonInteger {
            var: var.to_string(),
            value: fmt_rational(&r),
        })
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::rat;

    #[test]
    fn fresh_name_scheme() {
        let y = Var::new("y");
        let mut up = Update::identity(&[y.clone(), Var::new("x")]);
        up.set(y.clone(), UpdateEntry::Nondeterministic { lower: None, upper: None });
        let p = substitute_update(&Polynomial::var(y.clone()), &up, "t3");
        assert_eq!(p, Polynomial::var(Var::new("y@t3")));
        // distinct transitions give distinct names
        assert_ne!(y.fresh("t3"), y.fresh("t4"));
        assert_ne!(y.fresh("t3"), Var::new("x").fresh("t3"));
    }

    #[test]
    fn substitute_deterministic() {
        let x = Var::new("x");
        let mut up = Update::identity(&[x.clone()]);
        up.set(x.clone(), UpdateEntry::Deterministic(Polynomial::var(x.clone()) + Polynomial::int(1)));
        let p = substitute_update(&Polynomial::var(x.clone()), &up, "t0");
        assert_eq!(p, Polynomial::var(x.clone()) + Polynomial::int(1));
        let sq = substitute_update(&Polynomial::var(x.clone()).pow(2), &up, "t0");
        let expect = Polynomial::var(x.clone()).pow(2) + Polynomial::var(x).scale(&rat(2)) + Polynomial::int(1);
        assert_eq!(sq, expect);
    }
}
