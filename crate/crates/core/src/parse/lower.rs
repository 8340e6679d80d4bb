//! Lowering of `.imp` programs to transition systems.
//!
//! Straight-line code is composed into pending edges; a new location is
//! created only at function entry, loop heads, labels, branch joins that are
//! followed by more code, and whenever a guard or right-hand side would have
//! to read a value chosen nondeterministically on the same edge.

use std::collections::{BTreeMap, BTreeSet};

use super::expr::{Cond, Expr};
use super::imp::{Program, Rhs, Stmt};
use crate::error::{ModelError, ParseError};
use crate::poly::{AffineExpr, Polynomial, Var};
use crate::ts::{cost_var, with_cost_zero, Assertion, Transition, TransitionSystem, Update, UpdateEntry, COST};

pub const TERMINAL: &str = "lout";

#[derive(Clone, Debug)]
struct Pending {
    source: String,
    guard: Vec<AffineExpr>,
    update: BTreeMap<Var, UpdateEntry>,
}

enum Subst {
    Ok(Polynomial),
    /// Reads a variable that is assigned nondeterministically on the edge.
    NeedsCut,
}

impl Pending {
    fn fresh(source: &str) -> Self {
        Pending {
            source: source.to_string(),
            guard: vec![],
            update: BTreeMap::new(),
        }
    }

    fn subst(&self, p: &Polynomial) -> Subst {
        if p.vars().iter().any(|v| matches!(self.update.get(v), Some(UpdateEntry::Nondeterministic { .. }))) {
            return Subst::NeedsCut;
        }
        Subst::Ok(p.substitute(&|v| match self.update.get(v) {
            Some(UpdateEntry::Deterministic(q)) => Some(q.clone()),
            _ => None,
        }))
    }
}

struct Lowerer {
    vars: Vec<Var>,
    nondet_locals: BTreeSet<String>,
    reserved: BTreeSet<String>,
    next_auto: usize,
    locations: Vec<String>,
    transitions: Vec<Transition>,
    theta0: Vec<AffineExpr>,
    loops: Vec<Vec<Pending>>,
}

fn unsupported(what: impl Into<String>) -> ParseError {
    ParseError::Semantic(ModelError::Unsupported(what.into()))
}

pub fn lower_program(prog: &Program) -> Result<TransitionSystem, ParseError> {
    let mut locals = Vec::new();
    let mut assigned = BTreeSet::new();
    let mut labels = BTreeSet::new();
    collect(&prog.body, &mut locals, &mut assigned, &mut labels);
    let mut vars: Vec<Var> = Vec::new();
    for name in prog.params.iter().chain(locals.iter()) {
        if name == COST {
            continue;
        }
        let v = Var::new(name);
        if prog.params.contains(name) && locals.contains(name) {
            return Err(ModelError::DuplicateVariable(name.clone()).into());
        }
        if !vars.contains(&v) {
            vars.push(v);
        }
    }
    vars.push(cost_var());
    let nondet_locals: BTreeSet<String> = locals
        .iter()
        .filter(|l| !assigned.contains(*l) && *l != COST)
        .cloned()
        .collect();
    let mut used = Vec::new();
    used_vars(&prog.body, &mut used);
    for u in &used {
        if !vars.contains(&Var::new(u)) {
            return Err(ModelError::UnknownVariable(u.clone()).into());
        }
    }
    labels.insert(TERMINAL.to_string());
    let mut lw = Lowerer {
        vars,
        nondet_locals,
        reserved: labels,
        next_auto: 0,
        locations: vec![],
        transitions: vec![],
        theta0: vec![],
        loops: vec![],
    };
    let entry = lw.auto_location();
    let mut pending = vec![Pending::fresh(&entry)];
    for s in &prog.body {
        if let Stmt::Assume(c) = s {
            lw.add_assume(c)?;
        }
    }
    lw.block(&prog.body, &mut pending, true)?;
    lw.locations.push(TERMINAL.to_string());
    for p in pending {
        lw.emit(p, TERMINAL);
    }
    let id = format!("t{}", lw.transitions.len());
    lw.transitions.push(Transition {
        id,
        source: TERMINAL.into(),
        target: TERMINAL.into(),
        guard: Assertion::truth(),
        update: Update::identity(&lw.vars),
    });
    let ts = TransitionSystem {
        locations: lw.locations,
        variables: lw.vars,
        transitions: lw.transitions,
        initial: entry,
        terminal: TERMINAL.into(),
        theta0: with_cost_zero(Assertion::new(lw.theta0)),
    };
    ts.validate()?;
    Ok(ts)
}

fn collect(stmts: &[Stmt], locals: &mut Vec<String>, assigned: &mut BTreeSet<String>, labels: &mut BTreeSet<String>) {
    for s in stmts {
        match s {
            Stmt::Decl(v, init) => {
                if !locals.contains(v) {
                    locals.push(v.clone());
                }
                if init.is_some() {
                    assigned.insert(v.clone());
                }
            }
            Stmt::Assign(v, _) => {
                assigned.insert(v.clone());
            }
            Stmt::If(_, a, b) => {
                collect(a, locals, assigned, labels);
                collect(b, locals, assigned, labels);
            }
            Stmt::While(_, b) | Stmt::Block(b) => collect(b, locals, assigned, labels),
            Stmt::For { init, step, body, .. } => {
                for s in init.iter().chain(step.iter()) {
                    collect(std::slice::from_ref(s.as_ref()), locals, assigned, labels);
                }
                collect(body, locals, assigned, labels);
            }
            Stmt::Labeled(l, inner) => {
                labels.insert(l.clone());
                collect(std::slice::from_ref(inner.as_ref()), locals, assigned, labels);
            }
            Stmt::Assume(_) | Stmt::Break | Stmt::Return(_) => {}
        }
    }
}

fn used_vars(stmts: &[Stmt], out: &mut Vec<String>) {
    let rhs = |r: &Rhs, out: &mut Vec<String>| match r {
        Rhs::Expr(e) => e.vars(out),
        Rhs::Nondet(lo, hi) => {
            for e in lo.iter().chain(hi.iter()) {
                e.vars(out)
            }
        }
    };
    for s in stmts {
        match s {
            Stmt::Assume(c) => c.vars(out),
            Stmt::Decl(_, r) => {
                if let Some(r) = r {
                    rhs(r, out)
                }
            }
            Stmt::Assign(v, r) => {
                out.push(v.clone());
                rhs(r, out);
            }
            Stmt::If(c, a, b) => {
                c.vars(out);
                used_vars(a, out);
                used_vars(b, out);
            }
            Stmt::While(c, b) => {
                c.vars(out);
                used_vars(b, out);
            }
            Stmt::Block(b) => used_vars(b, out),
            Stmt::For { init, cond, step, body } => {
                if let Some(c) = cond {
                    c.vars(out);
                }
                for s in init.iter().chain(step.iter()) {
                    used_vars(std::slice::from_ref(s.as_ref()), out);
                }
                used_vars(body, out);
            }
            Stmt::Labeled(_, inner) => used_vars(std::slice::from_ref(inner.as_ref()), out),
            Stmt::Break => {}
            Stmt::Return(e) => {
                if let Some(e) = e {
                    e.vars(out)
                }
            }
        }
    }
}

fn to_affine(p: Polynomial) -> Result<AffineExpr, ParseError> {
    AffineExpr::new(p).map_err(|e| unsupported(format!("non-affine guard: {e}")))
}

impl Lowerer {
    fn auto_location(&mut self) -> String {
        loop {
            let name = format!("l{}", self.next_auto);
            self.next_auto += 1;
            if !self.reserved.contains(&name) {
                self.locations.push(name.clone());
                return name;
            }
        }
    }

    fn named_location(&mut self, label: Option<&str>) -> String {
        match label {
            Some(l) => {
                self.locations.push(l.to_string());
                l.to_string()
            }
            None => self.auto_location(),
        }
    }

    fn emit(&mut self, p: Pending, target: &str) {
        let mut update = Update::identity(&self.vars);
        for (v, e) in p.update {
            update.set(v, e);
        }
        let id = format!("t{}", self.transitions.len());
        self.transitions.push(Transition {
            id,
            source: p.source,
            target: target.to_string(),
            guard: Assertion::new(p.guard),
            update,
        });
    }

    /// Ends all pending edges in a new location and restarts from it.
    fn cut(&mut self, pending: &mut Vec<Pending>, label: Option<&str>) -> Option<String> {
        if pending.is_empty() {
            return None;
        }
        let loc = self.named_location(label);
        for p in pending.drain(..) {
            self.emit(p, &loc);
        }
        pending.push(Pending::fresh(&loc));
        Some(loc)
    }

    fn add_assume(&mut self, c: &Cond) -> Result<(), ParseError> {
        let mut dnf = c.dnf();
        if dnf.len() != 1 {
            return Err(unsupported("assume must be a conjunction of comparisons"));
        }
        for p in dnf.pop().unwrap() {
            self.theta0.push(to_affine(p)?);
        }
        Ok(())
    }

    fn nondet_read(&self, names: &[String]) -> Vec<Var> {
        names
            .iter()
            .filter(|n| self.nondet_locals.contains(*n))
            .map(|n| Var::new(n))
            .collect()
    }

    fn havoc(pending: &mut [Pending], vars: &[Var]) {
        for p in pending {
            for v in vars {
                p.update.insert(
                    v.clone(),
                    UpdateEntry::Nondeterministic { lower: None, upper: None },
                );
            }
        }
    }

    /// Cuts first if any of `polys` cannot be expressed over the source
    /// state of some pending edge (nondet read or non-affine guard).
    fn prepare(&mut self, pending: &mut Vec<Pending>, polys: &[Polynomial], need_affine: bool) {
        let blocked = pending.iter().any(|p| {
            polys.iter().any(|q| match p.subst(q) {
                Subst::NeedsCut => true,
                Subst::Ok(r) => need_affine && r.degree() > 1,
            })
        });
        if blocked {
            self.cut(pending, None);
        }
    }

    /// Restricts `pending` by a DNF condition, one edge per disjunct.
    fn restrict(&self, pending: &[Pending], dnf: &[Vec<Polynomial>]) -> Result<Vec<Pending>, ParseError> {
        let mut out = Vec::new();
        for p in pending {
            'disj: for conj in dnf {
                let mut q = p.clone();
                for atom in conj {
                    let s = match p.subst(atom) {
                        Subst::Ok(s) => s,
                        Subst::NeedsCut => unreachable!("prepare cuts before restricting"),
                    };
                    if s.is_constant() {
                        if s.constant_term() < num_traits::Zero::zero() {
                            continue 'disj;
                        }
                        continue;
                    }
                    q.guard.push(to_affine(s)?);
                }
                out.push(q);
            }
        }
        Ok(out)
    }

    fn cond_setup(&mut self, c: &Cond, pending: &mut Vec<Pending>) -> (Vec<Vec<Polynomial>>, Vec<Vec<Polynomial>>) {
        let mut names = Vec::new();
        c.vars(&mut names);
        let h = self.nondet_read(&names);
        Self::havoc(pending, &h);
        let pos = c.dnf();
        let neg = Cond::Not(Box::new(c.clone())).dnf();
        let atoms: Vec<Polynomial> = pos.iter().chain(neg.iter()).flatten().cloned().collect();
        self.prepare(pending, &atoms, true);
        (pos, neg)
    }

    fn block(&mut self, stmts: &[Stmt], pending: &mut Vec<Pending>, top: bool) -> Result<(), ParseError> {
        for (k, s) in stmts.iter().enumerate() {
            if pending.is_empty() {
                // Unreachable code after break/return.
                break;
            }
            if let Stmt::Assume(_) = s {
                if !top {
                    return Err(unsupported("assume is only allowed at the top level of the function body"));
                }
                continue;
            }
            self.stmt(s, pending, None)?;
            if matches!(s, Stmt::If(..)) && pending.len() > 1 && k + 1 < stmts.len() {
                self.cut(pending, None);
            }
        }
        Ok(())
    }

    fn assign(&mut self, v: &str, rhs: &Rhs, pending: &mut Vec<Pending>) -> Result<(), ParseError> {
        let var = Var::new(v);
        let exprs: Vec<&Expr> = match rhs {
            Rhs::Expr(e) => vec![e],
            Rhs::Nondet(lo, hi) => lo.iter().chain(hi.iter()).collect(),
        };
        let mut names = Vec::new();
        for e in &exprs {
            e.vars(&mut names);
        }
        let h = self.nondet_read(&names);
        Self::havoc(pending, &h);
        let polys: Vec<Polynomial> = exprs.iter().map(|e| e.to_poly()).collect();
        let bounded = matches!(rhs, Rhs::Nondet(..));
        self.prepare(pending, &polys, bounded);
        for p in pending.iter_mut() {
            let subs: Vec<Polynomial> = polys
                .iter()
                .map(|q| match p.subst(q) {
                    Subst::Ok(s) => s,
                    Subst::NeedsCut => unreachable!("prepare cuts before substituting"),
                })
                .collect();
            let entry = match rhs {
                Rhs::Expr(_) => UpdateEntry::Deterministic(subs[0].clone()),
                Rhs::Nondet(None, None) => UpdateEntry::Nondeterministic { lower: None, upper: None },
                Rhs::Nondet(..) => UpdateEntry::Nondeterministic {
                    lower: Some(AffineExpr::new(subs[0].clone())?),
                    upper: Some(AffineExpr::new(subs[1].clone())?),
                },
            };
            p.update.insert(var.clone(), entry);
        }
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt, pending: &mut Vec<Pending>, label: Option<&str>) -> Result<(), ParseError> {
        match s {
            Stmt::Assume(_) => Err(unsupported("assume is only allowed at the top level of the function body")),
            Stmt::Decl(v, init) => {
                match init {
                    // The cost counter starts at zero by the initial assertion.
                    Some(Rhs::Expr(Expr::Int(n))) if v == COST && num_traits::Zero::is_zero(n) => Ok(()),
                    Some(r) => self.assign(v, r, pending),
                    None => Ok(()),
                }
            }
            Stmt::Assign(v, r) => self.assign(v, r, pending),
            Stmt::Block(b) => self.block(b, pending, false),
            Stmt::Break => {
                let frame = self
                    .loops
                    .last_mut()
                    .ok_or_else(|| unsupported("break outside of a loop"))?;
                frame.append(pending);
                Ok(())
            }
            Stmt::Return(_) => {
                for p in pending.drain(..) {
                    self.emit(p, TERMINAL);
                }
                Ok(())
            }
            Stmt::Labeled(l, inner) => match inner.as_ref() {
                Stmt::While(..) | Stmt::For { .. } => self.stmt(inner, pending, Some(l)),
                _ => {
                    self.cut(pending, Some(l));
                    self.stmt(inner, pending, None)
                }
            },
            Stmt::If(c, then, els) => {
                let (pos, neg) = self.cond_setup(c, pending);
                let mut tp = self.restrict(pending, &pos)?;
                let mut ep = self.restrict(pending, &neg)?;
                self.block(then, &mut tp, false)?;
                self.block(els, &mut ep, false)?;
                *pending = tp;
                pending.extend(ep);
                Ok(())
            }
            Stmt::While(c, body) => self.while_loop(c, body, None, pending, label),
            Stmt::For { init, cond, step, body } => {
                if let Some(i) = init {
                    self.stmt(i, pending, None)?;
                }
                let c = cond.clone().unwrap_or(Cond::True);
                self.while_loop(&c, body, step.as_deref(), pending, label)
            }
        }
    }

    fn while_loop(
        &mut self,
        c: &Cond,
        body: &[Stmt],
        step: Option<&Stmt>,
        pending: &mut Vec<Pending>,
        label: Option<&str>,
    ) -> Result<(), ParseError> {
        let mut names = Vec::new();
        c.vars(&mut names);
        let h = self.nondet_read(&names);
        Self::havoc(pending, &h);
        let Some(head) = self.cut(pending, label) else {
            return Ok(());
        };
        let (pos, neg) = (c.dnf(), Cond::Not(Box::new(c.clone())).dnf());
        let start = vec![Pending::fresh(&head)];
        let mut inner = self.restrict(&start, &pos)?;
        let exits = self.restrict(&start, &neg)?;
        self.loops.push(Vec::new());
        self.block(body, &mut inner, false)?;
        if let Some(st) = step {
            if !inner.is_empty() {
                self.stmt(st, &mut inner, None)?;
            }
        }
        let breaks = self.loops.pop().expect("loop frame");
        Self::havoc(&mut inner, &h);
        for p in inner {
            self.emit(p, &head);
        }
        *pending = exits;
        pending.extend(breaks);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::imp::parse_program_ast;
    use super::*;

    fn lower(src: &str) -> TransitionSystem {
        lower_program(&parse_program_ast(src).unwrap()).unwrap()
    }

    #[test]
    fn single_loop_has_three_locations() {
        let ts = lower("void f(int n) { assume(1 <= n && n <= 100); int x = 0; while (x < n) { x = x + 1; cost = cost + 1; } }");
        assert_eq!(ts.locations, vec!["l0", "l1", "lout"]);
        assert_eq!(ts.transitions.len(), 4);
        assert_eq!(ts.variables, vec![Var::new("n"), Var::new("x"), cost_var()]);
    }

    #[test]
    fn nondet_local_is_havocked_before_guard() {
        let ts = lower("void f(int n) { int x = 0; int nd; while (x < n && nd >= 0) { x = x + 1; } }");
        let nd = Var::new("nd");
        let into_head: Vec<&Transition> = ts.transitions.iter().filter(|t| t.target == "l1").collect();
        assert_eq!(into_head.len(), 2);
        for t in into_head {
            assert!(matches!(t.update.get(&nd), Some(UpdateEntry::Nondeterministic { .. })));
        }
        let guards_on_nd = ts
            .transitions
            .iter()
            .filter(|t| t.source == "l1" && t.guard.vars().contains(&nd))
            .count();
        assert!(guards_on_nd >= 2);
    }

    #[test]
    fn disequality_loop_splits_edges() {
        let ts = lower("void f(int n) { int i = 0; loop: while (i < n || i > n) { i++; } }");
        assert!(ts.has_location("loop"));
        let body = ts.transitions.iter().filter(|t| t.source == "loop" && t.target == "loop").count();
        assert_eq!(body, 2);
    }

    #[test]
    fn break_leaves_loop() {
        let ts = lower("void f(int n) { int x = 0; while (1 >= 0) { if (x < n) { x++; } else { break; } } }");
        let exits: Vec<&Transition> = ts.transitions.iter().filter(|t| t.target == "lout" && t.source != "lout").collect();
        assert_eq!(exits.len(), 1);
        assert_eq!(exits[0].guard.conjuncts.len(), 1);
    }
}
