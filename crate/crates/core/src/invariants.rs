//! Per-location affine invariants: interval propagation, pass-through of
//! unwritten initial constraints, inductive strengthening with relational
//! candidates, and user annotations.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::OnceLock;

use num_traits::Zero;
use thiserror::Error;

use crate::constraints::{ImplicationConstraint, SymPoly};
use crate::error::ParseError;
use crate::handelman::{assemble, translate};
use crate::interval::{eval_poly, refine_all, Interval, IntervalBox};
use crate::lp::{solve_exact, LpStatus, SimplexOptions};
use crate::parse::lexer::{tokenize, CommentStyle, Cursor};
use crate::parse::ts_format::parse_assertion;
use crate::poly::{AffineExpr, Polynomial, Rational};
use crate::ts::{cost_var, substitute_update, Assertion, Transition, TransitionSystem, UpdateEntry};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvariantError {
    #[error("invariant given for unknown location `{0}`")]
    UnknownLocation(String),
    #[error("sampling budget must be positive")]
    ZeroBudget,
}

/// An assertion for every location; absent entries read as `true`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InvariantMap {
    map: BTreeMap<String, Assertion>,
}

fn truth() -> &'static Assertion {
    static TRUE: OnceLock<Assertion> = OnceLock::new();
    TRUE.get_or_init(Assertion::truth)
}

impl InvariantMap {
    pub fn trivial(ts: &TransitionSystem) -> Self {
        InvariantMap {
            map: ts.locations.iter().map(|l| (l.clone(), Assertion::truth())).collect(),
        }
    }

    pub fn get(&self, loc: &str) -> &Assertion {
        self.map.get(loc).unwrap_or_else(|| truth())
    }

    pub fn set(&mut self, loc: &str, a: Assertion) {
        self.map.insert(loc.to_string(), a);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Assertion)> {
        self.map.iter()
    }

    /// Adds conjuncts at `loc`, skipping syntactic duplicates.
    pub fn strengthen(&mut self, loc: &str, extra: &[AffineExpr]) {
        let cur = self.map.entry(loc.to_string()).or_insert_with(Assertion::truth);
        for e in extra {
            if !cur.conjuncts.contains(e) {
                cur.conjuncts.push(e.clone());
            }
        }
    }

    pub fn conjunct_count(&self) -> usize {
        self.map.values().map(|a| a.conjuncts.len()).sum()
    }
}

impl fmt::Display for InvariantMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (l, a) in &self.map {
            writeln!(f, "invariant {l}: {a};")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct IntervalOptions {
    /// Visits of a location after which its box is widened.
    pub widen_after: u32,
}

impl Default for IntervalOptions {
    fn default() -> Self {
        IntervalOptions { widen_after: 5 }
    }
}

fn strip_top(mut b: IntervalBox) -> IntervalBox {
    b.retain(|_, iv| *iv != Interval::top());
    b
}

fn join_boxes(a: &IntervalBox, b: &IntervalBox, widen: bool) -> IntervalBox {
    let mut out = IntervalBox::new();
    for (v, ia) in a {
        if let Some(ib) = b.get(v) {
            out.insert(v.clone(), if widen { ia.widen(&ia.join(ib)) } else { ia.join(ib) });
        }
    }
    strip_top(out)
}

/// Box after taking `t` from states in `b`; `None` if the guard is
/// unsatisfiable on `b`.
fn post(t: &Transition, b: &IntervalBox) -> Option<IntervalBox> {
    let mut g = b.clone();
    if !refine_all(&mut g, &t.guard.conjuncts) {
        return None;
    }
    let mut out = g.clone();
    for (v, e) in &t.update.entries {
        let iv = match e {
            UpdateEntry::Deterministic(p) => eval_poly(p, &g),
            UpdateEntry::Nondeterministic { lower, upper } => Interval::new(
                lower.as_ref().and_then(|l| eval_poly(l.poly(), &g).lo),
                upper.as_ref().and_then(|u| eval_poly(u.poly(), &g).hi),
            ),
        };
        out.insert(v.clone(), iv.to_integer());
    }
    Some(strip_top(out))
}

type Boxes = BTreeMap<String, Option<IntervalBox>>;

fn initial_box(ts: &TransitionSystem) -> Option<IntervalBox> {
    let mut b = IntervalBox::new();
    refine_all(&mut b, &ts.theta0.conjuncts).then(|| strip_top(b))
}

fn join_into(slot: &mut Option<IntervalBox>, new: IntervalBox, widen: bool) -> bool {
    let next = match slot {
        None => new,
        Some(old) => join_boxes(old, &new, widen),
    };
    let changed = slot.as_ref() != Some(&next);
    *slot = Some(next);
    changed
}

/// Forward interval fixed point with widening, then one narrowing pass.
/// `None` marks locations found unreachable.
pub fn interval_boxes(ts: &TransitionSystem, opts: &IntervalOptions) -> Boxes {
    let mut boxes: Boxes = ts.locations.iter().map(|l| (l.clone(), None)).collect();
    let Some(init) = initial_box(ts) else {
        return boxes;
    };
    boxes.insert(ts.initial.clone(), Some(init.clone()));
    let mut visits: BTreeMap<&str, u32> = BTreeMap::new();
    let mut work: VecDeque<&str> = VecDeque::from([ts.initial.as_str()]);
    while let Some(l) = work.pop_front() {
        let Some(b) = boxes[l].clone() else { continue };
        for t in ts.outgoing(l) {
            let Some(p) = post(t, &b) else { continue };
            let n = visits.entry(t.target.as_str()).or_default();
            *n += 1;
            let widen = *n > opts.widen_after;
            if join_into(boxes.get_mut(&t.target).expect("known location"), p, widen) && !work.contains(&t.target.as_str()) {
                work.push_back(t.target.as_str());
            }
        }
    }
    // One decreasing iteration: recompute every box from its predecessors
    // and recover endpoints lost to widening.
    let mut fresh: Boxes = ts.locations.iter().map(|l| (l.clone(), None)).collect();
    fresh.insert(ts.initial.clone(), Some(init));
    for t in &ts.transitions {
        let Some(b) = &boxes[&t.source] else { continue };
        if let Some(p) = post(t, b) {
            join_into(fresh.get_mut(&t.target).expect("known location"), p, false);
        }
    }
    for (l, slot) in boxes.iter_mut() {
        let (Some(old), Some(new)) = (slot.as_ref(), fresh[l].as_ref()) else {
            continue;
        };
        let mut narrowed = old.clone();
        for (v, nv) in new {
            let ov = old.get(v).cloned().unwrap_or_else(Interval::top);
            narrowed.insert(
                v.clone(),
                Interval::new(ov.lo.or_else(|| nv.lo.clone()), ov.hi.or_else(|| nv.hi.clone())),
            );
        }
        *slot = Some(strip_top(narrowed));
    }
    boxes
}

fn box_conjuncts(ts: &TransitionSystem, b: &IntervalBox) -> Vec<AffineExpr> {
    let cost = cost_var();
    let mut out = Vec::new();
    for v in ts.variables.iter().filter(|v| **v != cost) {
        let Some(iv) = b.get(v) else { continue };
        let x = Polynomial::var(v.clone());
        if let Some(lo) = &iv.lo {
            out.push(AffineExpr::new(&x - &Polynomial::constant(lo.clone())).expect("affine"));
        }
        if let Some(hi) = &iv.hi {
            out.push(AffineExpr::new(&Polynomial::constant(hi.clone()) - &x).expect("affine"));
        }
    }
    out
}

/// Interval invariants as affine conjuncts (cost excluded). Unreachable
/// locations get `true`.
pub fn propagate_intervals(ts: &TransitionSystem, opts: &IntervalOptions) -> InvariantMap {
    let boxes = interval_boxes(ts, opts);
    let mut inv = InvariantMap::trivial(ts);
    for (l, b) in boxes {
        if let Some(b) = b {
            inv.set(&l, Assertion::new(box_conjuncts(ts, &b)));
        }
    }
    inv
}

/// Initial conjuncts over variables no transition writes; they hold at
/// every location.
pub fn theta_passthrough(ts: &TransitionSystem) -> Vec<AffineExpr> {
    let written = ts.written_vars();
    ts.theta0
        .conjuncts
        .iter()
        .filter(|c| c.vars().iter().all(|v| !written.contains(v)))
        .cloned()
        .collect()
}

/// Does `premises ⇒ conclusion ≥ 0` have a Handelman certificate?
fn entails(premises: &[AffineExpr], conclusion: &Polynomial, tag: &str) -> bool {
    let c = ImplicationConstraint {
        premises: premises.to_vec(),
        conclusion: SymPoly::from_poly(conclusion),
        tag: tag.to_string(),
    };
    let k = conclusion.degree().max(1);
    let frag = translate(&c, k);
    if frag.vacuous {
        return true;
    }
    let sys = assemble(std::slice::from_ref(&frag), &[], vec![], None);
    let opts = SimplexOptions {
        max_pivots: 100_000,
        ..SimplexOptions::default()
    };
    solve_exact(&sys, &opts).status == LpStatus::Feasible
}

fn candidate_pool(ts: &TransitionSystem) -> Vec<AffineExpr> {
    let cost = cost_var();
    let written = ts.written_vars();
    let mut raw: Vec<Polynomial> = ts.theta0.conjuncts.iter().map(|c| c.poly().clone()).collect();
    let one = Polynomial::constant(Rational::from_integer(1.into()));
    let mut shifts = Vec::new();
    for t in &ts.transitions {
        // Constant increments `v := v + c`, used to shift guards past the update.
        let mut shift = BTreeMap::new();
        for (v, e) in &t.update.entries {
            let UpdateEntry::Deterministic(p) = e else { continue };
            let x = Polynomial::var(v.clone());
            let d = p - &x;
            if *v == cost || d.is_zero() {
                continue;
            }
            if d.is_constant() {
                shift.insert(v.clone(), &x - &d);
            } else if p.degree() <= 1 && p.vars().iter().all(|w| !written.contains(w)) {
                // `v` relative to the unwritten value it is set from.
                raw.push(&x - p);
                raw.push(p - &x);
            }
        }
        // Pairwise sums of guard conjuncts eliminate shared variables.
        let mut guards: Vec<Polynomial> = t.guard.conjuncts.iter().map(|g| g.poly().clone()).collect();
        let n = guards.len();
        for i in 0..n {
            for j in i + 1..n {
                let sum = &guards[i] + &guards[j];
                guards.push(sum);
            }
        }
        for gp in &guards {
            let g = AffineExpr::new(gp.clone()).expect("affine guard");
            let neg = g.neg().poly().clone();
            raw.push(gp + &one);
            raw.push(&neg - &one);
            raw.push(neg);
            if !shift.is_empty() {
                raw.push(gp.substitute(&|v| shift.get(v).cloned()));
            }
            raw.push(gp.clone());
        }
        if !shift.is_empty() {
            shifts.push(shift);
        }
    }
    // Every candidate carried past each increment.
    let base_len = raw.len();
    for shift in &shifts {
        for k in 0..base_len {
            if raw[k].vars().iter().any(|v| shift.contains_key(v)) {
                let p = raw[k].substitute(&|v| shift.get(v).cloned());
                raw.push(p);
            }
        }
    }
    let mut seen = BTreeSet::new();
    raw.into_iter()
        .filter_map(|p| AffineExpr::new(p).ok())
        .map(|a| a.normalized())
        .filter(|a| !a.is_constant() && a.coeff(&cost).is_zero() && seen.insert(a.clone()))
        .collect()
}

fn transition_premises(base: &InvariantMap, cand: &BTreeMap<String, Vec<AffineExpr>>, t: &Transition) -> Vec<AffineExpr> {
    let mut p = base.get(&t.source).conjuncts.clone();
    p.extend(cand[&t.source].iter().cloned());
    p.extend(t.guard.conjuncts.iter().cloned());
    for (v, e) in &t.update.entries {
        if let UpdateEntry::Nondeterministic { lower, upper } = e {
            let fresh = Polynomial::var(v.fresh(&t.id));
            if let Some(lo) = lower {
                p.push(AffineExpr::new(&fresh - lo.poly()).expect("affine"));
            }
            if let Some(hi) = upper {
                p.push(AffineExpr::new(hi.poly() - &fresh).expect("affine"));
            }
        }
    }
    p
}

/// Greatest subset of candidate conjuncts (guards shifted by 0 or ±1 and
/// their negations, plus initial conjuncts) that is inductive relative to
/// `base`, computed by repeatedly dropping candidates that are not preserved.
/// `base` is assumed to be invariant.
pub fn inductive_strengthening(ts: &TransitionSystem, base: &InvariantMap) -> InvariantMap {
    let pool = candidate_pool(ts);
    let mut cand: BTreeMap<String, Vec<AffineExpr>> = ts
        .locations
        .iter()
        .map(|l| {
            let have = &base.get(l).conjuncts;
            let keep = pool.iter().filter(|c| !have.contains(c)).cloned().collect();
            (l.clone(), keep)
        })
        .collect();
    // Candidates failing at the initial location.
    let theta = &ts.theta0.conjuncts;
    cand.get_mut(&ts.initial)
        .expect("initial location")
        .retain(|c| entails(theta, c.poly(), "houdini:init"));
    loop {
        let mut changed = false;
        for l in &ts.locations {
            let incoming: Vec<&Transition> = ts.transitions.iter().filter(|t| t.target == *l).collect();
            let kept: Vec<AffineExpr> = cand[l]
                .iter()
                .filter(|c| {
                    incoming.iter().all(|t| {
                        let premises = transition_premises(base, &cand, t);
                        let after = substitute_update(c.poly(), &t.update, &t.id);
                        entails(&premises, &after, "houdini")
                    })
                })
                .cloned()
                .collect();
            if kept.len() != cand[l].len() {
                changed = true;
                cand.insert(l.clone(), kept);
            }
        }
        if !changed {
            break;
        }
    }
    let mut out = base.clone();
    for (l, cs) in cand {
        out.strengthen(&l, &cs);
    }
    out
}

/// Which invariants to compute automatically.
#[derive(Clone, Debug)]
pub struct InferenceOptions {
    pub intervals: IntervalOptions,
    pub strengthen: bool,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        InferenceOptions {
            intervals: IntervalOptions::default(),
            strengthen: true,
        }
    }
}

/// Intervals, initial pass-through, user annotations, then (optionally)
/// inductive strengthening on top of all of them.
pub fn infer_invariants(
    ts: &TransitionSystem,
    user: Option<&BTreeMap<String, Assertion>>,
    opts: &InferenceOptions,
) -> Result<InvariantMap, InvariantError> {
    let mut inv = propagate_intervals(ts, &opts.intervals);
    let pass = theta_passthrough(ts);
    for l in &ts.locations {
        inv.strengthen(l, &pass);
    }
    if let Some(u) = user {
        inv = merge_annotations(&inv, u)?;
    }
    if opts.strengthen {
        inv = inductive_strengthening(ts, &inv);
    }
    for a in inv.map.values_mut() {
        *a = a.without_weaker();
    }
    Ok(inv)
}

/// Per-location conjunction of both maps, deduplicated syntactically.
pub fn merge_annotations(auto: &InvariantMap, user: &BTreeMap<String, Assertion>) -> Result<InvariantMap, InvariantError> {
    let mut out = auto.clone();
    for (l, a) in user {
        if !auto.map.contains_key(l) {
            return Err(InvariantError::UnknownLocation(l.clone()));
        }
        out.strengthen(l, &a.conjuncts);
    }
    Ok(out)
}

/// Which program of a pair an annotation applies to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Version {
    New,
    Old,
}

/// Parsed invariant file: annotations for both versions, or for one.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UserInvariants {
    pub both: BTreeMap<String, Assertion>,
    pub new: BTreeMap<String, Assertion>,
    pub old: BTreeMap<String, Assertion>,
}

impl UserInvariants {
    /// Annotations applying to `v` (version-specific ones after shared ones).
    pub fn for_version(&self, v: Version) -> BTreeMap<String, Assertion> {
        let mut out = self.both.clone();
        let specific = match v {
            Version::New => &self.new,
            Version::Old => &self.old,
        };
        for (l, a) in specific {
            let e = out.entry(l.clone()).or_insert_with(Assertion::truth);
            *e = e.and(a);
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.both.is_empty() && self.new.is_empty() && self.old.is_empty()
    }
}

/// Parses lines of the form `invariant [new|old] <loc>: <conds>;`.
pub fn parse_invariants(text: &str) -> Result<UserInvariants, ParseError> {
    let mut c = Cursor::new(tokenize(text, CommentStyle::Hash)?);
    let mut out = UserInvariants::default();
    while !c.at_eof() {
        c.expect_kw("invariant")?;
        let first = c.ident()?;
        let (slot, loc) = if c.is_sym(":") {
            (&mut out.both, first)
        } else {
            let slot = match first.as_str() {
                "new" => &mut out.new,
                "old" => &mut out.old,
                _ => return Err(c.err(format!("expected `:` or a location after `{first}`"))),
            };
            (slot, c.ident()?)
        };
        c.expect_sym(":")?;
        let a = parse_assertion(&mut c)?;
        c.expect_sym(";")?;
        let e = slot.entry(loc).or_insert_with(Assertion::truth);
        *e = e.and(&a);
    }
    Ok(out)
}

/// A reachable state violating the invariant at its location.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvariantViolation {
    pub location: String,
    pub state: crate::ts::Valuation,
}

/// Explores reachable states from every point of the oracle's input box
/// (at most `budget` states in total) and reports the first violation.
pub fn check_invariant_sampled(
    ts: &TransitionSystem,
    inv: &InvariantMap,
    budget: usize,
) -> Result<Option<InvariantViolation>, InvariantError> {
    if budget == 0 {
        return Err(InvariantError::ZeroBudget);
    }
    let rb = crate::oracle::RunBudget::for_system(ts);
    let mut seen = 0usize;
    for x0 in rb.box_points(ts) {
        let found = crate::oracle::explore_states(ts, &x0, &rb, budget - seen, &mut |loc, x| {
            !inv.get(loc).holds(x).unwrap_or(false)
        });
        seen += found.visited;
        if let Some((loc, state)) = found.hit {
            return Ok(Some(InvariantViolation { location: loc, state }));
        }
        if seen >= budget {
            break;
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_program;
    use crate::poly::{rat, Var};

    fn aff(text: &str) -> AffineExpr {
        AffineExpr::new(crate::parse::parse_polynomial(text).unwrap()).unwrap()
    }

    fn single_loop() -> TransitionSystem {
        parse_program(
            "void f(int n) { assume(1 <= n && n <= 100); int x = 0; while (x < n) { x = x + 1; cost = cost + 1; } }",
        )
        .unwrap()
    }

    #[test]
    fn loop_head_intervals() {
        let ts = single_loop();
        let boxes = interval_boxes(&ts, &IntervalOptions::default());
        let head = boxes["l1"].as_ref().unwrap();
        assert_eq!(head[&Var::new("x")], Interval::new(Some(rat(0)), Some(rat(100))));
        assert_eq!(head[&Var::new("n")], Interval::new(Some(rat(1)), Some(rat(100))));
        let inv = propagate_intervals(&ts, &IntervalOptions::default());
        let c = &inv.get("l1").conjuncts;
        assert!(c.contains(&aff("x")));
        assert!(c.contains(&aff("100 - x")));
    }

    #[test]
    fn unbounded_nondet_has_no_conjunct() {
        let ts = crate::parse::parse_transition_system(
            "vars y cost; init a; terminal b; theta0 y >= 0, y <= 3; trans a -> b update y := nondet;",
        )
        .unwrap();
        let inv = propagate_intervals(&ts, &IntervalOptions::default());
        assert!(inv.get("b").vars().iter().all(|v| v.as_str() != "y"));
        assert_eq!(inv.get("a").conjuncts.len(), 2);
    }

    #[test]
    fn strengthening_finds_relational_bound() {
        let ts = single_loop();
        let inv = infer_invariants(&ts, None, &InferenceOptions::default()).unwrap();
        assert!(inv.get("l1").conjuncts.contains(&aff("n - x")));
        assert!(inv.get("lout").conjuncts.contains(&aff("x - n")));
    }

    #[test]
    fn merge_dedups_and_checks_locations() {
        let ts = single_loop();
        let mut auto = InvariantMap::trivial(&ts);
        auto.set("l1", Assertion::new(vec![aff("x")]));
        let mut user = BTreeMap::new();
        user.insert("l1".to_string(), Assertion::new(vec![aff("n - x"), aff("x")]));
        let m = merge_annotations(&auto, &user).unwrap();
        assert_eq!(m.get("l1").conjuncts, vec![aff("x"), aff("n - x")]);
        assert_eq!(merge_annotations(&auto, &BTreeMap::new()).unwrap(), auto);
        user.insert("nowhere".to_string(), Assertion::truth());
        assert!(merge_annotations(&auto, &user).is_err());
    }

    #[test]
    fn invariant_file_syntax() {
        let u = parse_invariants("# c\ninvariant l1: x >= 0, n - x >= 0;\ninvariant old l2: i <= n;\n").unwrap();
        assert_eq!(u.both["l1"].conjuncts.len(), 2);
        assert_eq!(u.old["l2"].conjuncts, vec![aff("n - i")]);
        assert_eq!(u.for_version(Version::New).len(), 1);
        assert_eq!(u.for_version(Version::Old).len(), 2);
        assert!(parse_invariants("invariant l1 x >= 0;").is_err());
    }
}
