//! Brute-force ground truth: exhaustive enumeration of runs on small input
//! boxes, giving exact minimal and maximal remaining cost per state.
//!
//! Results are relative to the finite nondeterminism domains used; the
//! analysis itself does not depend on them.

use std::collections::{HashMap, HashSet, VecDeque};

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::error::EvalError;
use crate::interval::{refine_all, IntervalBox};
use crate::lp::Witness;
use crate::poly::{fmt_rational, AffineExpr, Polynomial, Rational, Var};
use crate::ts::{cost_var, rational_to_integer, Transition, TransitionSystem, UpdateEntry, Valuation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("step budget of {0} exhausted; the program may not terminate from this input")]
    BudgetExhausted(u64),
    #[error("run revisits state at `{location}` ({state}); the program does not terminate")]
    InfiniteRun { location: String, state: String },
    #[error("no transition enabled at non-terminal location `{location}` ({state})")]
    Stuck { location: String, state: String },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("input box is empty")]
    EmptyBox,
    #[error("the two systems do not share the same variables")]
    VariableMismatch,
}

/// Finite exploration limits.
#[derive(Clone, Debug)]
pub struct RunBudget {
    /// Maximal number of distinct states expanded per input.
    pub max_steps: u64,
    /// Range used for nondeterministic values without declared bounds, and
    /// the width used when only one bound is declared.
    pub nondet_default: (i64, i64),
    /// Inclusive integer range per input variable.
    pub input_box: Vec<(Var, i64, i64)>,
}

pub const DEFAULT_STEPS: u64 = 100_000;
/// Number of values per input dimension in the default box.
pub const BOX_WIDTH: i64 = 4;

impl RunBudget {
    /// Box of `BOX_WIDTH` values per variable: the window inside the
    /// interval projection of the initial assertion lying closest to 0.
    /// Variables are
    /// fixed in order and each choice is added to the assertion before the
    /// next projection, so relational constraints such as `n - x0 >= 1`
    /// still leave points. Variables without any bound are fixed to 0.
    pub fn for_system(ts: &TransitionSystem) -> Self {
        let cost = cost_var();
        let w = BOX_WIDTH - 1;
        let mut conj = ts.theta0.conjuncts.clone();
        let mut input_box = Vec::new();
        for v in ts.variables.iter().filter(|v| **v != cost) {
            let mut b = IntervalBox::new();
            let iv = if refine_all(&mut b, &conj) { b.get(v).cloned() } else { None };
            let lo = iv.as_ref().and_then(|i| i.lo.as_ref()).and_then(|r| r.ceil().to_integer().to_i64());
            let hi = iv.as_ref().and_then(|i| i.hi.as_ref()).and_then(|r| r.floor().to_integer().to_i64());
            let (l, h) = match (lo, hi) {
                (Some(l), Some(h)) => {
                    let start = l.max(0.min(h - w));
                    (start, h.min(start + w))
                }
                (Some(l), None) => (l, l + w),
                (None, Some(h)) => (h - w, h),
                (None, None) => (0, 0),
            };
            let x = Polynomial::var(v.clone());
            conj.push(AffineExpr::new(&x - &Polynomial::int(l)).expect("affine"));
            conj.push(AffineExpr::new(&Polynomial::int(h) - &x).expect("affine"));
            input_box.push((v.clone(), l, h));
        }
        RunBudget {
            max_steps: DEFAULT_STEPS,
            nondet_default: (-2, 2),
            input_box,
        }
    }

    pub fn with_box(mut self, input_box: Vec<(Var, i64, i64)>) -> Self {
        self.input_box = input_box;
        self
    }

    /// Box points (with cost 0) satisfying the initial assertion.
    pub fn box_points(&self, ts: &TransitionSystem) -> Vec<Valuation> {
        let mut points = vec![Valuation::new()];
        for (v, lo, hi) in &self.input_box {
            let mut next = Vec::with_capacity(points.len() * (hi - lo + 1).max(0) as usize);
            for p in &points {
                for k in *lo..=*hi {
                    let mut q = p.clone();
                    q.set(v.clone(), BigInt::from(k));
                    next.push(q);
                }
            }
            points = next;
        }
        for v in &ts.variables {
            for p in points.iter_mut() {
                if p.get(v).is_none() {
                    p.set(v.clone(), BigInt::zero());
                }
            }
        }
        points
            .into_iter()
            .filter(|p| ts.theta0.holds(p).unwrap_or(false))
            .collect()
    }
}

fn eval_int(p: &Polynomial, x: &Valuation, var: &Var) -> Result<BigInt, EvalError> {
    rational_to_integer(var, p.eval(x)?)
}

fn nondet_range(
    lower: &Option<crate::poly::AffineExpr>,
    upper: &Option<crate::poly::AffineExpr>,
    x: &Valuation,
    default: (i64, i64),
) -> Result<Vec<BigInt>, EvalError> {
    let width = BigInt::from(default.1 - default.0);
    let lo = lower.as_ref().map(|l| l.poly().eval(x)).transpose()?.map(|r| r.ceil().to_integer());
    let hi = upper.as_ref().map(|u| u.poly().eval(x)).transpose()?.map(|r| r.floor().to_integer());
    let (lo, hi) = match (lo, hi) {
        (Some(l), Some(h)) => (l, h),
        (Some(l), None) => (l.clone(), l + width),
        (None, Some(h)) => (&h - width, h),
        (None, None) => (BigInt::from(default.0), BigInt::from(default.1)),
    };
    let mut out = Vec::new();
    let mut k = lo;
    while k <= hi {
        out.push(k.clone());
        k += 1;
    }
    Ok(out)
}

/// All successors along `t` from `x` (empty if the guard fails), with the
/// incurred cost.
pub fn successors(t: &Transition, x: &Valuation, default: (i64, i64)) -> Result<Vec<(Rational, Valuation)>, EvalError> {
    if !t.guard.holds(x)? {
        return Ok(vec![]);
    }
    let cost = cost_var();
    let mut base = x.clone();
    let mut choices: Vec<(Var, Vec<BigInt>)> = Vec::new();
    for (v, e) in &t.update.entries {
        match e {
            UpdateEntry::Deterministic(p) => {
                if *v != cost {
                    base.set(v.clone(), eval_int(p, x, v)?);
                }
            }
            UpdateEntry::Nondeterministic { lower, upper } => {
                choices.push((v.clone(), nondet_range(lower, upper, x, default)?));
            }
        }
    }
    let delta = t.cost_delta().map_err(|e| EvalError::Unbound(e.to_string()))?.eval(x)?;
    let mut out = vec![base];
    for (v, vals) in &choices {
        let mut next = Vec::with_capacity(out.len() * vals.len());
        for s in &out {
            for k in vals {
                let mut s2 = s.clone();
                s2.set(v.clone(), k.clone());
                next.push(s2);
            }
        }
        out = next;
    }
    let c = rational_to_integer(&cost, Rational::from_integer(x.get(&cost).cloned().unwrap_or_default()) + &delta)?;
    Ok(out
        .into_iter()
        .map(|mut s| {
            s.set(cost.clone(), c.clone());
            (delta.clone(), s)
        })
        .collect())
}

type Key = (usize, Vec<BigInt>);

/// Exact remaining-cost extremes for every state reachable from the
/// explored inputs, filled by depth-first search with memoization.
pub struct Explorer<'a> {
    ts: &'a TransitionSystem,
    budget: &'a RunBudget,
    key_vars: Vec<Var>,
    loc_index: HashMap<&'a str, usize>,
    /// (min, max) remaining cost.
    pub memo: HashMap<Key, (Rational, Rational)>,
    steps: u64,
}

struct Frame {
    key: Key,
    succs: Vec<(Rational, String, Valuation)>,
    next: usize,
    best: Option<(Rational, Rational)>,
}

impl<'a> Explorer<'a> {
    /// `track_cost` keeps the accumulated cost in the state (needed when
    /// cost deltas or checked functions read it).
    pub fn new(ts: &'a TransitionSystem, budget: &'a RunBudget, track_cost: bool) -> Self {
        let cost = cost_var();
        let cost_sensitive =
            track_cost || ts.transitions.iter().any(|t| t.cost_delta().map_or(false, |d| d.mentions(&cost)));
        let key_vars = ts
            .variables
            .iter()
            .filter(|v| cost_sensitive || **v != cost)
            .cloned()
            .collect();
        Explorer {
            ts,
            budget,
            key_vars,
            loc_index: ts.locations.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect(),
            memo: HashMap::new(),
            steps: 0,
        }
    }

    fn key(&self, loc: &str, x: &Valuation) -> Key {
        (
            self.loc_index[loc],
            self.key_vars.iter().map(|v| x.get(v).cloned().unwrap_or_default()).collect(),
        )
    }

    pub fn valuation_of(&self, key: &Key) -> (String, Valuation) {
        let mut x = Valuation::new();
        for (v, n) in self.key_vars.iter().zip(&key.1) {
            x.set(v.clone(), n.clone());
        }
        (self.ts.locations[key.0].clone(), x)
    }

    fn expand(&mut self, loc: &str, x: &Valuation) -> Result<Frame, OracleError> {
        let key = self.key(loc, x);
        if loc == self.ts.terminal {
            return Ok(Frame {
                key,
                succs: vec![],
                next: 0,
                best: Some((Rational::zero(), Rational::zero())),
            });
        }
        self.steps += 1;
        if self.steps > self.budget.max_steps {
            return Err(OracleError::BudgetExhausted(self.budget.max_steps));
        }
        let mut succs = Vec::new();
        for t in self.ts.outgoing(loc) {
            for (d, y) in successors(t, x, self.budget.nondet_default)? {
                succs.push((d, t.target.clone(), y));
            }
        }
        if succs.is_empty() {
            return Err(OracleError::Stuck {
                location: loc.to_string(),
                state: x.to_string(),
            });
        }
        Ok(Frame {
            key,
            succs,
            next: 0,
            best: None,
        })
    }

    /// (CostInf, CostSup) of the remaining run from `(loc, x)`.
    pub fn extremes(&mut self, loc: &str, x: &Valuation) -> Result<(Rational, Rational), OracleError> {
        let root = self.key(loc, x);
        if let Some(r) = self.memo.get(&root) {
            return Ok(r.clone());
        }
        let mut on_stack: HashSet<Key> = HashSet::new();
        let mut stack = vec![self.expand(loc, x)?];
        on_stack.insert(root.clone());
        loop {
            let top = stack.last_mut().expect("nonempty stack");
            if top.next < top.succs.len() {
                let (_, yloc, yx) = top.succs[top.next].clone();
                let k = self.key(&yloc, &yx);
                if let Some(r) = self.memo.get(&k).cloned() {
                    let top = stack.last_mut().expect("nonempty stack");
                    let d = top.succs[top.next].0.clone();
                    combine(&mut top.best, &r, &d);
                    top.next += 1;
                    continue;
                }
                if on_stack.contains(&k) {
                    return Err(OracleError::InfiniteRun {
                        location: yloc,
                        state: yx.to_string(),
                    });
                }
                let f = self.expand(&yloc, &yx)?;
                on_stack.insert(k);
                stack.push(f);
                continue;
            }
            let done = stack.pop().expect("nonempty stack");
            let r = done.best.expect("at least one successor or terminal");
            on_stack.remove(&done.key);
            self.memo.insert(done.key, r.clone());
            match stack.last_mut() {
                None => return Ok(r),
                Some(parent) => {
                    let d = parent.succs[parent.next].0.clone();
                    combine(&mut parent.best, &r, &d);
                    parent.next += 1;
                }
            }
        }
    }
}

fn combine(best: &mut Option<(Rational, Rational)>, r: &(Rational, Rational), d: &Rational) {
    let lo = &r.0 + d;
    let hi = &r.1 + d;
    *best = Some(match best.take() {
        None => (lo, hi),
        Some((a, b)) => (a.min(lo), b.max(hi)),
    });
}

/// (CostInf, CostSup) over all runs from `x0` at the initial location.
pub fn cost_extremes(ts: &TransitionSystem, x0: &Valuation, budget: &RunBudget) -> Result<(Rational, Rational), OracleError> {
    let mut ex = Explorer::new(ts, budget, false);
    ex.extremes(&ts.initial, &with_zero_cost(x0))
}

fn with_zero_cost(x: &Valuation) -> Valuation {
    let mut x = x.clone();
    x.set(cost_var(), BigInt::zero());
    x
}

#[derive(Clone, Debug)]
pub struct DiffResult {
    /// max over the box of CostSup_new − CostInf_old.
    pub max: Rational,
    pub argmax: Valuation,
    pub points: usize,
}

fn check_same_vars(a: &TransitionSystem, b: &TransitionSystem) -> Result<(), OracleError> {
    let mut va = a.variables.clone();
    let mut vb = b.variables.clone();
    va.sort();
    vb.sort();
    (va == vb).then_some(()).ok_or(OracleError::VariableMismatch)
}

/// Exact maximal cost difference over the box (points satisfying both
/// initial assertions).
pub fn max_diff(new: &TransitionSystem, old: &TransitionSystem, budget: &RunBudget) -> Result<DiffResult, OracleError> {
    check_same_vars(new, old)?;
    let points: Vec<Valuation> = budget
        .box_points(new)
        .into_iter()
        .filter(|p| old.theta0.holds(p).unwrap_or(false))
        .collect();
    let diffs: Vec<(Rational, Valuation)> = points
        .par_iter()
        .map(|p| {
            let (_, sup) = cost_extremes(new, p, budget)?;
            let (inf, _) = cost_extremes(old, p, budget)?;
            Ok((sup - inf, p.clone()))
        })
        .collect::<Result<_, OracleError>>()?;
    let n = diffs.len();
    let (max, argmax) = diffs
        .into_iter()
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
        .ok_or(OracleError::EmptyBox)?;
    Ok(DiffResult { max, argmax, points: n })
}

/// A state where a solved function fails its bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessFailure {
    pub what: String,
    pub input: Valuation,
    pub location: String,
    pub state: Valuation,
}

#[derive(Clone, Debug, Default)]
pub struct WitnessReport {
    pub inputs: usize,
    pub states: usize,
    pub failures: Vec<WitnessFailure>,
}

impl WitnessReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Which bound a function is expected to give.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    /// Dominates CostSup at every reachable state.
    Upper,
    /// Undercuts CostInf at every reachable state.
    Lower,
}

/// Checks `f(ℓ, x)` against the exact remaining-cost extremes at every state
/// reachable from the box inputs.
pub fn check_bound_function(
    ts: &TransitionSystem,
    f: &std::collections::BTreeMap<String, Polynomial>,
    bound: Bound,
    budget: &RunBudget,
    report: &mut WitnessReport,
    label: &str,
) -> Result<(), OracleError> {
    let cost = cost_var();
    let track_cost = f.values().any(|p| p.mentions(&cost));
    for x0 in budget.box_points(ts) {
        let mut ex = Explorer::new(ts, budget, track_cost);
        ex.extremes(&ts.initial, &x0)?;
        report.states += ex.memo.len();
        let mut keys: Vec<&Key> = ex.memo.keys().collect();
        keys.sort();
        for k in keys {
            let (inf, sup) = &ex.memo[k];
            let (loc, x) = ex.valuation_of(k);
            let mut xc = x.clone();
            if xc.get(&cost).is_none() {
                xc.set(cost.clone(), BigInt::zero());
            }
            let val = match f.get(&loc) {
                Some(p) => p.eval(&xc)?,
                None => Rational::zero(),
            };
            let ok = match bound {
                Bound::Upper => val >= *sup,
                Bound::Lower => val <= *inf,
            };
            if !ok {
                report.failures.push(WitnessFailure {
                    what: format!(
                        "{label}: value {} vs {} {}",
                        fmt_rational(&val),
                        if bound == Bound::Upper { "CostSup" } else { "CostInf" },
                        fmt_rational(if bound == Bound::Upper { sup } else { inf })
                    ),
                    input: x0.clone(),
                    location: loc,
                    state: x,
                });
                return Ok(());
            }
        }
    }
    Ok(())
}

/// Checks a differential witness: the new version's potential dominates
/// every run of the new version, the old version's anti-potential
/// undercuts every run of the old version, and the threshold covers both
/// the witness difference and the true difference at every box input.
pub fn check_witness(
    w: &Witness,
    new: &TransitionSystem,
    old: &TransitionSystem,
    budget: &RunBudget,
) -> Result<WitnessReport, OracleError> {
    let mut report = WitnessReport::default();
    check_bound_function(new, &w.pf, Bound::Upper, budget, &mut report, "potential (new)")?;
    check_bound_function(old, &w.anti_pf, Bound::Lower, budget, &mut report, "anti-potential (old)")?;
    let Some(t) = &w.threshold_raw else {
        return Ok(report);
    };
    for x0 in budget.box_points(new) {
        if !old.theta0.holds(&x0)? {
            continue;
        }
        report.inputs += 1;
        let phi = w.pf.get(&new.initial).map(|p| p.eval(&x0)).transpose()?.unwrap_or_default();
        let chi = w.anti_pf.get(&old.initial).map(|p| p.eval(&x0)).transpose()?.unwrap_or_default();
        let (_, sup) = cost_extremes(new, &x0, budget)?;
        let (inf, _) = cost_extremes(old, &x0, budget)?;
        let chain = sup <= phi && chi <= inf && &phi - &chi <= *t;
        if !chain || &sup - &inf > *t {
            report.failures.push(WitnessFailure {
                what: format!(
                    "threshold {}: sup_new {} phi {} chi {} inf_old {}",
                    fmt_rational(t),
                    fmt_rational(&sup),
                    fmt_rational(&phi),
                    fmt_rational(&chi),
                    fmt_rational(&inf)
                ),
                input: x0.clone(),
                location: new.initial.clone(),
                state: x0,
            });
            break;
        }
    }
    Ok(report)
}

/// Result of a bounded forward exploration.
#[derive(Clone, Debug, Default)]
pub struct Exploration {
    pub visited: usize,
    pub hit: Option<(String, Valuation)>,
}

/// Breadth-first exploration of reachable states (cost included) from `x0`,
/// visiting at most `limit` states and stopping at the first state where
/// `stop` holds.
pub fn explore_states(
    ts: &TransitionSystem,
    x0: &Valuation,
    budget: &RunBudget,
    limit: usize,
    stop: &mut dyn FnMut(&str, &Valuation) -> bool,
) -> Exploration {
    let mut seen: HashSet<(String, Valuation)> = HashSet::new();
    let start = (ts.initial.clone(), with_zero_cost(x0));
    let mut queue = VecDeque::from([start.clone()]);
    seen.insert(start);
    let mut out = Exploration::default();
    while let Some((loc, x)) = queue.pop_front() {
        out.visited += 1;
        if stop(&loc, &x) {
            out.hit = Some((loc, x));
            return out;
        }
        if out.visited >= limit || loc == ts.terminal {
            if out.visited >= limit {
                return out;
            }
            continue;
        }
        for t in ts.outgoing(&loc) {
            let Ok(succ) = successors(t, &x, budget.nondet_default) else { continue };
            for (_, y) in succ {
                let s = (t.target.clone(), y);
                if seen.insert(s.clone()) {
                    queue.push_back(s);
                }
            }
        }
    }
    out
}

/// Largest gap `CostSup − CostInf` over the box, and where it occurs.
pub fn max_gap(ts: &TransitionSystem, budget: &RunBudget) -> Result<(Rational, Valuation), OracleError> {
    let mut best: Option<(Rational, Valuation)> = None;
    for p in budget.box_points(ts) {
        let (inf, sup) = cost_extremes(ts, &p, budget)?;
        let g = sup - inf;
        if best.as_ref().map_or(true, |(b, _)| g > *b) {
            best = Some((g, p));
        }
    }
    best.ok_or(OracleError::EmptyBox)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_program;
    use crate::poly::rat;

    fn exact_loop() -> TransitionSystem {
        parse_program("void f(int n) { assume(1 <= n && n <= 100); int i = 0; while (i < n) { i = i + 1; cost = cost + 1; } }")
            .unwrap()
    }

    #[test]
    fn deterministic_loop_collapses() {
        let ts = exact_loop();
        let x0 = Valuation::from_pairs([("n", 5), ("i", 0), ("cost", 0)]);
        let (inf, sup) = cost_extremes(&ts, &x0, &RunBudget::for_system(&ts)).unwrap();
        assert_eq!((inf, sup), (rat(5), rat(5)));
    }

    #[test]
    fn nondet_cost_zero_or_one() {
        let ts = parse_program(
            "void f() { int i = 0; int b; while (i < 3) { b = nondet(); if (b > 0) { cost = cost + 1; } i = i + 1; } }",
        )
        .unwrap();
        let rb = RunBudget::for_system(&ts);
        let (inf, sup) = cost_extremes(&ts, &Valuation::from_pairs([("i", 0), ("b", 0)]), &rb).unwrap();
        assert_eq!((inf, sup), (rat(0), rat(3)));
    }

    #[test]
    fn default_box_is_four_wide() {
        let ts = exact_loop();
        let rb = RunBudget::for_system(&ts);
        assert_eq!(rb.box_points(&ts).len(), 4);
    }

    #[test]
    fn nonterminating_run_exhausts_budget() {
        let ts = parse_program(
            "void f(int x) { assume(0 <= x && x <= 3); while (x >= 0) { if (x <= 5) { cost = cost + 1; } x = x + 1; } }",
        )
        .unwrap();
        let mut rb = RunBudget::for_system(&ts);
        rb.max_steps = 1000;
        let err = cost_extremes(&ts, &Valuation::from_pairs([("x", 0)]), &rb).unwrap_err();
        assert_eq!(err, OracleError::BudgetExhausted(1000));
    }

    #[test]
    fn state_cycle_is_reported() {
        let ts = crate::parse::parse_transition_system("vars x cost; init a; terminal b; trans a -> a; trans a -> b guard x >= 1;")
            .unwrap();
        let rb = RunBudget::for_system(&ts);
        let err = cost_extremes(&ts, &Valuation::from_pairs([("x", 0)]), &rb).unwrap_err();
        assert!(matches!(err, OracleError::InfiniteRun { .. }));
    }

    #[test]
    fn extra_unconditional_cost() {
        let old = exact_loop();
        let new = parse_program(
            "void f(int n) { assume(1 <= n && n <= 100); int i = 0; while (i < n) { i = i + 1; cost = cost + 1; } cost = cost + 1; }",
        )
        .unwrap();
        let rb = RunBudget::for_system(&old);
        assert_eq!(max_diff(&new, &old, &rb).unwrap().max, rat(1));
        assert_eq!(max_diff(&old, &old, &rb).unwrap().max, rat(0));
    }
}
