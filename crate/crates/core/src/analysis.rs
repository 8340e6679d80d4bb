//! End-to-end pipelines: invariants, templates, constraint collection,
//! Handelman translation, solving and witness extraction.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};
use thiserror::Error;

use crate::constraints::{
    collect_antipf_constraints, collect_diffcost_constraint, collect_pf_constraints, collect_precision_constraints,
    collect_refutation_constraints, collect_symbolic_bound_constraint, fix_templates_over, precision_sym, threshold_sym,
    ConstraintError, ImplicationConstraint, TemplateMap,
};
use crate::handelman::{assemble, reexpansion_holds, translate_all, Fragment, LinearSystem, Sense};
use crate::interval::{refine_all, IntervalBox};
use crate::invariants::{infer_invariants, InferenceOptions, InvariantError, InvariantMap, UserInvariants, Version};
use crate::linear::{LinearCombo, Sym};
use crate::lp::{extract_witness, snap_threshold, solve, Backend, LpError, LpSolution, LpStatus, Mode, Witness};
use crate::poly::{AffineExpr, Polynomial, Rational, Var};
use crate::ts::{cost_var, Assertion, TransitionSystem, Valuation};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("the two programs do not share the same variables: {0}")]
    VariableMismatch(String),
    #[error("the two programs have different initial assertions")]
    ThetaMismatch,
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Invariant(#[from] InvariantError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("refutation input: {0}")]
    BadInput(String),
}

#[derive(Clone, Debug)]
pub struct AnalysisOptions {
    /// Template degree `d`.
    pub degree: u32,
    /// Maximal product size `K`; defaults to `degree`.
    pub prodk: Option<u32>,
    pub backend: Backend,
    /// Separation used for the strict inequality in refutation.
    pub eps: Rational,
    pub include_cost: bool,
    /// Restrict templates to variables that reach a guard or a cost update.
    pub slice: bool,
    pub inference: InferenceOptions,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            degree: 2,
            prodk: None,
            backend: Backend::default(),
            eps: Rational::one(),
            include_cost: false,
            slice: true,
            inference: InferenceOptions::default(),
        }
    }
}

impl AnalysisOptions {
    pub fn k(&self) -> u32 {
        self.prodk.unwrap_or(self.degree)
    }

    /// Template variables shared by all of `systems`.
    fn template_vars(&self, systems: &[&TransitionSystem]) -> Vec<Var> {
        let cost = cost_var();
        let mut vars: Vec<Var> = if self.slice {
            let rel: BTreeSet<Var> = systems.iter().flat_map(|ts| ts.cost_relevant_vars()).collect();
            systems[0].variables.iter().filter(|v| rel.contains(v)).cloned().collect()
        } else {
            systems[0].variables.iter().filter(|v| **v != cost).cloned().collect()
        };
        if self.include_cost && systems[0].variables.contains(&cost) {
            vars.push(cost);
        }
        vars
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Threshold (or precision bound) found.
    Bounded,
    /// Symbolic bound proven.
    Verified,
    /// Threshold refuted at the given input.
    Refuted(Valuation),
    Unknown(String),
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Bounded => "bounded",
            Verdict::Verified => "verified",
            Verdict::Refuted(_) => "refuted",
            Verdict::Unknown(_) => "unknown",
        }
    }

    pub fn is_success(&self) -> bool {
        !matches!(self, Verdict::Unknown(_))
    }
}

#[derive(Clone, Debug, Default)]
pub struct LpStats {
    pub constraints: usize,
    pub variables: usize,
    pub equalities: usize,
    pub inequalities: usize,
    pub pivots: u64,
    pub certified: bool,
}

/// Everything produced by one analysis run.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub mode: Mode,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub lp_status: Option<LpStatus>,
    pub lp: LpStats,
    /// Invariants assumed, per program (`new`/`old`, or `program`).
    pub invariants: BTreeMap<String, InvariantMap>,
    pub warnings: Vec<String>,
    /// Constraint tags whose premises leave variables unbounded.
    pub unbounded: Vec<String>,
    pub timings: Vec<(String, Duration)>,
    /// The last assembled system (for dumps).
    pub system: Option<LinearSystem>,
    /// Implications, their translations and the solver's assignment, kept
    /// when the last system was solved.
    pub certificate: Option<Certificate>,
    pub degree: u32,
    pub prodk: u32,
    pub solver: String,
    pub eps: Rational,
}

/// Everything needed to re-check a solved system independently.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub constraints: Vec<ImplicationConstraint>,
    pub fragments: Vec<Fragment>,
    pub values: BTreeMap<Sym, Rational>,
}

struct Timer(Vec<(String, Duration)>, Instant);

impl Timer {
    fn new() -> Self {
        Timer(Vec::new(), Instant::now())
    }

    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.0.push((name.to_string(), now - self.1));
        self.1 = now;
    }
}

fn check_compatible(new: &TransitionSystem, old: &TransitionSystem) -> Result<(), AnalysisError> {
    let a: BTreeSet<&Var> = new.variables.iter().collect();
    let b: BTreeSet<&Var> = old.variables.iter().collect();
    if a != b {
        let diff: Vec<String> = a.symmetric_difference(&b).map(|v| v.to_string()).collect();
        return Err(AnalysisError::VariableMismatch(diff.join(", ")));
    }
    let norm = |t: &Assertion| -> BTreeSet<_> { t.conjuncts.iter().map(|c| c.normalized()).collect() };
    if norm(&new.theta0) != norm(&old.theta0) {
        return Err(AnalysisError::ThetaMismatch);
    }
    Ok(())
}

struct Solved {
    fragments: Vec<Fragment>,
    system: LinearSystem,
    solution: LpSolution,
}

fn solve_constraints(
    cs: &[ImplicationConstraint],
    leading: Vec<Sym>,
    objective: Option<(Sense, LinearCombo)>,
    opts: &AnalysisOptions,
    timer: &mut Timer,
) -> Result<Solved, AnalysisError> {
    let fragments = translate_all(cs, opts.k());
    let system = assemble(&fragments, &leading, vec![], objective);
    timer.lap("translate");
    let mut solution = solve(&system, &opts.backend)?;
    timer.lap("solve");
    if solution.status.is_solved() && matches!(opts.backend, Backend::Exact(_)) {
        let ok = cs.iter().zip(&fragments).all(|(c, f)| reexpansion_holds(c, f, &solution.values));
        if !ok {
            solution.status = LpStatus::Rejected;
            solution.message = Some("re-expansion identity failed".into());
        }
    }
    Ok(Solved {
        fragments,
        system,
        solution,
    })
}

fn leading_syms(tmpls: &[&TemplateMap], extra: Option<Sym>) -> Vec<Sym> {
    let mut v: Vec<Sym> = extra.into_iter().collect();
    for t in tmpls {
        v.extend(t.symbols().cloned());
    }
    v
}

fn base_analysis(mode: Mode, opts: &AnalysisOptions) -> Analysis {
    Analysis {
        mode,
        verdict: Verdict::Unknown(String::new()),
        witness: None,
        lp_status: None,
        lp: LpStats::default(),
        invariants: BTreeMap::new(),
        warnings: Vec::new(),
        unbounded: Vec::new(),
        timings: Vec::new(),
        system: None,
        certificate: None,
        degree: opts.degree,
        prodk: opts.k(),
        solver: opts.backend.name(),
        eps: opts.eps.clone(),
    }
}

fn record(a: &mut Analysis, cs: &[ImplicationConstraint], s: &Solved) {
    a.lp = LpStats {
        constraints: cs.len(),
        variables: s.system.variables.len(),
        equalities: s.system.equalities.len(),
        inequalities: s.system.inequalities.len(),
        pivots: s.solution.pivots,
        certified: s.solution.certified,
    };
    a.lp_status = Some(s.solution.status);
    let mut seen = BTreeSet::new();
    for f in &s.fragments {
        for w in &f.warnings {
            if seen.insert(w.clone()) {
                a.warnings.push(w.clone());
            }
        }
        if !f.unbounded.is_empty() {
            let vars: Vec<&str> = f.unbounded.iter().map(|v| v.as_str()).collect();
            a.unbounded.push(format!("{}: {}", f.tag, vars.join(" ")));
        }
    }
    if let Some(m) = &s.solution.message {
        a.warnings.push(m.clone());
    }
    a.system = Some(s.system.clone());
    a.certificate = s.solution.status.is_solved().then(|| Certificate {
        constraints: cs.to_vec(),
        fragments: s.fragments.clone(),
        values: s.solution.values.clone(),
    });
}

fn unknown_reason(status: LpStatus) -> String {
    match status {
        LpStatus::Infeasible => "no polynomial witness of the given degree (LP infeasible)".into(),
        LpStatus::Unbounded => "LP unbounded".into(),
        LpStatus::Timeout => "LP pivot limit reached".into(),
        LpStatus::Rejected => "solver answer rejected by exact verification".into(),
        LpStatus::Optimal | LpStatus::Feasible => String::new(),
    }
}

fn invariants_for(
    ts: &TransitionSystem,
    user: &UserInvariants,
    v: Option<Version>,
    opts: &AnalysisOptions,
) -> Result<InvariantMap, AnalysisError> {
    let annotations = match v {
        Some(v) => user.for_version(v),
        None => user.both.clone(),
    };
    let u = (!annotations.is_empty()).then_some(&annotations);
    Ok(infer_invariants(ts, u, &opts.inference)?)
}

/// Floating-point backends may land just below an integer optimum.
fn finish_threshold(opts: &AnalysisOptions, w: &mut Witness) {
    if let (Backend::External(_), Some(raw)) = (&opts.backend, &w.threshold_raw) {
        w.threshold_int = Some(snap_threshold(raw).floor().to_integer());
    }
}

/// Minimal threshold `t` with `CostSup_new − CostInf_old ≤ t` on all inputs.
pub fn diff(
    new: &TransitionSystem,
    old: &TransitionSystem,
    user: &UserInvariants,
    opts: &AnalysisOptions,
) -> Result<Analysis, AnalysisError> {
    check_compatible(new, old)?;
    let mut a = base_analysis(Mode::Diff, opts);
    let mut timer = Timer::new();
    let inv_new = invariants_for(new, user, Some(Version::New), opts)?;
    let inv_old = invariants_for(old, user, Some(Version::Old), opts)?;
    timer.lap("invariants");
    let vars = opts.template_vars(&[new, old]);
    let tn = fix_templates_over(new, vars.clone(), opts.degree, "new");
    let to = fix_templates_over(old, vars, opts.degree, "old");
    let t = threshold_sym();
    let mut cs = collect_pf_constraints(new, &inv_new, &tn)?;
    cs.extend(collect_antipf_constraints(old, &inv_old, &to)?);
    cs.push(collect_diffcost_constraint(&new.theta0, &tn, &new.initial, &to, &old.initial, &t)?);
    timer.lap("constraints");
    let s = solve_constraints(
        &cs,
        leading_syms(&[&tn, &to], Some(t.clone())),
        Some((Sense::Minimize, LinearCombo::sym(t.clone()))),
        opts,
        &mut timer,
    )?;
    record(&mut a, &cs, &s);
    a.invariants.insert("new".into(), inv_new);
    a.invariants.insert("old".into(), inv_old);
    if s.solution.status == LpStatus::Optimal {
        let mut w = extract_witness(&s.solution, &tn, &to, Some(&t), Mode::Diff)?;
        finish_threshold(opts, &mut w);
        a.witness = Some(w);
        a.verdict = Verdict::Bounded;
    } else {
        a.verdict = Verdict::Unknown(unknown_reason(s.solution.status));
    }
    a.timings = timer.0;
    Ok(a)
}

/// Proves `CostSup_new − CostInf_old ≤ p(x)` for a polynomial `p`.
pub fn verify(
    new: &TransitionSystem,
    old: &TransitionSystem,
    bound: &Polynomial,
    user: &UserInvariants,
    opts: &AnalysisOptions,
) -> Result<Analysis, AnalysisError> {
    check_compatible(new, old)?;
    let mut a = base_analysis(Mode::Verify, opts);
    let mut timer = Timer::new();
    let inv_new = invariants_for(new, user, Some(Version::New), opts)?;
    let inv_old = invariants_for(old, user, Some(Version::Old), opts)?;
    timer.lap("invariants");
    let vars = opts.template_vars(&[new, old]);
    let tn = fix_templates_over(new, vars.clone(), opts.degree, "new");
    let to = fix_templates_over(old, vars, opts.degree, "old");
    let mut cs = vec![collect_symbolic_bound_constraint(&new.theta0, &tn, &new.initial, &to, &old.initial, bound)?];
    cs.extend(collect_pf_constraints(new, &inv_new, &tn)?);
    cs.extend(collect_antipf_constraints(old, &inv_old, &to)?);
    timer.lap("constraints");
    let s = solve_constraints(&cs, leading_syms(&[&tn, &to], None), None, opts, &mut timer)?;
    record(&mut a, &cs, &s);
    a.invariants.insert("new".into(), inv_new);
    a.invariants.insert("old".into(), inv_old);
    if s.solution.status.is_solved() {
        a.witness = Some(extract_witness(&s.solution, &tn, &to, None, Mode::Verify)?);
        a.verdict = Verdict::Verified;
    } else {
        a.verdict = Verdict::Unknown(unknown_reason(s.solution.status));
    }
    a.timings = timer.0;
    Ok(a)
}

/// Where to look for a refuting input.
#[derive(Clone, Debug)]
pub enum RefuteTarget {
    Point(Valuation),
    /// Every corner of the interval box of the initial assertion.
    Corners,
}

/// Corners of the interval projection of `theta0`. Variables are fixed in
/// order, each projection taken under the choices made so far; a variable
/// without any bound is set to 0. Points violating `theta0` are dropped.
pub fn theta_corners(ts: &TransitionSystem) -> Vec<Valuation> {
    let mut out = Vec::new();
    corners_rec(ts, 0, ts.theta0.conjuncts.clone(), Valuation::new(), &mut out);
    out.retain(|p| ts.theta0.holds(p).unwrap_or(false));
    out.dedup();
    out
}

fn corners_rec(ts: &TransitionSystem, idx: usize, conj: Vec<AffineExpr>, point: Valuation, out: &mut Vec<Valuation>) {
    let Some(v) = ts.variables.get(idx) else {
        out.push(point);
        return;
    };
    let mut b = IntervalBox::new();
    if !refine_all(&mut b, &conj) {
        return;
    }
    let choices: Vec<BigInt> = if *v == cost_var() {
        vec![BigInt::from(0)]
    } else {
        let iv = b.get(v);
        let lo = iv.and_then(|i| i.lo.as_ref()).map(|r| r.ceil().to_integer());
        let hi = iv.and_then(|i| i.hi.as_ref()).map(|r| r.floor().to_integer());
        match (lo, hi) {
            (Some(l), Some(h)) if l >= h => vec![l],
            (Some(l), Some(h)) => vec![l, h],
            (Some(l), None) => vec![l],
            (None, Some(h)) => vec![h],
            (None, None) => vec![BigInt::from(0)],
        }
    };
    for c in choices {
        let x = Polynomial::var(v.clone());
        let k = Polynomial::constant(Rational::from_integer(c.clone()));
        let mut next = conj.clone();
        next.push(AffineExpr::new(&x - &k).expect("affine"));
        next.push(AffineExpr::new(&k - &x).expect("affine"));
        let mut p = point.clone();
        p.set(v.clone(), c);
        corners_rec(ts, idx + 1, next, p, out);
    }
}

/// Fills unspecified variables of a user-given input with 0.
pub fn complete_input(ts: &TransitionSystem, x: &Valuation) -> Result<Valuation, AnalysisError> {
    let mut out = Valuation::new();
    for (v, _) in x.iter() {
        if !ts.has_var(v) {
            return Err(AnalysisError::BadInput(format!("unknown variable `{v}`")));
        }
    }
    for v in &ts.variables {
        out.set(v.clone(), x.get(v).cloned().unwrap_or_default());
    }
    Ok(out)
}

/// Tries to show that `t` is not a threshold: an anti-potential of the new
/// version and a potential of the old one whose difference at some input
/// exceeds `t`.
pub fn refute(
    new: &TransitionSystem,
    old: &TransitionSystem,
    t: &Rational,
    target: &RefuteTarget,
    user: &UserInvariants,
    opts: &AnalysisOptions,
) -> Result<Analysis, AnalysisError> {
    check_compatible(new, old)?;
    let mut a = base_analysis(Mode::Refute, opts);
    let mut timer = Timer::new();
    let inv_new = invariants_for(new, user, Some(Version::New), opts)?;
    let inv_old = invariants_for(old, user, Some(Version::Old), opts)?;
    timer.lap("invariants");
    let points = match target {
        RefuteTarget::Point(x) => {
            let x = complete_input(new, x)?;
            if !new.theta0.holds(&x).map_err(|e| AnalysisError::BadInput(e.to_string()))? {
                return Err(AnalysisError::BadInput(format!("{x} does not satisfy the initial assertion")));
            }
            vec![x]
        }
        RefuteTarget::Corners => theta_corners(new),
    };
    let vars = opts.template_vars(&[new, old]);
    let an = fix_templates_over(new, vars.clone(), opts.degree, "new");
    let po = fix_templates_over(old, vars, opts.degree, "old");
    a.verdict = Verdict::Unknown("no input tried".into());
    for x0 in points {
        let cs = collect_refutation_constraints(new, &inv_new, &an, old, &inv_old, &po, &x0, t, &opts.eps)?;
        timer.lap("constraints");
        let s = solve_constraints(&cs, leading_syms(&[&an, &po], None), None, opts, &mut timer)?;
        record(&mut a, &cs, &s);
        if s.solution.status.is_solved() {
            let mut w = extract_witness(&s.solution, &po, &an, None, Mode::Refute)?;
            w.threshold_raw = Some(t.clone());
            w.threshold_int = Some(t.floor().to_integer());
            a.witness = Some(w);
            a.verdict = Verdict::Refuted(x0);
            break;
        }
        a.verdict = Verdict::Unknown(unknown_reason(s.solution.status));
    }
    a.invariants.insert("new".into(), inv_new);
    a.invariants.insert("old".into(), inv_old);
    a.timings = timer.0;
    Ok(a)
}

/// Upper and lower cost bounds for one program with minimal gap `p`.
pub fn single(ts: &TransitionSystem, user: &UserInvariants, opts: &AnalysisOptions) -> Result<Analysis, AnalysisError> {
    let mut a = base_analysis(Mode::Precision, opts);
    let mut timer = Timer::new();
    let inv = invariants_for(ts, user, None, opts)?;
    timer.lap("invariants");
    let vars = opts.template_vars(&[ts]);
    let tp = fix_templates_over(ts, vars.clone(), opts.degree, "pf");
    let ta = fix_templates_over(ts, vars, opts.degree, "anti");
    let p = precision_sym();
    let cs = collect_precision_constraints(ts, &inv, &tp, &ta, &p)?;
    timer.lap("constraints");
    let s = solve_constraints(
        &cs,
        leading_syms(&[&tp, &ta], Some(p.clone())),
        Some((Sense::Minimize, LinearCombo::sym(p.clone()))),
        opts,
        &mut timer,
    )?;
    record(&mut a, &cs, &s);
    a.invariants.insert("program".into(), inv);
    if s.solution.status == LpStatus::Optimal {
        let mut w = extract_witness(&s.solution, &tp, &ta, Some(&p), Mode::Precision)?;
        finish_threshold(opts, &mut w);
        a.witness = Some(w);
        a.verdict = Verdict::Bounded;
    } else {
        a.verdict = Verdict::Unknown(unknown_reason(s.solution.status));
    }
    a.timings = timer.0;
    Ok(a)
}

/// Threshold as an `f64`, for display and loose comparisons.
pub fn threshold_f64(a: &Analysis) -> Option<f64> {
    a.witness.as_ref()?.threshold_raw.as_ref()?.to_f64()
}
