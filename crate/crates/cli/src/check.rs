//! Oracle re-checks of solved witnesses on the default input box.

use diffcost_core::analysis::{Analysis, Verdict};
use diffcost_core::oracle::{self, check_bound_function, cost_extremes, Bound, OracleError, RunBudget, WitnessReport};
use diffcost_core::poly::{fmt_rational, Rational};
use diffcost_core::ts::TransitionSystem;

use crate::report::CheckSummary;

/// Potential of the new version and anti-potential of the old one, plus the
/// threshold chain when a threshold was computed.
pub fn check_diff(a: &Analysis, new: &TransitionSystem, old: &TransitionSystem) -> Result<Option<CheckSummary>, OracleError> {
    let Some(w) = &a.witness else { return Ok(None) };
    let budget = RunBudget::for_system(new);
    let r = oracle::check_witness(w, new, old, &budget)?;
    Ok(Some((&r).into()))
}

/// Roles swapped: the old version's potential and the new version's
/// anti-potential, and the oracle must confirm the strict excess at the
/// refuting input.
pub fn check_refute(
    a: &Analysis,
    new: &TransitionSystem,
    old: &TransitionSystem,
    t: &Rational,
) -> Result<Option<CheckSummary>, OracleError> {
    let (Some(w), Verdict::Refuted(x0)) = (&a.witness, &a.verdict) else {
        return Ok(None);
    };
    let mut r = WitnessReport::default();
    check_bound_function(old, &w.pf, Bound::Upper, &RunBudget::for_system(old), &mut r, "potential (old)")?;
    check_bound_function(new, &w.anti_pf, Bound::Lower, &RunBudget::for_system(new), &mut r, "anti-potential (new)")?;
    let budget = RunBudget::for_system(new);
    let (inf_new, _) = cost_extremes(new, x0, &budget)?;
    let (_, sup_old) = cost_extremes(old, x0, &budget)?;
    r.inputs += 1;
    let mut s: CheckSummary = (&r).into();
    if &inf_new - &sup_old <= *t {
        s.passed = false;
        s.failures.push(format!(
            "at {x0}: CostInf_new {} - CostSup_old {} does not exceed {}",
            fmt_rational(&inf_new),
            fmt_rational(&sup_old),
            fmt_rational(t)
        ));
    }
    Ok(Some(s))
}

/// Upper and lower bound functions of a single program.
pub fn check_single(a: &Analysis, ts: &TransitionSystem) -> Result<Option<CheckSummary>, OracleError> {
    let Some(w) = &a.witness else { return Ok(None) };
    let budget = RunBudget::for_system(ts);
    let mut r = WitnessReport::default();
    check_bound_function(ts, &w.pf, Bound::Upper, &budget, &mut r, "upper bound")?;
    check_bound_function(ts, &w.anti_pf, Bound::Lower, &budget, &mut r, "lower bound")?;
    r.inputs = budget.box_points(ts).len();
    Ok(Some((&r).into()))
}
