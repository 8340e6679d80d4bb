//! Exact two-phase primal simplex over rationals on a sparse tableau.
//!
//! The system is brought to standard form `A x = b, x ≥ 0, b ≥ 0`: free
//! symbols are split into a positive and a negative part, inequalities get a
//! surplus column, and every row without a usable unit column receives an
//! artificial. Entering columns are chosen by the most negative reduced cost
//! until a run of degenerate pivots is seen, after which the smallest-index
//! (Bland) rule is used for the rest of the solve, which rules out cycling.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use super::num::Q;
use super::{LpSolution, LpStatus};
use crate::handelman::{LinearSystem, Sense};
use crate::linear::{LinearCombo, Sym};
use crate::poly::Rational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimplexOptions {
    pub max_pivots: u64,
    /// Consecutive degenerate pivots tolerated before switching to Bland.
    pub degenerate_limit: u32,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_pivots: 1_000_000,
            degenerate_limit: 50,
        }
    }
}

type Row = Vec<(usize, Rational)>;
type QRow = Vec<(usize, Q)>;

fn row_get<T>(row: &[(usize, T)], col: usize) -> Option<&T> {
    row.binary_search_by_key(&col, |(c, _)| *c).ok().map(|i| &row[i].1)
}

/// `dst - f * src`, both sorted by column.
fn row_axpy(dst: &QRow, f: &Q, src: &QRow) -> QRow {
    let mut out = Vec::with_capacity(dst.len() + src.len());
    let (mut i, mut j) = (0, 0);
    while i < dst.len() || j < src.len() {
        let ci = dst.get(i).map_or(usize::MAX, |e| e.0);
        let cj = src.get(j).map_or(usize::MAX, |e| e.0);
        if ci < cj {
            out.push(dst[i].clone());
            i += 1;
        } else if cj < ci {
            out.push((cj, -&(f * &src[j].1)));
            j += 1;
        } else {
            let v = &dst[i].1 - &(f * &src[j].1);
            if !v.is_zero() {
                out.push((ci, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ColKind {
    Pos(usize),
    Neg(usize),
    Surplus,
    Artificial,
}

struct StandardForm {
    rows: Vec<Row>,
    rhs: Vec<Rational>,
    cols: Vec<ColKind>,
    /// Objective to minimize, dense over columns.
    cost: Vec<Rational>,
    /// Column forming the initial identity for each row.
    init_basis: Vec<usize>,
}

fn index_symbols(sys: &LinearSystem) -> (Vec<Sym>, BTreeMap<Sym, usize>) {
    let mut syms = sys.variables.clone();
    let mut index: BTreeMap<Sym, usize> = syms.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    let mut see = |s: &Sym| {
        if !index.contains_key(s) {
            index.insert(s.clone(), syms.len());
            syms.push(s.clone());
        }
    };
    for l in sys.equalities.iter().chain(&sys.inequalities) {
        l.terms().keys().for_each(&mut see);
    }
    if let Some((_, o)) = &sys.objective {
        o.terms().keys().for_each(&mut see);
    }
    (syms, index)
}

/// `coef * s ≥ 0` with a positive coefficient.
fn as_nonneg_bound(l: &LinearCombo) -> Option<&Sym> {
    if !l.constant.is_zero() || l.terms().len() != 1 {
        return None;
    }
    let (s, c) = l.terms().iter().next()?;
    c.is_positive().then_some(s)
}

fn standard_form(sys: &LinearSystem, syms: &[Sym], index: &BTreeMap<Sym, usize>) -> (StandardForm, Vec<Vec<usize>>) {
    let mut nonneg = vec![false; syms.len()];
    let mut general = Vec::new();
    for l in &sys.inequalities {
        match as_nonneg_bound(l) {
            Some(s) => nonneg[index[s]] = true,
            None => general.push(l),
        }
    }
    let mut cols = Vec::new();
    // Columns of each symbol: [pos] or [pos, neg].
    let mut sym_cols = vec![Vec::new(); syms.len()];
    for (i, nn) in nonneg.iter().enumerate() {
        sym_cols[i].push(cols.len());
        cols.push(ColKind::Pos(i));
        if !nn {
            sym_cols[i].push(cols.len());
            cols.push(ColKind::Neg(i));
        }
    }
    let expand = |l: &LinearCombo| -> Row {
        let mut r = Vec::new();
        for (s, c) in l.terms() {
            let sc = &sym_cols[index[s]];
            r.push((sc[0], c.clone()));
            if sc.len() == 2 {
                r.push((sc[1], -c.clone()));
            }
        }
        r.sort_by_key(|e| e.0);
        r
    };
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut unit: Vec<Option<usize>> = Vec::new();
    for e in &sys.equalities {
        if e.is_constant() {
            continue;
        }
        rows.push(expand(e));
        rhs.push(-e.constant.clone());
        unit.push(None);
    }
    for l in general {
        let mut r = expand(l);
        let sc = cols.len();
        cols.push(ColKind::Surplus);
        r.push((sc, -Rational::one()));
        rows.push(r);
        rhs.push(-l.constant.clone());
        unit.push(Some(sc));
    }
    let mut init_basis = Vec::with_capacity(rows.len());
    for i in 0..rows.len() {
        if rhs[i].is_negative() {
            rhs[i] = -rhs[i].clone();
            for e in rows[i].iter_mut() {
                e.1 = -e.1.clone();
            }
        }
        // A surplus column with coefficient +1 after sign normalization
        // already forms a unit column.
        match unit[i] {
            Some(sc) if row_get(&rows[i], sc).is_some_and(|c| c.is_one()) => init_basis.push(sc),
            _ => {
                let a = cols.len();
                cols.push(ColKind::Artificial);
                rows[i].push((a, Rational::one()));
                init_basis.push(a);
            }
        }
    }
    let mut cost = vec![Rational::zero(); cols.len()];
    if let Some((sense, o)) = &sys.objective {
        let sign = match sense {
            Sense::Minimize => Rational::one(),
            Sense::Maximize => -Rational::one(),
        };
        for (s, c) in o.terms() {
            let sc = &sym_cols[index[s]];
            cost[sc[0]] = c * &sign;
            if sc.len() == 2 {
                cost[sc[1]] = -(c * &sign);
            }
        }
    }
    (
        StandardForm {
            rows,
            rhs,
            cols,
            cost,
            init_basis,
        },
        sym_cols,
    )
}

struct Tableau {
    rows: Vec<QRow>,
    rhs: Vec<Q>,
    basis: Vec<usize>,
    reduced: Vec<Q>,
    value: Q,
    blocked: Vec<bool>,
    pivots: u64,
    degenerate_run: u32,
    bland: bool,
}

enum Outcome {
    Optimal,
    Unbounded,
    Timeout,
}

impl Tableau {
    fn set_objective(&mut self, cost: &[Rational]) {
        self.reduced = cost.iter().map(Q::from_rational).collect();
        self.value = Q::zero();
        for (i, row) in self.rows.iter().enumerate() {
            let cb = Q::from_rational(&cost[self.basis[i]]);
            if cb.is_zero() {
                continue;
            }
            for (c, a) in row {
                self.reduced[*c] = &self.reduced[*c] - &(&cb * a);
            }
            self.value = &self.value + &(&cb * &self.rhs[i]);
        }
    }

    fn choose_entering(&self) -> Option<usize> {
        let candidates = self
            .reduced
            .iter()
            .enumerate()
            .filter(|(j, r)| !self.blocked[*j] && r.is_negative());
        if self.bland {
            candidates.map(|(j, _)| j).next()
        } else {
            candidates.min_by(|a, b| a.1.cmp(b.1)).map(|(j, _)| j)
        }
    }

    fn choose_leaving(&self, col: usize) -> Option<usize> {
        let mut best: Option<(usize, Q)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            let Some(a) = row_get(row, col) else { continue };
            if !a.is_positive() {
                continue;
            }
            let ratio = &self.rhs[i] / a;
            let better = match &best {
                None => true,
                Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
            };
            if better {
                best = Some((i, ratio));
            }
        }
        best.map(|(i, _)| i)
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let a = row_get(&self.rows[r], col).expect("pivot entry").clone();
        if !a.is_one() {
            for e in self.rows[r].iter_mut() {
                e.1 = &e.1 / &a;
            }
            self.rhs[r] = &self.rhs[r] / &a;
        }
        let prow = std::mem::take(&mut self.rows[r]);
        let prhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let Some(f) = row_get(&self.rows[i], col).cloned() else { continue };
            self.rows[i] = row_axpy(&self.rows[i], &f, &prow);
            self.rhs[i] = &self.rhs[i] - &(&f * &prhs);
        }
        let f = self.reduced[col].clone();
        if !f.is_zero() {
            for (c, v) in &prow {
                self.reduced[*c] = &self.reduced[*c] - &(&f * v);
            }
            self.value = &self.value + &(&f * &prhs);
        }
        self.rows[r] = prow;
        self.basis[r] = col;
        self.pivots += 1;
    }

    fn run(&mut self, max_pivots: u64, degenerate_limit: u32) -> Outcome {
        loop {
            let Some(col) = self.choose_entering() else {
                return Outcome::Optimal;
            };
            let Some(r) = self.choose_leaving(col) else {
                return Outcome::Unbounded;
            };
            if self.pivots >= max_pivots {
                return Outcome::Timeout;
            }
            if self.rhs[r].is_zero() {
                self.degenerate_run += 1;
                if self.degenerate_run > degenerate_limit {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
            }
            self.pivot(r, col);
        }
    }

    fn column_values(&self, ncols: usize) -> Vec<Rational> {
        let mut x = vec![Rational::zero(); ncols];
        for (i, b) in self.basis.iter().enumerate() {
            x[*b] = self.rhs[i].to_rational();
        }
        x
    }
}

/// Verifies primal feasibility, dual feasibility and zero duality gap of a
/// claimed optimum on the standard form (exact).
fn certify(sf: &StandardForm, x: &[Rational], y: &[Rational]) -> bool {
    let primal = x.iter().all(|v| !v.is_negative())
        && sf.rows.iter().zip(&sf.rhs).all(|(row, b)| {
            let lhs: Rational = row.iter().map(|(c, a)| a * &x[*c]).sum();
            lhs == *b
        });
    if !primal {
        return false;
    }
    // Reduced costs c_j − yᵀA_j ≥ 0 for every real column.
    let mut reduced = sf.cost.clone();
    for (row, yi) in sf.rows.iter().zip(y) {
        if yi.is_zero() {
            continue;
        }
        for (c, a) in row {
            reduced[*c] -= a * yi;
        }
    }
    let dual = sf
        .cols
        .iter()
        .zip(&reduced)
        .all(|(k, r)| *k == ColKind::Artificial || !r.is_negative());
    let primal_obj: Rational = sf.cost.iter().zip(x).map(|(c, v)| c * v).sum();
    let dual_obj: Rational = sf.rhs.iter().zip(y).map(|(b, v)| b * v).sum();
    dual && primal_obj == dual_obj
}

pub fn solve_exact(sys: &LinearSystem, opts: &SimplexOptions) -> LpSolution {
    let (syms, index) = index_symbols(sys);
    // Constant equalities and inequalities are decided up front.
    let constant_infeasible = sys.equalities.iter().any(|e| e.is_constant() && !e.constant.is_zero())
        || sys
            .inequalities
            .iter()
            .any(|i| i.is_constant() && i.constant.is_negative());
    if constant_infeasible {
        return LpSolution::with_status(LpStatus::Infeasible);
    }
    let (sf, sym_cols) = standard_form(sys, &syms, &index);
    let ncols = sf.cols.len();
    let mut tab = Tableau {
        rows: sf
            .rows
            .iter()
            .map(|r| r.iter().map(|(c, a)| (*c, Q::from_rational(a))).collect())
            .collect(),
        rhs: sf.rhs.iter().map(Q::from_rational).collect(),
        basis: sf.init_basis.clone(),
        reduced: Vec::new(),
        value: Q::zero(),
        blocked: vec![false; ncols],
        pivots: 0,
        degenerate_run: 0,
        bland: false,
    };

    // Phase 1: minimize the sum of artificials.
    let phase1: Vec<Rational> = sf
        .cols
        .iter()
        .map(|k| if *k == ColKind::Artificial { Rational::one() } else { Rational::zero() })
        .collect();
    tab.set_objective(&phase1);
    match tab.run(opts.max_pivots, opts.degenerate_limit) {
        Outcome::Timeout => return LpSolution::timeout(tab.pivots),
        Outcome::Unbounded => unreachable!("phase 1 objective is bounded below by zero"),
        Outcome::Optimal => {}
    }
    if tab.value.is_positive() {
        let mut s = LpSolution::with_status(LpStatus::Infeasible);
        s.pivots = tab.pivots;
        return s;
    }
    for (j, k) in sf.cols.iter().enumerate() {
        tab.blocked[j] = *k == ColKind::Artificial;
    }
    // Drive artificials out of the basis where possible; rows where this is
    // impossible are redundant and keep an artificial basic at zero.
    for r in 0..tab.rows.len() {
        if sf.cols[tab.basis[r]] != ColKind::Artificial {
            continue;
        }
        let col = tab.rows[r]
            .iter()
            .find(|(c, a)| sf.cols[*c] != ColKind::Artificial && !a.is_zero())
            .map(|(c, _)| *c);
        if let Some(col) = col {
            tab.pivot(r, col);
        }
    }

    let has_objective = sys.objective.is_some();
    let status = if has_objective {
        tab.set_objective(&sf.cost);
        tab.degenerate_run = 0;
        match tab.run(opts.max_pivots, opts.degenerate_limit) {
            Outcome::Timeout => return LpSolution::timeout(tab.pivots),
            Outcome::Unbounded => {
                let mut s = LpSolution::with_status(LpStatus::Unbounded);
                s.pivots = tab.pivots;
                return s;
            }
            Outcome::Optimal => LpStatus::Optimal,
        }
    } else {
        LpStatus::Feasible
    };

    let x = tab.column_values(ncols);
    let mut values = BTreeMap::new();
    for (i, s) in syms.iter().enumerate() {
        let sc = &sym_cols[i];
        let mut v = x[sc[0]].clone();
        if sc.len() == 2 {
            v -= &x[sc[1]];
        }
        values.insert(s.clone(), v);
    }
    let certified = if has_objective {
        // Row duals read off the reduced costs of the initial identity columns
        // (all of which have zero cost in phase 2).
        let y: Vec<Rational> = sf.init_basis.iter().map(|c| -tab.reduced[*c].to_rational()).collect();
        certify(&sf, &x, &y)
    } else {
        true
    };
    let objective = sys.objective.as_ref().map(|(_, o)| o.eval(&values));
    let exact = sys.satisfied_by(&values);
    LpSolution {
        status: if exact { status } else { LpStatus::Rejected },
        values,
        objective,
        pivots: tab.pivots,
        certified: certified && exact,
        message: (!exact).then(|| "internal error: simplex point violates the system".to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::rat;

    fn s(n: &str) -> Sym {
        Sym::new(n)
    }

    fn lc(terms: &[(&str, i64)], c: i64) -> LinearCombo {
        let mut l = LinearCombo::constant(rat(c));
        for (n, k) in terms {
            l.add_term(s(n), rat(*k));
        }
        l
    }

    fn system(eqs: Vec<LinearCombo>, ineqs: Vec<LinearCombo>, obj: Option<(Sense, LinearCombo)>) -> LinearSystem {
        let mut sys = LinearSystem {
            equalities: eqs,
            inequalities: ineqs,
            objective: obj,
            ..Default::default()
        };
        let (syms, _) = index_symbols(&sys);
        sys.variables = syms;
        sys
    }

    #[test]
    fn minimize_with_lower_bound() {
        let sys = system(vec![], vec![lc(&[("t", 1)], -3)], Some((Sense::Minimize, lc(&[("t", 1)], 0))));
        let sol = solve_exact(&sys, &SimplexOptions::default());
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.values[&s("t")], rat(3));
        assert!(sol.certified);
    }

    #[test]
    fn infeasible_nonneg_equal_negative() {
        let sys = system(vec![lc(&[("c", 1)], 1)], vec![lc(&[("c", 1)], 0)], None);
        assert_eq!(solve_exact(&sys, &SimplexOptions::default()).status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_free_objective() {
        let sys = system(vec![], vec![], Some((Sense::Minimize, lc(&[("t", 1)], 0))));
        assert_eq!(solve_exact(&sys, &SimplexOptions::default()).status, LpStatus::Unbounded);
    }

    #[test]
    fn small_optimum_with_fractions() {
        // max x + y s.t. 2x + y <= 4, x + 3y <= 6, x, y >= 0  → (6/5, 8/5), 14/5
        let sys = system(
            vec![],
            vec![
                lc(&[("x", 1)], 0),
                lc(&[("y", 1)], 0),
                lc(&[("x", -2), ("y", -1)], 4),
                lc(&[("x", -1), ("y", -3)], 6),
            ],
            Some((Sense::Maximize, lc(&[("x", 1), ("y", 1)], 0))),
        );
        let sol = solve_exact(&sys, &SimplexOptions::default());
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.objective, Some(crate::poly::ratio(14, 5)));
        assert!(sol.certified);
    }

    #[test]
    fn pivot_cap_times_out() {
        let sys = system(
            vec![],
            vec![lc(&[("x", 1)], 0), lc(&[("x", -1)], 5)],
            Some((Sense::Maximize, lc(&[("x", 1)], 0))),
        );
        let opts = SimplexOptions {
            max_pivots: 0,
            ..Default::default()
        };
        assert_eq!(solve_exact(&sys, &opts).status, LpStatus::Timeout);
    }

    #[test]
    fn redundant_equalities() {
        let sys = system(
            vec![lc(&[("a", 1), ("b", 1)], -2), lc(&[("a", 2), ("b", 2)], -4)],
            vec![lc(&[("a", 1)], 0), lc(&[("b", 1)], 0)],
            Some((Sense::Minimize, lc(&[("a", 1)], 0))),
        );
        let sol = solve_exact(&sys, &SimplexOptions::default());
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.values[&s("a")], rat(0));
        assert_eq!(sol.values[&s("b")], rat(2));
        assert!(sol.certified);
    }
}
