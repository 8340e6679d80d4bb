use std::collections::BTreeMap;

use diffcost_core::handelman::{LinearSystem, Sense};
use diffcost_core::linear::{LinearCombo, Sym};
use diffcost_core::lp::format::{parse_lp, write_lp};
use diffcost_core::lp::{solve_exact, LpStatus, SimplexOptions};
use diffcost_core::poly::{rat, Rational};
use num_bigint::BigInt;
use proptest::prelude::*;

type Row = (i64, i64, i64);

fn combo(a: &Rational, b: &Rational, c: &Rational) -> LinearCombo {
    let mut l = LinearCombo::constant(c.clone());
    l.add_term(Sym::new("x"), a.clone());
    l.add_term(Sym::new("y"), b.clone());
    l
}

/// `rows` as `a x + b y + c >= 0`, plus the box `-10 <= x, y <= 10`.
fn system(rows: &[Row], obj: (i64, i64), sense: Sense) -> LinearSystem {
    let mut sys = LinearSystem {
        variables: vec![Sym::new("x"), Sym::new("y")],
        ..LinearSystem::default()
    };
    let mut all: Vec<Row> = rows.to_vec();
    all.extend([(1, 0, 10), (-1, 0, 10), (0, 1, 10), (0, -1, 10)]);
    sys.inequalities = all.iter().map(|&(a, b, c)| combo(&rat(a), &rat(b), &rat(c))).collect();
    sys.objective = Some((sense, combo(&rat(obj.0), &rat(obj.1), &rat(0))));
    sys
}

/// Optimum over the vertices of a bounded two-dimensional polytope.
fn brute_force(rows: &[Row], obj: (i64, i64), sense: Sense) -> Option<Rational> {
    let mut all: Vec<Row> = rows.to_vec();
    all.extend([(1, 0, 10), (-1, 0, 10), (0, 1, 10), (0, -1, 10)]);
    let mut best: Option<Rational> = None;
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            let (a1, b1, c1) = all[i];
            let (a2, b2, c2) = all[j];
            let det = a1 * b2 - a2 * b1;
            if det == 0 {
                continue;
            }
            // a1 x + b1 y = -c1, a2 x + b2 y = -c2
            let x = Rational::new(BigInt::from(-c1 * b2 + c2 * b1), BigInt::from(det));
            let y = Rational::new(BigInt::from(-a1 * c2 + a2 * c1), BigInt::from(det));
            let feasible = all
                .iter()
                .all(|&(a, b, c)| rat(a) * &x + rat(b) * &y + rat(c) >= rat(0));
            if !feasible {
                continue;
            }
            let v = rat(obj.0) * &x + rat(obj.1) * &y;
            best = Some(match (best, sense) {
                (None, _) => v,
                (Some(b), Sense::Minimize) => b.min(v),
                (Some(b), Sense::Maximize) => b.max(v),
            });
        }
    }
    best
}

fn arb_row() -> impl Strategy<Value = Row> {
    (-4i64..=4, -4i64..=4, -12i64..=12)
}

proptest! {
    #[test]
    fn optimum_matches_vertex_enumeration(
        rows in prop::collection::vec(arb_row(), 0..5),
        obj in (-3i64..=3, -3i64..=3),
        max in any::<bool>(),
    ) {
        let sense = if max { Sense::Maximize } else { Sense::Minimize };
        let sys = system(&rows, obj, sense);
        let sol = solve_exact(&sys, &SimplexOptions::default());
        match brute_force(&rows, obj, sense) {
            Some(best) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert_eq!(sol.objective.clone(), Some(best));
                prop_assert!(sys.satisfied_by(&sol.values));
                prop_assert!(sol.certified);
            }
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
        }
    }

    #[test]
    fn solving_is_deterministic(rows in prop::collection::vec(arb_row(), 0..5), obj in (-3i64..=3, -3i64..=3)) {
        let sys = system(&rows, obj, Sense::Minimize);
        let a = solve_exact(&sys, &SimplexOptions::default());
        let b = solve_exact(&sys, &SimplexOptions::default());
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.values, b.values);
        prop_assert_eq!(a.pivots, b.pivots);
    }

    #[test]
    fn text_format_preserves_the_optimum(rows in prop::collection::vec(arb_row(), 0..5), obj in (-3i64..=3, -3i64..=3)) {
        let sys = system(&rows, obj, Sense::Minimize);
        let back = parse_lp(&write_lp(&sys)).unwrap();
        let a = solve_exact(&sys, &SimplexOptions::default());
        let b = solve_exact(&back, &SimplexOptions::default());
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.objective, b.objective);
    }
}

#[test]
fn huge_coefficients_stay_exact() {
    // min x  s.t.  10^30 x - (10^30 + 1) >= 0, i.e. x >= 1 + 10^-30.
    let big: BigInt = BigInt::from(10u32).pow(30);
    let mut sys = LinearSystem {
        variables: vec![Sym::new("x")],
        ..LinearSystem::default()
    };
    let mut l = LinearCombo::constant(Rational::from_integer(-(&big + BigInt::from(1))));
    l.add_term(Sym::new("x"), Rational::from_integer(big.clone()));
    sys.inequalities.push(l);
    sys.objective = Some((Sense::Minimize, LinearCombo::sym(Sym::new("x"))));
    let sol = solve_exact(&sys, &SimplexOptions::default());
    assert_eq!(sol.status, LpStatus::Optimal);
    assert_eq!(sol.objective, Some(Rational::new(&big + BigInt::from(1), big)));
}

#[test]
fn feasibility_without_objective() {
    let mut sys = system(&[(1, 1, -3)], (0, 0), Sense::Minimize);
    sys.objective = None;
    let sol = solve_exact(&sys, &SimplexOptions::default());
    assert!(sol.status.is_solved());
    assert!(sys.satisfied_by(&sol.values));
}

#[test]
fn equalities_are_met_exactly() {
    // x + y = 1/3, x - y = 1/7
    let third = Rational::new(1.into(), 3.into());
    let seventh = Rational::new(1.into(), 7.into());
    let mut sys = system(&[], (1, 0), Sense::Maximize);
    sys.equalities = vec![combo(&rat(1), &rat(1), &-third), combo(&rat(1), &rat(-1), &-seventh)];
    let sol = solve_exact(&sys, &SimplexOptions::default());
    assert_eq!(sol.status, LpStatus::Optimal);
    let x = Sym::new("x");
    let expect: BTreeMap<Sym, Rational> = [(x.clone(), Rational::new(5.into(), 21.into()))].into();
    assert_eq!(sol.values.get(&x), expect.get(&x));
}
