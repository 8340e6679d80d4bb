mod common;

use std::collections::BTreeMap;

use diffcost_core::analysis::{diff, AnalysisOptions, Verdict};
use diffcost_core::constraints::{
    collect_antipf_constraints, collect_pf_constraints, fix_templates, ImplicationConstraint, SymPoly,
};
use diffcost_core::handelman::{
    assemble, multiset_count, prod_k, prod_k_all, reexpand, reexpansion_holds, translate, Sense,
};
use diffcost_core::invariants::{infer_invariants, InferenceOptions, UserInvariants};
use diffcost_core::linear::{LinearCombo, Sym};
use diffcost_core::lp::{solve_exact, LpStatus, SimplexOptions};
use diffcost_core::parse::parse_polynomial;
use diffcost_core::poly::{rat, ratio, AffineExpr, Polynomial, Rational, Var};
use proptest::prelude::*;

fn aff(text: &str) -> AffineExpr {
    AffineExpr::new(parse_polynomial(text).unwrap()).unwrap()
}

fn arb_affine() -> impl Strategy<Value = AffineExpr> {
    (-3i64..=3, -3i64..=3, -5i64..=5).prop_map(|(a, b, c)| {
        let p = Polynomial::var(Var::new("x")).scale(&rat(a))
            + Polynomial::var(Var::new("y")).scale(&rat(b))
            + Polynomial::int(c);
        AffineExpr::new(p).unwrap()
    })
}

fn eval_at(p: &Polynomial, x: &Rational, y: &Rational) -> Rational {
    p.eval_with(&|v| match v.as_str() {
        "x" => Some(x.clone()),
        "y" => Some(y.clone()),
        _ => None,
    })
    .unwrap()
}

/// Solves the translation of a single implication for feasibility.
fn solve_one(c: &ImplicationConstraint, k: u32) -> (LpStatus, BTreeMap<Sym, Rational>) {
    let f = translate(c, k);
    let sys = assemble(std::slice::from_ref(&f), &[], vec![], None);
    let s = solve_exact(&sys, &SimplexOptions::default());
    (s.status, s.values)
}

proptest! {
    #[test]
    fn product_count_matches_multiset_formula(k in 0usize..6, kmax in 0u32..4) {
        let ps: Vec<AffineExpr> = (0..k).map(|i| AffineExpr::var(Var::new(&format!("p{i}")))).collect();
        prop_assert_eq!(prod_k_all(&ps, kmax).len() as u64, multiset_count(k, kmax));
        prop_assert_eq!(prod_k(&ps, kmax).len() as u64, multiset_count(k, kmax));
    }

    #[test]
    fn products_expand_their_factors(ps in prop::collection::vec(arb_affine(), 0..4), kmax in 0u32..3) {
        for t in prod_k_all(&ps, kmax) {
            prop_assert!(t.factors.len() <= kmax as usize);
            prop_assert!(t.factors.windows(2).all(|w| w[0] <= w[1]));
            let direct = t.factors.iter().fold(Polynomial::int(1), |acc, &i| &acc * ps[i].poly());
            prop_assert_eq!(&t.expansion, &direct);
        }
    }

    #[test]
    fn certified_conclusion_is_nonnegative_where_premises_hold(
        ps in prop::collection::vec(arb_affine(), 1..4),
        weights in prop::collection::vec(0i64..4, 10),
        pts in prop::collection::vec((-8i64..=8, -8i64..=8, 1i64..=3), 20),
    ) {
        // A nonnegative combination of products re-expands to a polynomial
        // that is nonnegative wherever all premises are.
        let products = prod_k(&ps, 2);
        let mut conclusion = Polynomial::zero();
        for (g, w) in products.iter().zip(weights.iter().cycle()) {
            conclusion = conclusion + g.expansion.scale(&rat(*w));
        }
        let c = ImplicationConstraint {
            premises: ps.clone(),
            conclusion: SymPoly::from_poly(&conclusion),
            tag: "planted".into(),
        };
        let (status, values) = solve_one(&c, 2);
        prop_assert!(status.is_solved());
        let f = translate(&c, 2);
        prop_assert!(reexpansion_holds(&c, &f, &values));
        for (x, y, d) in pts {
            let (x, y) = (ratio(x, d), ratio(y, d));
            if ps.iter().all(|p| eval_at(p.poly(), &x, &y) >= rat(0)) {
                prop_assert!(eval_at(&reexpand(&f, &values), &x, &y) >= rat(0));
            }
        }
    }

    #[test]
    fn conclusion_is_affine_in_the_unknowns(a in -5i64..=5, b in -5i64..=5, l in 0i64..=4) {
        let ts = common::load("simple_single_old.imp");
        let inv = infer_invariants(&ts, None, &InferenceOptions::default()).unwrap();
        let tmpl = fix_templates(&ts, 2, "pf", false);
        let syms: Vec<Sym> = tmpl.symbols().cloned().collect();
        let u: BTreeMap<Sym, Rational> = syms.iter().enumerate().map(|(i, s)| (s.clone(), rat(a + i as i64))).collect();
        let v: BTreeMap<Sym, Rational> = syms.iter().enumerate().map(|(i, s)| (s.clone(), rat(b - i as i64))).collect();
        let lam = ratio(l, 4);
        let mix: BTreeMap<Sym, Rational> = syms
            .iter()
            .map(|s| (s.clone(), &lam * &u[s] + (rat(1) - &lam) * &v[s]))
            .collect();
        for c in collect_pf_constraints(&ts, &inv, &tmpl).unwrap() {
            let lhs = c.conclusion.eval(&mix);
            let rhs = c.conclusion.eval(&u).scale(&lam) + c.conclusion.eval(&v).scale(&(rat(1) - &lam));
            prop_assert_eq!(lhs, rhs);
        }
    }
}

#[test]
fn counts_for_two_premises() {
    let ps = [aff("x"), aff("1 - x")];
    assert_eq!(prod_k_all(&ps, 2).len(), 6);
    assert_eq!(multiset_count(2, 2), 6);
    assert_eq!(multiset_count(0, 3), 1);
}

#[test]
fn planted_unsatisfiable_implication_is_infeasible() {
    // x >= 0 does not imply -1 - x >= 0 anywhere.
    let c = ImplicationConstraint {
        premises: vec![aff("x")],
        conclusion: SymPoly::from_poly(&parse_polynomial("-1 - x").unwrap()),
        tag: "planted".into(),
    };
    assert_eq!(solve_one(&c, 2).0, LpStatus::Infeasible);
    let c = ImplicationConstraint {
        premises: vec![aff("x")],
        conclusion: SymPoly::from_poly(&parse_polynomial("x - 1").unwrap()),
        tag: "planted".into(),
    };
    assert_eq!(solve_one(&c, 2).0, LpStatus::Infeasible);
}

#[test]
fn square_identity_is_found() {
    // x^2 - 1 = (x - 1)^2 + 2 (x - 1).
    let c = ImplicationConstraint {
        premises: vec![aff("x - 1")],
        conclusion: SymPoly::from_poly(&parse_polynomial("x^2 - 1").unwrap()),
        tag: "sq".into(),
    };
    let (status, values) = solve_one(&c, 2);
    assert!(status.is_solved());
    assert!(reexpansion_holds(&c, &translate(&c, 2), &values));
    assert_eq!(solve_one(&c, 1).0, LpStatus::Infeasible);
}

#[test]
fn anti_constraints_negate_potential_constraints() {
    for (name, ts) in common::all_programs() {
        let inv = infer_invariants(&ts, None, &InferenceOptions::default()).unwrap();
        let tmpl = fix_templates(&ts, 2, "f", false);
        let (Ok(pf), Ok(anti)) = (collect_pf_constraints(&ts, &inv, &tmpl), collect_antipf_constraints(&ts, &inv, &tmpl))
        else {
            continue;
        };
        assert_eq!(pf.len(), anti.len(), "{name}");
        for (p, a) in pf.iter().zip(&anti) {
            let mut sum = p.conclusion.clone();
            sum.add_sympoly(&a.conclusion, &rat(1));
            assert!(sum.is_zero(), "{name}: {}", p.tag);
            assert_eq!(p.premises, a.premises, "{name}: {}", p.tag);
        }
    }
}

#[test]
fn larger_product_degree_never_worsens_the_threshold() {
    for name in ["simple_single", "nested_single", "sum"] {
        let (new, old) = common::pair(name);
        let mut thresholds = Vec::new();
        for k in [1, 2, 3] {
            let opts = AnalysisOptions {
                prodk: Some(k),
                ..AnalysisOptions::default()
            };
            let a = diff(&new, &old, &UserInvariants::default(), &opts).unwrap();
            thresholds.push((a.verdict == Verdict::Bounded).then(|| a.witness.unwrap().threshold_raw.unwrap()));
        }
        for w in thresholds.windows(2) {
            match (&w[0], &w[1]) {
                (Some(a), Some(b)) => assert!(b <= a, "{name}: {b} > {a}"),
                (Some(_), None) => panic!("{name}: lost the threshold with more products"),
                _ => {}
            }
        }
    }
}

#[test]
fn reexpansion_holds_on_solved_benchmarks() {
    for name in common::PAIRS {
        let (new, old) = common::pair(name);
        let a = diff(&new, &old, &UserInvariants::default(), &AnalysisOptions::default()).unwrap();
        let Some(cert) = a.certificate else { continue };
        for (c, f) in cert.constraints.iter().zip(&cert.fragments) {
            assert!(reexpansion_holds(c, f, &cert.values), "{name}: {}", c.tag);
        }
    }
}

#[test]
fn translation_equalities_vanish_under_the_solution() {
    let (new, old) = common::pair("simple_single");
    let a = diff(&new, &old, &UserInvariants::default(), &AnalysisOptions::default()).unwrap();
    let cert = a.certificate.unwrap();
    for f in &cert.fragments {
        for e in &f.equalities {
            assert!(e.eval(&cert.values) == rat(0), "{}", f.tag);
        }
    }
    let t = LinearCombo::sym(Sym::new("t"));
    let sys = a.system.unwrap();
    assert_eq!(sys.objective, Some((Sense::Minimize, t)));
}
