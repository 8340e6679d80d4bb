mod common;

use diffcost_core::invariants::{
    check_invariant_sampled, infer_invariants, merge_annotations, parse_invariants, propagate_intervals,
    InferenceOptions, IntervalOptions, Version,
};
use diffcost_core::parse::parse_polynomial;
use diffcost_core::poly::{ratio, AffineExpr, Polynomial, Var};
use diffcost_core::ts::{Assertion, Valuation};
use proptest::prelude::*;

const SAMPLES: usize = 20_000;

fn aff(text: &str) -> AffineExpr {
    AffineExpr::new(parse_polynomial(text).unwrap()).unwrap()
}

#[test]
fn inferred_invariants_hold_on_sampled_runs() {
    for (name, ts) in common::all_programs() {
        let inv = infer_invariants(&ts, None, &InferenceOptions::default()).unwrap();
        let v = check_invariant_sampled(&ts, &inv, SAMPLES).unwrap();
        assert!(v.is_none(), "{name}: violated at {v:?}\n{inv}");
    }
}

#[test]
fn interval_only_invariants_hold_on_sampled_runs() {
    let opts = InferenceOptions {
        intervals: IntervalOptions { widen_after: 2 },
        strengthen: false,
    };
    for (name, ts) in common::all_programs() {
        let inv = infer_invariants(&ts, None, &opts).unwrap();
        assert!(check_invariant_sampled(&ts, &inv, SAMPLES).unwrap().is_none(), "{name}");
    }
}

#[test]
fn user_strengthened_invariants_hold_on_sampled_runs() {
    for (prog, file) in [("nested", "nested.inv"), ("nested_multiple_dep", "nested_multiple_dep.inv")] {
        let user = parse_invariants(&std::fs::read_to_string(common::programs_dir().join(file)).unwrap()).unwrap();
        let (new, old) = common::pair(prog);
        for (ts, v) in [(new, Version::New), (old, Version::Old)] {
            let ann = user.for_version(v);
            let inv = infer_invariants(&ts, Some(&ann), &InferenceOptions::default()).unwrap();
            assert!(check_invariant_sampled(&ts, &inv, SAMPLES).unwrap().is_none(), "{prog} {v:?}");
        }
    }
}

#[test]
fn a_false_invariant_is_caught() {
    let ts = common::load("simple_single_old.imp");
    let mut inv = infer_invariants(&ts, None, &InferenceOptions::default()).unwrap();
    let head = ts.transitions.iter().find(|t| t.source != ts.initial && t.source != ts.terminal).unwrap();
    let var = ts.variables.iter().find(|v| v.as_str() != "cost").unwrap().clone();
    inv.strengthen(&head.source, &[AffineExpr::new(-Polynomial::var(var)).unwrap()]);
    assert!(check_invariant_sampled(&ts, &inv, SAMPLES).unwrap().is_some());
}

#[test]
fn merging_keeps_every_inferred_conjunct() {
    let ts = common::load("nested_multiple_dep_new.imp");
    let auto = propagate_intervals(&ts, &IntervalOptions::default());
    let text = std::fs::read_to_string(common::programs_dir().join("nested_multiple_dep.inv")).unwrap();
    let user = parse_invariants(&text).unwrap().for_version(Version::New);
    let merged = merge_annotations(&auto, &user).unwrap();
    for (loc, a) in auto.iter() {
        for c in &a.conjuncts {
            assert!(merged.get(loc).conjuncts.contains(c), "{loc}: lost {c}");
        }
    }
    for (loc, a) in &user {
        for c in &a.conjuncts {
            assert!(merged.get(loc).conjuncts.contains(c), "{loc}: missing {c}");
        }
    }
    assert!(merged.conjunct_count() >= auto.conjunct_count());
}

#[test]
fn annotation_at_unknown_location_is_rejected() {
    let ts = common::load("simple_single_old.imp");
    let auto = propagate_intervals(&ts, &IntervalOptions::default());
    let user = parse_invariants("invariant nowhere: n >= 0;").unwrap().for_version(Version::New);
    assert!(merge_annotations(&auto, &user).is_err());
}

#[test]
fn inference_is_deterministic() {
    for (name, ts) in common::all_programs() {
        let a = infer_invariants(&ts, None, &InferenceOptions::default()).unwrap();
        let b = infer_invariants(&ts, None, &InferenceOptions::default()).unwrap();
        assert_eq!(a, b, "{name}");
        assert_eq!(a.to_string(), b.to_string(), "{name}");
    }
}

fn arb_conjunct() -> impl Strategy<Value = AffineExpr> {
    (-3i64..=3, -3i64..=3, -6i64..=6, 1i64..=3).prop_map(|(a, b, c, k)| {
        let p = Polynomial::var(Var::new("x")).scale(&ratio(a * k, 1))
            + Polynomial::var(Var::new("y")).scale(&ratio(b * k, 1))
            + Polynomial::constant(ratio(c, 1));
        AffineExpr::new(p).unwrap()
    })
}

proptest! {
    #[test]
    fn pruning_weaker_conjuncts_keeps_meaning(
        cs in prop::collection::vec(arb_conjunct(), 0..8),
        x in -6i64..=6,
        y in -6i64..=6,
    ) {
        let a = Assertion::new(cs);
        let pruned = a.without_weaker();
        prop_assert!(pruned.conjuncts.len() <= a.conjuncts.len());
        let p = Valuation::from_pairs([("x", x), ("y", y)]);
        prop_assert_eq!(a.holds(&p).unwrap(), pruned.holds(&p).unwrap());
    }
}

#[test]
fn pruning_example() {
    let a = Assertion::new(vec![aff("x - 1"), aff("2*x - 6"), aff("y"), aff("x")]);
    let p = a.without_weaker();
    assert_eq!(p.conjuncts, vec![aff("2*x - 6"), aff("y")]);
}
