mod common;

use common::ltl::{check_exhaustive, corpus_respects_bounds, CORPUS};
use proptest::prelude::*;
use secureplan_core::ltl::{eval_lasso, from_hoa, parse_ltl_unchecked, to_hoa, translate_formula, Ltl, Symbol};

#[test]
fn corpus_within_bounds() {
    assert!(CORPUS.len() >= 30);
    assert!(corpus_respects_bounds());
}

#[test]
fn automata_agree_with_evaluator_on_short_lassos() {
    for text in CORPUS {
        let atoms = parse_ltl_unchecked(text).unwrap().atoms().len();
        let bound = if atoms <= 2 { 4 } else { 2 };
        let stats = check_exhaustive(text, bound, bound);
        assert!(stats.mismatches.is_empty(), "{:?}", stats.mismatches);
        assert!(stats.checked > 0);
    }
}

#[test]
fn hoa_round_trip_preserves_language() {
    for text in CORPUS {
        let nba = translate_formula(&parse_ltl_unchecked(text).unwrap()).unwrap();
        let back = from_hoa(&to_hoa(&nba, text)).unwrap();
        assert_eq!(back.ap(), nba.ap());
        for c in 1..=2u32 {
            for y in 0..(1u64 << nba.ap().len()).pow(c) {
                let v: Vec<u64> = (0..c).map(|k| (y >> (k as usize * nba.ap().len())) & ((1 << nba.ap().len()) - 1)).collect();
                assert_eq!(nba.accepts_lasso_letters(&[], &v).unwrap(), back.accepts_lasso_letters(&[], &v).unwrap(), "{text}");
            }
        }
    }
}

fn atom() -> impl Strategy<Value = Ltl> {
    prop_oneof![Just(Ltl::atom("p")), Just(Ltl::atom("q")), Just(Ltl::atom("r"))]
}

fn formula() -> impl Strategy<Value = Ltl> {
    atom().prop_recursive(4, 12, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Ltl::not),
            inner.clone().prop_map(Ltl::next),
            inner.clone().prop_map(Ltl::eventually),
            inner.clone().prop_map(Ltl::always),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Ltl::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Ltl::or(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Ltl::until(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| Ltl::release(a, b)),
        ]
    })
}

fn letter() -> impl Strategy<Value = Symbol> {
    proptest::collection::btree_set(prop_oneof![Just("p".to_string()), Just("q".to_string()), Just("r".to_string())], 0..=3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_formulas_agree_with_evaluator(
        f in formula(),
        prefix in proptest::collection::vec(letter(), 0..=4),
        cycle in proptest::collection::vec(letter(), 1..=4),
    ) {
        let nba = translate_formula(&f).unwrap();
        prop_assert_eq!(nba.accepts_lasso(&prefix, &cycle).unwrap(), eval_lasso(&f, &prefix, &cycle).unwrap(), "{}", f);
    }

    #[test]
    fn nnf_preserves_meaning(
        f in formula(),
        prefix in proptest::collection::vec(letter(), 0..=3),
        cycle in proptest::collection::vec(letter(), 1..=3),
    ) {
        let g = f.to_nnf();
        prop_assert!(g.is_nnf());
        prop_assert_eq!(eval_lasso(&f, &prefix, &cycle).unwrap(), eval_lasso(&g, &prefix, &cycle).unwrap());
    }

    #[test]
    fn display_reparses(f in formula()) {
        prop_assert_eq!(parse_ltl_unchecked(&f.to_string()).unwrap(), f);
    }
}
