use std::collections::{BTreeMap, BTreeSet};

use gag_core::analysis::{
    bounded_input_enabled_check, strong_acyclicity, witness_closes, AttrOcc, StaticReport, Verdict, Witness,
};
use gag_core::engine::Case;
use gag_core::grammar::Gag;
use gag_core::textio::fixtures;

type Pairs = BTreeSet<(usize, usize)>;

fn pairs(list: &[(usize, usize)]) -> Pairs {
    list.iter().copied().collect()
}

/// Relations worked out by hand, 0-based `(inh, syn)` for IS and `(syn, inh)` for SI.
fn expect_relations(r: &StaticReport, expected: &[(&str, &[(usize, usize)], &[(usize, usize)])]) {
    for (sort, si, is) in expected {
        assert_eq!(r.relations[*sort].si, pairs(si), "SI({sort})");
        assert_eq!(r.relations[*sort].is, pairs(is), "IS({sort})");
    }
    assert_eq!(r.relations.len(), expected.len());
}

fn witnesses(r: &StaticReport) -> &[Witness] {
    match &r.verdict {
        Verdict::NotStronglyAcyclic { witnesses } => witnesses,
        Verdict::StronglyAcyclic => panic!("expected a witness"),
    }
}

/// Edges of `G(s, P)` written out by hand: `SI(s)` from synthesized to inherited,
/// `IS(P)` from inherited to synthesized.
fn walk_closes(cycle: &[AttrOcc], edges: &BTreeSet<(AttrOcc, AttrOcc)>) -> bool {
    !cycle.is_empty() && (0..cycle.len()).all(|k| edges.contains(&(cycle[k], cycle[(k + 1) % cycle.len()])))
}

fn check_fixed_point(r: &StaticReport) {
    assert!(r.iterations <= r.bound, "{} iterations, bound {}", r.iterations, r.bound);
    assert_eq!(r.growth.len(), r.iterations + 1);
    assert!(r.growth.windows(2).all(|w| w[0] <= w[1]), "relations shrank: {:?}", r.growth);
    assert_eq!(r.growth[r.growth.len() - 2], r.growth[r.growth.len() - 1], "last sweep added pairs");
}

fn no_counterexample(g: &Gag, case: &Case, depth: usize) -> usize {
    let b = bounded_input_enabled_check(g, case, depth, 200_000).unwrap();
    assert!(b.counterexamples.is_empty(), "{:?}", b.counterexamples);
    b.states
}

#[test]
fn cyclic_but_input_enabled_grammar() {
    let g = fixtures::strict_cyclic();
    let r = strong_acyclicity(&g);
    check_fixed_point(&r);
    expect_relations(&r, &[("A", &[], &[(0, 0)]), ("B", &[(0, 0)], &[(0, 0), (0, 1)])]);
    let ws = witnesses(&r);
    assert_eq!(ws.len(), 1);
    let w = &ws[0];
    assert_eq!((w.sort.as_str(), w.production.as_str()), ("B", "Q"));
    let g_bq: BTreeSet<_> = [
        (AttrOcc::syn(0, 0), AttrOcc::inh(0, 0)),
        (AttrOcc::inh(0, 0), AttrOcc::syn(0, 0)),
        (AttrOcc::inh(0, 0), AttrOcc::syn(0, 1)),
    ]
    .into();
    assert!(walk_closes(&w.cycle, &g_bq), "{w}");
    assert!(witness_closes(&g, &r, w));
    no_counterexample(&g, &Case::new("Start"), 8);
}

#[test]
fn acyclic_but_not_strongly_acyclic_grammar() {
    let g = fixtures::strict_acyclic();
    let r = strong_acyclicity(&g);
    check_fixed_point(&r);
    expect_relations(&r, &[("A", &[], &[(0, 0)]), ("B", &[(0, 1), (1, 0)], &[(0, 0), (1, 1)])]);
    let ws = witnesses(&r);
    assert!(ws.iter().any(|w| w.production == "Q"));
    let g_bq: BTreeSet<_> = [
        (AttrOcc::syn(0, 0), AttrOcc::inh(0, 1)),
        (AttrOcc::syn(0, 1), AttrOcc::inh(0, 0)),
        (AttrOcc::inh(0, 0), AttrOcc::syn(0, 0)),
        (AttrOcc::inh(0, 1), AttrOcc::syn(0, 1)),
    ]
    .into();
    for w in ws {
        assert_eq!(w.sort, "B");
        assert!(walk_closes(&w.cycle, &g_bq), "{w}");
        assert!(witness_closes(&g, &r, w));
    }
    no_counterexample(&g, &Case::new("Start"), 8);
}

#[test]
fn flattening_grammar_is_strongly_acyclic() {
    let g = fixtures::flatten();
    let r = strong_acyclicity(&g);
    assert!(r.is_strongly_acyclic());
    check_fixed_point(&r);
    expect_relations(&r, &[("bin", &[], &[(0, 0)]), ("root", &[], &[]), ("toor", &[], &[])]);
    for case in [Case::new("Consumer"), Case::new("Init")] {
        no_counterexample(&g, &case, 4);
    }
}

#[test]
fn editorial_grammar_is_strongly_acyclic_and_the_search_agrees() {
    let g = fixtures::editorial();
    let r = strong_acyclicity(&g);
    assert!(r.is_strongly_acyclic(), "{:?}", r.verdict);
    check_fixed_point(&r);
    let states = no_counterexample(&g, &fixtures::default_case("editorial").unwrap(), 6);
    assert!(states > 20, "only {states} states explored");
}

#[test]
fn strong_acyclicity_implies_no_counterexample_on_every_fixture() {
    for name in fixtures::NAMES {
        let g = fixtures::by_name(name).unwrap();
        let r = strong_acyclicity(&g);
        check_fixed_point(&r);
        if r.is_strongly_acyclic() {
            no_counterexample(&g, &fixtures::default_case(name).unwrap(), 5);
        } else {
            assert!(witnesses(&r).iter().all(|w| witness_closes(&g, &r, w)), "{name}");
        }
    }
}

#[test]
fn nondist_counterexamples_after_either_branch() {
    let g = fixtures::nondist();
    assert!(!strong_acyclicity(&g).is_strongly_acyclic());
    let b = bounded_input_enabled_check(&g, &Case::new("Start"), 2, 1_000).unwrap();
    let found: BTreeMap<(String, String), usize> =
        b.counterexamples.iter().map(|c| ((c.production.clone(), c.node.name.clone()), c.depth)).collect();
    assert_eq!(found.get(&("R".into(), "N0_2".into())), Some(&2));
    assert_eq!(found.get(&("Q".into(), "N0_1".into())), Some(&2));
    assert_eq!(found.len(), 2);
}

/// Counterexample nodes carry their canonical names.
#[test]
fn occur_check_counterexample_at_depth_one() {
    let g = fixtures::occur_check();
    let b = bounded_input_enabled_check(&g, &Case::new("Start"), 1, 1_000).unwrap();
    let c = &b.counterexamples[0];
    assert_eq!((c.depth, c.production.as_str(), c.node.name.as_str()), (1, "Q", "N0_1"));
}

#[test]
fn search_budget_is_reported() {
    let g = fixtures::flatten();
    assert!(bounded_input_enabled_check(&g, &Case::new("Init"), 10, 5).is_err());
}
