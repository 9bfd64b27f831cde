use std::collections::BTreeSet;

use gag_core::terms::{compose, match_term, solve, unify, SolveError, Subst, Term, Var};
use proptest::prelude::*;

const VARS: [&str; 4] = ["x", "y", "z", "w"];

fn term(depth: u32) -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        prop::sample::select(VARS.to_vec()).prop_map(Term::var),
        Just(Term::cst("a")),
        Just(Term::cst("b")),
    ];
    leaf.prop_recursive(depth, 16, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|t| Term::app("g", vec![t])),
            (inner.clone(), inner).prop_map(|(l, r)| Term::app("f", vec![l, r])),
        ]
    })
}

fn subst() -> impl Strategy<Value = Subst> {
    prop::collection::vec((prop::sample::select(VARS.to_vec()), term(2)), 0..4)
        .prop_map(|pairs| pairs.into_iter().map(|(x, t)| (Var::new(x), t)).collect())
}

/// Ground terms of depth at most two over `a`, `b`, `g`, `f`.
fn small_ground_terms() -> Vec<Term> {
    let base = vec![Term::cst("a"), Term::cst("b")];
    let mut out = base.clone();
    for t in &base {
        out.push(Term::app("g", vec![t.clone()]));
        for u in &base {
            out.push(Term::app("f", vec![t.clone(), u.clone()]));
        }
    }
    out
}

fn all_ground_substs(vars: &[Var], pool: &[Term]) -> Vec<Subst> {
    let mut acc = vec![Subst::new()];
    for v in vars {
        let mut next = Vec::new();
        for s in &acc {
            for t in pool {
                let mut s = s.clone();
                s.insert(v.clone(), t.clone());
                next.push(s);
            }
        }
        acc = next;
    }
    acc
}

fn is_linear(t: &Term) -> bool {
    let occ = t.var_occurrences();
    let distinct: BTreeSet<&Var> = occ.iter().map(|(_, v)| v).collect();
    distinct.len() == occ.len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn match_is_sound_and_finds_instances(p in term(3), s in subst()) {
        prop_assume!(is_linear(&p));
        let data = p.apply(&s);
        let m = match_term(&p, &data);
        prop_assert!(m.is_ok(), "{p} should match its instance {data}: {m:?}");
        let m = m.unwrap();
        prop_assert_eq!(p.apply(&m), data);
        prop_assert!(m.domain().is_subset(&p.vars()));
    }

    #[test]
    fn any_match_is_an_instance(p in term(3), d in term(3)) {
        prop_assume!(is_linear(&p));
        if let Ok(m) = match_term(&p, &d) {
            prop_assert_eq!(p.apply(&m), d);
        }
    }

    #[test]
    fn unify_agrees_with_ground_enumeration(goals in prop::collection::vec((term(2), term(2)), 1..3)) {
        let vars: Vec<Var> = goals
            .iter()
            .flat_map(|(l, r)| l.vars().into_iter().chain(r.vars()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        prop_assume!(vars.len() <= 3);
        let unifies = |s: &Subst| goals.iter().all(|(l, r)| l.apply(s) == r.apply(s));
        let ground: Vec<Subst> = all_ground_substs(&vars, &small_ground_terms()).into_iter().filter(unifies).collect();
        match unify(&goals) {
            Ok(mgu) => {
                prop_assert!(unifies(&mgu), "{mgu} does not unify");
                prop_assert!(mgu.is_solved(), "{mgu} is not idempotent");
                // Most general: every ground unifier factors through the mgu.
                for theta in &ground {
                    for v in &vars {
                        prop_assert_eq!(Term::from_var(v.clone()).apply(&mgu).apply(theta), Term::from_var(v.clone()).apply(theta));
                    }
                }
            }
            Err(e) => prop_assert!(ground.is_empty(), "unify failed ({e}) but {} ground unifiers exist", ground.len()),
        }
    }

    #[test]
    fn solve_ignores_equation_order(
        eqs in prop::collection::btree_map(prop::sample::select(VARS.to_vec()), term(2), 0..4),
        seed in any::<u64>(),
    ) {
        let eqs: Vec<(Var, Term)> = eqs.into_iter().map(|(x, t)| (Var::new(x), t)).collect();
        let mut shuffled = eqs.clone();
        // Deterministic rotation driven by the seed.
        if !shuffled.is_empty() {
            let k = (seed % shuffled.len() as u64) as usize;
            shuffled.rotate_left(k);
            if seed & 1 == 1 {
                shuffled.reverse();
            }
        }
        match (solve(&eqs), solve(&shuffled)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(&a, &b);
                prop_assert!(a.is_solved());
                for (x, t) in &eqs {
                    prop_assert_eq!(Term::from_var(x.clone()).apply(&a), t.apply(&a));
                }
            }
            (Err(SolveError::Cyclic(_)), Err(SolveError::Cyclic(_))) => {}
            (a, b) => prop_assert!(false, "orders disagree: {a:?} vs {b:?}"),
        }
    }

    #[test]
    fn compose_is_sequential_application(
        a in prop::collection::btree_map(prop::sample::select(VARS.to_vec()), term(2), 0..3),
        b in prop::collection::btree_map(prop::sample::select(VARS.to_vec()), term(2), 0..3),
        t in term(3),
    ) {
        let mk = |m: std::collections::BTreeMap<&str, Term>| solve(&m.into_iter().map(|(x, t)| (Var::new(x), t)).collect::<Vec<_>>());
        let (Ok(s1), Ok(s2)) = (mk(a), mk(b)) else { return Ok(()) };
        if let Ok(c) = compose(&s1, &s2) {
            prop_assert!(c.is_solved());
            let seq = t.apply(&s1).apply(&s2);
            // The raw composition may bind into its own domain; compose closes it, so
            // sequential application agrees once the result is applied again.
            prop_assert_eq!(t.apply(&c), seq.apply(&c));
            if s2.iter().all(|(_, u)| u.vars().is_disjoint(&s1.domain())) {
                prop_assert_eq!(t.apply(&c), seq);
            }
        }
        prop_assert_eq!(compose(&s1, &Subst::new()).unwrap(), s1.clone());
        prop_assert_eq!(t.apply(&Subst::new()), t);
    }
}
