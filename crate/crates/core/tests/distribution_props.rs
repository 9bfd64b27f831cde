use std::collections::BTreeSet;

use gag_core::checks::{collect_trials, commutation_trial, random_walk};
use gag_core::distribution::{
    deploy, scheduler_run, simulate_trial, DistributedState, Partition, Policy, RunOptions, StopReason,
};
use gag_core::engine::{apply_production, canonical_text, enabled_set, Case, NodeId, Trace};
use gag_core::grammar::Gag;
use gag_core::terms::Subst;
use gag_core::textio::{fixtures, parse_partition};
use rand::seq::IteratorRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fixture, case, and its two- and three-location partitions.
fn setups() -> Vec<(&'static str, Gag, Case, Vec<Partition>)> {
    let table: [(&str, [&str; 2]); 3] = [
        (
            "coroutines",
            [
                "partition left = {q0, q1, q2}; partition right = {q1', q2'};",
                "partition top = {q0}; partition ping = {q1, q2}; partition pong = {q1', q2'};",
            ],
        ),
        (
            "editorial",
            [
                "partition editor = {Submission, Decide, Evaluate, WaitReport}; partition reviewer = {ToReview, Review};",
                "partition editor = {Submission, Decide}; partition desk = {Evaluate, WaitReport}; \
                 partition reviewer = {ToReview, Review};",
            ],
        ),
        (
            "flatten",
            [
                "partition outer = {root, toor}; partition tree = {bin};",
                "partition producer = {root}; partition tree = {bin}; partition consumer = {toor};",
            ],
        ),
    ];
    table
        .into_iter()
        .map(|(name, ps)| {
            let g = fixtures::by_name(name).unwrap();
            let parts: Vec<Partition> = ps.iter().map(|src| parse_partition(src).unwrap()).collect();
            for p in &parts {
                p.check(&g).unwrap();
            }
            (name, g, fixtures::default_case(name).unwrap(), parts)
        })
        .collect()
}

fn located(g: &Gag, st: &DistributedState, cfg: &gag_core::engine::Configuration, node: &NodeId) -> (String, NodeId) {
    let loc = st.partition.location_of(&cfg.sort_of(g, node).unwrap()).unwrap().to_string();
    (loc.clone(), NodeId::in_ns(node.name.clone(), loc))
}

fn enabled_names(entries: impl IntoIterator<Item = gag_core::engine::EnabledEntry>) -> BTreeSet<(String, String)> {
    entries.into_iter().filter(|e| e.is_enabled()).map(|e| (e.node.name, e.production)).collect()
}

#[test]
fn one_local_step_plus_its_messages_is_one_central_step() {
    for (name, g, case, parts) in setups() {
        for p in &parts {
            let mut steps = 0;
            for seed in 0..15 {
                for cfg in random_walk(&g, &case, 10, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap() {
                    let st = deploy(&g, &cfg, p).unwrap();
                    let central = enabled_names(enabled_set(&cfg, &g));
                    let local = enabled_names(st.locals.keys().flat_map(|l| st.enabled(&g, l).unwrap()));
                    assert_eq!(central, local, "{name}: enabled sets differ");
                    for (node, prod) in &central {
                        let node = NodeId::central(node.clone());
                        let mut expected = cfg.clone();
                        apply_production(&mut expected, &g, prod, &node, &Subst::new()).unwrap();
                        let mut st = st.clone();
                        let (loc, local_node) = located(&g, &st, &cfg, &node);
                        st.local_apply(&g, &loc, prod, &local_node, &Subst::new()).unwrap();
                        st.drain(10_000).unwrap();
                        assert!(st.in_flight.is_empty());
                        st.check_integrity().unwrap();
                        assert_eq!(
                            canonical_text(&st.merge().unwrap()),
                            canonical_text(&expected),
                            "{name}: {prod} at {node}"
                        );
                        steps += 1;
                    }
                }
            }
            assert!(steps > 50, "{name}: only {steps} steps compared");
        }
    }
}

#[test]
fn interleavings_of_remote_steps_close_the_diagram() {
    for (name, g, case, parts) in setups() {
        // Coroutines never enable two nodes at once; flatten enables Root only before any bin exists.
        if name != "editorial" {
            continue;
        }
        for p in &parts {
            let trials = collect_trials(100, 20_000, |seed| commutation_trial(&g, &case, p, seed, 10)).unwrap();
            assert_eq!(trials.len(), 100, "{name}: too few remote pairs");
        }
    }
}

#[test]
fn delivery_order_does_not_matter() {
    for (name, g, case, parts) in setups() {
        for p in &parts {
            for seed in 0..40 {
                let mut st = deploy(&g, &gag_core::engine::init_config(&g, &case).unwrap(), p).unwrap();
                let mut trace = Trace::new(case.clone());
                let cap = 1 + (seed as usize * 7) % 25;
                let opts = RunOptions { seed, step_cap: cap, check_integrity: true, ..RunOptions::default() };
                scheduler_run(&g, &mut st, &mut trace, &opts).unwrap();
                let folded = canonical_text(&st.merge().unwrap());

                let mut oldest = st.clone();
                oldest.drain(10_000).unwrap();
                let mut shuffled = st.clone();
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
                while let Some(id) = shuffled.in_flight.keys().choose(&mut rng).cloned() {
                    shuffled.deliver(&id).unwrap();
                    shuffled.check_integrity().unwrap();
                    // Merging folds in-flight messages, so every intermediate state merges alike.
                    assert_eq!(canonical_text(&shuffled.merge().unwrap()), folded, "{name} seed {seed}");
                }
                assert_eq!(canonical_text(&oldest.merge().unwrap()), folded, "{name} seed {seed}");
                assert_eq!(canonical_text(&shuffled.merge().unwrap()), folded, "{name} seed {seed}");
            }
        }
    }
}

#[test]
fn seeded_runs_match_the_central_run_of_their_decisions() {
    for (name, g, case, parts) in setups() {
        for p in &parts {
            for seed in 0..60 {
                let policy = if seed % 2 == 0 { Policy::Uniform } else { Policy::RoundRobin };
                let opts = RunOptions { seed, policy, step_cap: 5_000, check_integrity: true };
                let r = simulate_trial(&g, &case, p, &opts, 1_000).unwrap();
                assert_eq!(r.stop, StopReason::Quiescent, "{name} seed {seed}");
                assert_eq!(r.undelivered, 0);
                assert!(r.agrees(), "{name} seed {seed}: {:?} vs {:?}", r.merged, r.central);
                assert!(r.remote_conflict.is_none());
            }
        }
    }
}

#[test]
fn same_seed_same_run() {
    let g = fixtures::editorial();
    let case = fixtures::default_case("editorial").unwrap();
    let p = Partition::from_gag(&g).unwrap();
    let opts = RunOptions { seed: 7, ..RunOptions::default() };
    let a = simulate_trial(&g, &case, &p, &opts, 1_000).unwrap();
    let b = simulate_trial(&g, &case, &p, &opts, 1_000).unwrap();
    assert_eq!(a, b);
}
