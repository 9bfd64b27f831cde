use gag_core::checks::unique_maximal_run;
use gag_core::engine::{
    apply_production, canonical_text, enabled_set, init_config, progress, replay, run_script, ApplyError, Case,
    MatchFailure, NodeEq, NodeId, Progress, RunError, ScriptStep, Status,
};
use gag_core::grammar::Gag;
use gag_core::terms::{Subst, Var};
use gag_core::textio::{fixtures, minsky};

#[test]
fn flatten_script_reproduces_every_reference_configuration() {
    let g = fixtures::flatten();
    let case = fixtures::default_case("flatten").unwrap();
    let script = fixtures::flatten_script();
    let gammas = fixtures::flatten_gammas();
    for (k, gamma) in gammas.iter().enumerate() {
        let (cfg, trace) = run_script(&g, &case, &script[..k]).unwrap();
        assert_eq!(canonical_text(&cfg), canonical_text(gamma), "after {k} steps");
        assert_eq!(trace.events.len(), k);
    }
    let (cfg, _) = run_script(&g, &case, &script).unwrap();
    let NodeEq::Open(consumer) = &cfg.nodes[&NodeId::central("Y0")] else { panic!("consumer closed") };
    assert_eq!(consumer.to_string(), "toor(Cons_a(Cons_b(Cons_c(Nil))))<>");
    assert_eq!(progress(&cfg, &g), Progress::TerminalOpen);
}

#[test]
fn coroutine_script_reaches_every_reference_configuration_and_closes() {
    let g = fixtures::coroutines();
    let case = fixtures::default_case("coroutines").unwrap();
    let script = fixtures::coroutine_script();
    for (k, gamma) in fixtures::coroutine_gammas() {
        let (cfg, _) = run_script(&g, &case, &script[..k]).unwrap();
        assert_eq!(canonical_text(&cfg), canonical_text(&gamma), "after {k} steps");
    }
    let (cfg, _) = run_script(&g, &case, &script).unwrap();
    assert_eq!(progress(&cfg, &g), Progress::Closed);
    for stop in ["X0_1_1_1", "X0_2_1_1"] {
        assert!(matches!(cfg.nodes[&NodeId::central(stop)], NodeEq::Closed { .. }));
    }
}

#[test]
fn occur_check_blocks_q_and_leaves_a_terminal_configuration() {
    let g = fixtures::occur_check();
    let mut cfg = init_config(&g, &Case::new("Start")).unwrap();
    let step = apply_production(&mut cfg, &g, "P", &NodeId::central("X0"), &Subst::new()).unwrap();
    let x = step.renaming.get(&Var::new("x")).and_then(|t| t.as_var()).unwrap().clone();

    let before = cfg.clone();
    let err = apply_production(&mut cfg, &g, "Q", &NodeId::central("X0_1"), &Subst::new()).unwrap_err();
    assert_eq!(err.code(), "TriggeredButCyclic");
    let ApplyError::NotEnabled { failure: MatchFailure::TriggeredButCyclic { cycle, .. }, .. } = err else {
        unreachable!()
    };
    assert!(cycle.cycle.contains(&x), "{cycle} should mention {x}");
    assert_eq!(cfg, before);
    assert_eq!(progress(&cfg, &g), Progress::TerminalOpen);

    let script = [ScriptStep::new(NodeId::central("X0"), "P"), ScriptStep::new(NodeId::central("X0_1"), "Q")];
    match run_script(&g, &Case::new("Start"), &script) {
        Err(RunError::Step(e)) => assert_eq!((e.index, e.error.code()), (1, "TriggeredButCyclic")),
        other => panic!("{other:?}"),
    }
}

fn status_at(g: &Gag, cfg: &gag_core::engine::Configuration, node: &str, prod: &str) -> Option<Status> {
    enabled_set(cfg, g).into_iter().find(|e| e.node.name == node && e.production == prod).map(|e| e.status)
}

#[test]
fn nondist_either_step_disables_the_other() {
    let g = fixtures::nondist();
    let mut gamma1 = init_config(&g, &Case::new("Start")).unwrap();
    apply_production(&mut gamma1, &g, "P", &NodeId::central("X0"), &Subst::new()).unwrap();
    assert_eq!(status_at(&g, &gamma1, "X0_1", "Q"), Some(Status::Enabled));
    assert_eq!(status_at(&g, &gamma1, "X0_2", "R"), Some(Status::Enabled));
    for (first, other, other_node) in [("Q", "R", "X0_2"), ("R", "Q", "X0_1")] {
        let node = if first == "Q" { "X0_1" } else { "X0_2" };
        let mut cfg = gamma1.clone();
        apply_production(&mut cfg, &g, first, &NodeId::central(node), &Subst::new()).unwrap();
        assert!(matches!(status_at(&g, &cfg, other_node, other), Some(Status::TriggeredOnly { .. })));
    }
}

#[test]
fn editorial_script_closes() {
    let g = fixtures::editorial();
    let (cfg, trace) =
        run_script(&g, &fixtures::default_case("editorial").unwrap(), &fixtures::editorial_script()).unwrap();
    assert_eq!(progress(&cfg, &g), Progress::Closed);
    assert_eq!(replay(&g, &trace).unwrap(), cfg);
}

#[test]
fn replay_reproduces_recorded_finals() {
    for (name, script) in [
        ("flatten", fixtures::flatten_script()),
        ("coroutines", fixtures::coroutine_script()),
        ("occur_check", fixtures::occur_check_script()),
    ] {
        let g = fixtures::by_name(name).unwrap();
        let (cfg, trace) = run_script(&g, &fixtures::default_case(name).unwrap(), &script).unwrap();
        assert_eq!(replay(&g, &trace).unwrap(), cfg, "{name}");
    }
}

#[test]
fn empty_script_gives_an_empty_trace() {
    let g = fixtures::flatten();
    let (cfg, trace) = run_script(&g, &Case::new("Init"), &[]).unwrap();
    assert!(trace.events.is_empty());
    assert_eq!(progress(&cfg, &g), Progress::Incomplete);
}

#[test]
fn terminating_minsky_program_closes() {
    let run = unique_maximal_run(&fixtures::minsky(None), &Case::new("Start"), 1_000).unwrap();
    assert_eq!(run.progress, Progress::Closed);
    // Two increments, two decrement/increment rounds moving r1 into r2, the zero test, the halt.
    assert_eq!(run.steps, 2 + 2 * 2 + 1 + 1);
}

#[test]
fn looping_minsky_program_hits_the_cap() {
    let g = fixtures::minsky(Some(&minsky::looping_program()));
    let run = unique_maximal_run(&g, &Case::new("Start"), 500).unwrap();
    assert_eq!((run.progress, run.steps), (Progress::Incomplete, 500));
}
