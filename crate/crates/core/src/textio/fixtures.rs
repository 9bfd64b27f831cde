//! Built-in grammars, cases, scripts and reference configurations.

use super::minsky::{default_program, minsky_encode, Instr};
use super::{parse_config, parse_gag, print_gag};
use crate::engine::{Case, Configuration, NodeId, ScriptStep};
use crate::grammar::Gag;
use crate::terms::{Subst, Term, Var};

pub const FLATTEN: &str = include_str!("../../fixtures/flatten.gag");
pub const COROUTINES: &str = include_str!("../../fixtures/coroutines.gag");
pub const OCCUR_CHECK: &str = include_str!("../../fixtures/occur_check.gag");
pub const NONDIST: &str = include_str!("../../fixtures/nondist.gag");
pub const STRICT_CYCLIC: &str = include_str!("../../fixtures/strict_cyclic.gag");
pub const STRICT_ACYCLIC: &str = include_str!("../../fixtures/strict_acyclic.gag");
pub const EDITORIAL: &str = include_str!("../../fixtures/editorial.gag");

/// Flattening configurations `Γ0` to `Γ6`, written with the original node names.
pub const FLATTEN_GAMMAS: [&str; 7] = [
    include_str!("../../fixtures/flatten_gamma0.gagc"),
    include_str!("../../fixtures/flatten_gamma1.gagc"),
    include_str!("../../fixtures/flatten_gamma2.gagc"),
    include_str!("../../fixtures/flatten_gamma3.gagc"),
    include_str!("../../fixtures/flatten_gamma4.gagc"),
    include_str!("../../fixtures/flatten_gamma5.gagc"),
    include_str!("../../fixtures/flatten_gamma6.gagc"),
];

/// Coroutine configurations reached after the given number of script steps.
pub const COROUTINE_GAMMAS: [(usize, &str); 6] = [
    (1, include_str!("../../fixtures/coroutines_gamma1.gagc")),
    (2, include_str!("../../fixtures/coroutines_gamma2.gagc")),
    (3, include_str!("../../fixtures/coroutines_gamma3.gagc")),
    (5, include_str!("../../fixtures/coroutines_gamma5.gagc")),
    (6, include_str!("../../fixtures/coroutines_gamma6.gagc")),
    (7, include_str!("../../fixtures/coroutines_gamma7.gagc")),
];

pub const NAMES: [&str; 8] =
    ["flatten", "coroutines", "occur_check", "nondist", "strict_cyclic", "strict_acyclic", "editorial", "minsky"];

fn load(src: &str, name: &str) -> Gag {
    parse_gag(src).unwrap_or_else(|e| panic!("built-in fixture {name}: {e}"))
}

pub fn flatten() -> Gag {
    load(FLATTEN, "flatten")
}

pub fn coroutines() -> Gag {
    load(COROUTINES, "coroutines")
}

pub fn occur_check() -> Gag {
    load(OCCUR_CHECK, "occur_check")
}

pub fn nondist() -> Gag {
    load(NONDIST, "nondist")
}

pub fn strict_cyclic() -> Gag {
    load(STRICT_CYCLIC, "strict_cyclic")
}

pub fn strict_acyclic() -> Gag {
    load(STRICT_ACYCLIC, "strict_acyclic")
}

pub fn editorial() -> Gag {
    load(EDITORIAL, "editorial")
}

/// Encoding of `program`, or of the default five-instruction program.
pub fn minsky(program: Option<&[Instr]>) -> Gag {
    let default = default_program();
    minsky_encode(program.unwrap_or(&default)).expect("valid program")
}

/// Grammar source for a fixture name; `minsky` prints the default program's encoding.
pub fn source(name: &str) -> Option<String> {
    Some(match name {
        "flatten" => FLATTEN.into(),
        "coroutines" => COROUTINES.into(),
        "occur_check" => OCCUR_CHECK.into(),
        "nondist" => NONDIST.into(),
        "strict_cyclic" => STRICT_CYCLIC.into(),
        "strict_acyclic" => STRICT_ACYCLIC.into(),
        "editorial" => EDITORIAL.into(),
        "minsky" => print_gag(&minsky(None)),
        _ => return None,
    })
}

pub fn by_name(name: &str) -> Option<Gag> {
    source(name).map(|s| load(&s, name))
}

/// The case each fixture is usually run with.
pub fn default_case(name: &str) -> Option<Case> {
    Some(match name {
        "flatten" => Case::new("Consumer"),
        "editorial" => Case::with_closing("Submit", Subst::singleton(Var::new("article"), Term::cst("art"))),
        "coroutines" | "occur_check" | "nondist" | "strict_cyclic" | "strict_acyclic" | "minsky" => Case::new("Start"),
        _ => return None,
    })
}

fn steps(list: &[(&str, &str)]) -> Vec<ScriptStep> {
    list.iter().map(|(n, p)| ScriptStep::new(NodeId::central(*n), *p)).collect()
}

/// The six refinements leading from `Γ0` to `Γ6`.
pub fn flatten_script() -> Vec<ScriptStep> {
    steps(&[
        ("X0", "Root"),
        ("X0_1", "Fork"),
        ("X0_1_2", "Leaf_c"),
        ("X0_1_1", "Fork"),
        ("X0_1_1_1", "Leaf_a"),
        ("X0_1_1_2", "Leaf_b"),
    ])
}

/// Two messages and an acknowledgement, then `!stop`/`?stop`.
pub fn coroutine_script() -> Vec<ScriptStep> {
    steps(&[
        ("X0", "Par"),
        ("X0_1", "!a"),
        ("X0_2", "?a"),
        ("X0_2_1", "!b"),
        ("X0_1_1", "?b"),
        ("X0_1_1_1", "!stop"),
        ("X0_2_1_1", "?stop"),
    ])
}

/// A full editorial case: one reviewer declines, the other accepts and reports.
pub fn editorial_script() -> Vec<ScriptStep> {
    let b = |pairs: &[(&str, Term)]| Subst::from_pairs(pairs.iter().map(|(x, t)| (Var::new(*x), t.clone())));
    let step =
        |n: &str, p: &str, bindings: Subst| ScriptStep { node: NodeId::central(n), production: p.into(), bindings };
    vec![
        step("X0", "DecideSubmission", Subst::new()),
        step("X0_1", "AskReview", b(&[("reviewer", Term::cst("r1"))])),
        step("X0_2", "AskReview", b(&[("reviewer", Term::cst("r2"))])),
        step("X0_1_2", "Decline", b(&[("msg", Term::cst("Reject"))])),
        step("X0_1_1", "CaseNo", Subst::new()),
        step("X0_2_2", "Accept", b(&[("msg", Term::cst("Accept"))])),
        step("X0_2_2_1", "MakeReview", b(&[("report", Term::cst("Accept"))])),
        step("X0_2_1", "CaseYes", Subst::new()),
        step("X0_1_1_1", "AskReview", b(&[("reviewer", Term::cst("r2"))])),
        step("X0_1_1_1_2", "Decline", b(&[("msg", Term::cst("Reject"))])),
        step("X0_1_1_1_1", "CaseNo", Subst::new()),
        step("X0_1_1_1_1_1", "AskReview", b(&[("reviewer", Term::cst("r1"))])),
        step("X0_1_1_1_1_1_2", "Accept", b(&[("msg", Term::cst("Accept"))])),
        step("X0_1_1_1_1_1_2_1", "MakeReview", b(&[("report", Term::cst("Reject"))])),
        step("X0_1_1_1_1_1_1", "CaseYes", Subst::new()),
        step("X0_3", "MakeDecision", b(&[("decision", Term::cst("Accept"))])),
    ]
}

/// `[P/X0]` reaches the configuration where `Q` at `X0_1` fails the occur check.
pub fn occur_check_script() -> Vec<ScriptStep> {
    steps(&[("X0", "P")])
}

pub fn flatten_gammas() -> Vec<Configuration> {
    let g = flatten();
    FLATTEN_GAMMAS.iter().map(|src| parse_config(&g, src).expect("flatten reference")).collect()
}

pub fn coroutine_gammas() -> Vec<(usize, Configuration)> {
    let g = coroutines();
    COROUTINE_GAMMAS.iter().map(|(k, src)| (*k, parse_config(&g, src).expect("coroutine reference"))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::validate;

    #[test]
    fn every_fixture_parses_and_validates() {
        for name in NAMES {
            let g = by_name(name).unwrap();
            assert_eq!(validate(&g), vec![], "{name}");
            assert!(default_case(name).is_some());
        }
    }

    #[test]
    fn golden_sources_are_printer_output() {
        for name in NAMES {
            let src = source(name).unwrap();
            assert_eq!(print_gag(&parse_gag(&src).unwrap()), src, "{name}");
        }
    }
}
