use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use gag_core::engine::canonical_text;
use gag_core::textio::{fixtures, parse_config, parse_trace};
use serde_json::Value;
use tempfile::TempDir;

fn gag() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gag"));
    c.env("GAG_COLOR", "never");
    c
}

fn run(args: &[&str]) -> Output {
    gag().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

/// A directory holding every built-in file.
fn fixture_dir() -> TempDir {
    let dir = TempDir::new().unwrap();
    let o = run(&["fixtures", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    dir
}

fn at(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn write(dir: &TempDir, name: &str, contents: &str) -> String {
    std::fs::write(dir.path().join(name), contents).unwrap();
    at(dir, name)
}

#[test]
fn fixtures_are_written_and_match_the_built_ins() {
    let dir = fixture_dir();
    for name in fixtures::NAMES {
        let on_disk = std::fs::read_to_string(dir.path().join(format!("{name}.gag"))).unwrap();
        assert_eq!(on_disk, fixtures::source(name).unwrap());
    }
    assert!(dir.path().join("flatten_gamma6.gagc").exists());
    assert!(dir.path().join("editorial.gags").exists());
}

#[test]
fn check_exit_codes() {
    let dir = fixture_dir();
    for (name, expected) in [
        ("flatten", 0),
        ("editorial", 0),
        ("coroutines", 0),
        ("strict_acyclic", 3),
        ("strict_cyclic", 3),
        ("nondist", 3),
    ] {
        let o = run(&["check", &at(&dir, &format!("{name}.gag"))]);
        assert_eq!(code(&o), expected, "{name}\n{}", stdout(&o));
        if expected == 3 {
            assert!(stdout(&o).contains("\nwitness "), "{name} report lacks a witness");
        }
    }
    let o = run(&["check", "--no-static", &at(&dir, "strict_acyclic.gag")]);
    assert_eq!(code(&o), 0);
    assert!(!stdout(&o).contains("verdict"));

    let dup = write(&dir, "dup.gag", "format 1\n\nsort A(inh=2, syn=1);\n\nprod P: A(x, x)<y>;\n");
    let o = run(&["check", &dup]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("DuplicateInputOccurrence(x)"), "{}", stdout(&o));
    let broken = write(&dir, "broken.gag", "sort (");
    assert_eq!(code(&run(&["check", &broken])), 2);
}

#[test]
fn check_reports_json() {
    let dir = fixture_dir();
    let o = run(&["--format", "json", "check", &at(&dir, "strict_acyclic.gag")]);
    assert_eq!(code(&o), 3);
    let v = json(&o);
    assert_eq!(v["static"]["verdict"]["status"], "not-strongly-acyclic");
    assert!(!v["static"]["verdict"]["witnesses"].as_array().unwrap().is_empty());
    let o =
        run(&["--format", "json", "check", &write(&dir, "dup.gag", "sort A(inh=2, syn=1);\nprod P: A(x, x)<y>;\n")]);
    assert_eq!(json(&o)["violations"][0]["violation"]["kind"]["kind"], "DuplicateInputOccurrence");
}

#[test]
fn flatten_script_reaches_the_last_reference_configuration() {
    let dir = fixture_dir();
    let out = at(&dir, "out.gagt");
    let o = run(&[
        "--format",
        "json",
        "run",
        &at(&dir, "flatten.gag"),
        "--case",
        "Consumer",
        "--script",
        &at(&dir, "flatten.gags"),
        "-o",
        &out,
    ]);
    assert_eq!(code(&o), 4, "the consumer stays open");
    let v = json(&o);
    let g = fixtures::flatten();
    let cfg = parse_config(&g, v["config"].as_str().unwrap()).unwrap();
    assert_eq!(canonical_text(&cfg), canonical_text(&fixtures::flatten_gammas()[6]));
    assert_eq!(v["steps"], 6);
    let trace = parse_trace(&g, &std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(gag_core::engine::replay(&g, &trace).unwrap(), cfg);
}

#[test]
fn occur_check_run_is_terminal_then_rejected() {
    let dir = fixture_dir();
    let g = at(&dir, "occur_check.gag");
    let o = run(&["run", &g, "--script", &at(&dir, "occur_check.gags")]);
    assert_eq!(code(&o), 4);
    assert!(stdout(&o).contains("progress terminal-open"));
    assert!(dir.path().join("occur_check.gagt").exists());

    let both = write(&dir, "both.gags", "apply X0 P\napply X0_1 Q\n");
    let o = run(&["--format", "json", "run", &g, "--script", &both]);
    assert_eq!(code(&o), 5);
    let v = json(&o);
    assert_eq!(v["rejected"]["code"], "TriggeredButCyclic");
    assert_eq!(v["rejected"]["index"], 1);
    assert_eq!(v["steps"], 1);
}

#[test]
fn empty_script_and_bad_inputs() {
    let dir = fixture_dir();
    let flatten = at(&dir, "flatten.gag");
    let empty = write(&dir, "empty.gags", "");
    let o = run(&["--format", "json", "run", &flatten, "--script", &empty]);
    assert_eq!(code(&o), 6, "Init has enabled steps left");
    assert_eq!(json(&o)["steps"], 0);
    let trace = std::fs::read_to_string(dir.path().join("empty.gagt")).unwrap();
    assert!(parse_trace(&fixtures::flatten(), &trace).unwrap().events.is_empty());

    assert_eq!(code(&run(&["run", &flatten, "--case", "Nope"])), 5);
    let editorial = at(&dir, "editorial.gag");
    assert_eq!(code(&run(&["run", &editorial])), 5, "Submit needs its article");
    assert_eq!(code(&run(&["run", &editorial, "--closing", "article = art"])), 6);
    assert_eq!(code(&run(&["run", "/nonexistent.gag"])), 1);
    assert_eq!(code(&run(&["run"])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
}

#[test]
fn editorial_script_closes_with_bindings() {
    let dir = fixture_dir();
    let o = run(&[
        "run",
        &at(&dir, "editorial.gag"),
        "--closing",
        "{article = art}",
        "--script",
        &at(&dir, "editorial.gags"),
    ]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("X0_3 = MakeDecision"));
}

fn interactive(grammar: impl AsRef<Path>, args: &[&str], input: &str) -> Output {
    let mut child = gag()
        .arg("run")
        .arg(grammar.as_ref())
        .arg("--interactive")
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

#[test]
fn interactive_prompt_reads_steps_and_parameters() {
    let dir = fixture_dir();
    let g = write(&dir, "param.gag", "ctor A/0;\nsort s(inh=0, syn=1);\nprod P: s()<d>;\nservice S: s()<d>;\n");
    let out = at(&dir, "param.gagt");
    let o = interactive(&g, &["-o", &out], "7\n1\nB(\nA\n");
    let text = stdout(&o);
    assert_eq!(code(&o), 0, "{text}");
    assert!(text.contains("[1] P at X0"));
    assert!(text.contains("no step numbered `7`"));
    assert!(text.contains("d = "));
    assert!(text.contains("applied P at X0"));
    assert!(text.contains("X0 = P"));
    let trace = std::fs::read_to_string(&out).unwrap();
    assert!(trace.contains("apply X0 P with {d = A}"), "{trace}");

    // End of input stops the prompt; the partial run is reported.
    let o = interactive(at(&dir, "flatten.gag"), &["--case", "Init"], "");
    assert_eq!(code(&o), 6);
    let o = interactive(at(&dir, "flatten.gag"), &["--case", "Init"], "2\n");
    assert_eq!(code(&o), 0, "Leaf_a closes the only node");
}

#[test]
fn coroutine_simulation_agrees_with_the_central_run() {
    let dir = fixture_dir();
    let part = write(&dir, "co.part", "partition left = {q0, q1, q2};\npartition right = {q1', q2'};\n");
    let args = [
        "simulate",
        &at(&dir, "coroutines.gag"),
        "--partition",
        &part,
        "--trials",
        "50",
        "--seed",
        "3",
        "--against-central",
    ];
    let o = run(&args);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("central agreement: 50/50"), "{text}");
    assert_eq!(run(&args).stdout, o.stdout, "same seed, same bytes");
}

#[test]
fn one_location_simulation_matches_run() {
    let dir = fixture_dir();
    let grammar = at(&dir, "coroutines.gag");
    let part = write(&dir, "one.part", "partition all = {q0, q1, q2, q1', q2'};\n");
    let o = run(&["--format", "json", "simulate", &grammar, "--partition", &part, "--seed", "11"]);
    assert_eq!(code(&o), 0);
    let trial = &json(&o)["trials"][0];
    let trace = write(&dir, "sim.gagt", trial["trace"].as_str().unwrap());
    let r = run(&["--format", "json", "run", &grammar, "--script", &trace]);
    assert_eq!(code(&r), 0);
    let g = fixtures::coroutines();
    let cfg = parse_config(&g, json(&r)["config"].as_str().unwrap()).unwrap();
    assert_eq!(trial["merged"].as_str().unwrap(), canonical_text(&cfg));
}

#[test]
fn nondist_simulation_lists_remote_conflicts() {
    let dir = fixture_dir();
    let o = run(&[
        "--format",
        "json",
        "simulate",
        &at(&dir, "nondist.gag"),
        "--trials",
        "20",
        "--step-cap",
        "200",
        "--against-central",
    ]);
    assert_eq!(code(&o), 6);
    let v = json(&o);
    let seeds = v["remote_conflict_seeds"].as_array().unwrap();
    assert!(!seeds.is_empty());
    for s in seeds {
        let t = &v["trials"][s.as_u64().unwrap() as usize];
        assert!(t["remote_conflict"].as_str().unwrap().contains("triggered but not enabled"), "{t}");
    }
    let bad = write(&dir, "bad.part", "partition L1 = {s};\n");
    assert_eq!(code(&run(&["simulate", &at(&dir, "nondist.gag"), "--partition", &bad])), 5);
}
