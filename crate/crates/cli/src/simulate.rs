use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::Args;
use gag_core::distribution::{simulate_trial, Partition, Policy, RunOptions, StopReason};
use gag_core::textio::{emit_partition, emit_trace, parse_partition};
use serde_json::json;

use crate::input;
use crate::output::Out;
use crate::{CaseArgs, Status};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    /// `partition L = {sorts};` lines; defaults to the grammar's own, then to one location.
    #[arg(long)]
    pub partition: Option<PathBuf>,
    /// Seed of the first trial; trial `k` uses `seed + k`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
    /// Events per trial before giving up on quiescence.
    #[arg(long, default_value_t = 10_000)]
    pub step_cap: usize,
    #[arg(long, default_value = "uniform")]
    pub policy: Policy,
    /// Fail unless every trial merges to the central run of its own decisions.
    #[arg(long)]
    pub against_central: bool,
}

pub fn simulate(out: &Out, args: &SimulateArgs) -> anyhow::Result<Status> {
    let g = match input::valid_grammar(&args.case.grammar)? {
        Ok(g) => g,
        Err(msg) => {
            eprintln!("{msg}");
            return Ok(Status::InvalidGrammar);
        }
    };
    let partition = match &args.partition {
        Some(path) => match parse_partition(&input::read(path)?) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("{}:{e}", path.display());
                return Ok(Status::Rejected);
            }
        },
        None => Partition::from_gag(&g).unwrap_or_else(|| Partition::single(&g, "local")),
    };
    if let Err(e) = partition.check(&g) {
        eprintln!("partition: {e}");
        return Ok(Status::Rejected);
    }
    let case = match input::case(&g, &args.case, None) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("{msg}");
            return Ok(Status::Rejected);
        }
    };
    out.block(&emit_partition(&partition));

    let mut trials = Vec::new();
    let mut finals = BTreeSet::new();
    let (mut agreeing, mut quiescent) = (0, 0);
    let mut conflicts = Vec::new();
    for k in 0..args.trials {
        let opts =
            RunOptions { seed: args.seed + k, policy: args.policy, step_cap: args.step_cap, check_integrity: false };
        let r = match simulate_trial(&g, &case, &partition, &opts, args.step_cap) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("seed {}: {e}", opts.seed);
                return Ok(Status::Rejected);
            }
        };
        let stop = match r.stop {
            StopReason::Quiescent => "quiescent",
            StopReason::StepCap => "step cap",
        };
        out.line(format!("seed {}: {stop} after {} events, {} undelivered", r.seed, r.steps, r.undelivered));
        match &r.merged {
            Ok(c) => {
                finals.insert(c.clone());
                for l in c.lines() {
                    out.line(format!("  {l}"));
                }
            }
            Err(e) => out.line(format!("  merge failed: {e}")),
        }
        if args.against_central {
            let verdict = match &r.central {
                Ok(_) if r.agrees() => out.mark("agrees with the central run", true),
                Ok(_) => out.mark("differs from the central run", false),
                Err(e) => out.mark(&format!("central replay failed: {e}"), false),
            };
            out.line(format!("  {verdict}"));
        }
        if let Some(c) = &r.remote_conflict {
            out.line(format!("  remote conflict: {c}"));
            conflicts.push(r.seed);
        }
        agreeing += usize::from(r.agrees());
        quiescent += usize::from(r.stop == StopReason::Quiescent);
        trials.push(json!({
            "seed": r.seed,
            "stop": r.stop,
            "steps": r.steps,
            "undelivered": r.undelivered,
            "merged": r.merged.as_ref().ok(),
            "merge_error": r.merged.as_ref().err().map(|e| e.to_string()),
            "central_error": r.central.as_ref().err().map(|e| e.to_string()),
            "agrees": r.agrees(),
            "remote_conflict": r.remote_conflict,
            "trace": emit_trace(&r.trace),
        }));
    }
    let n = args.trials;
    out.line(format!("summary: {n} trials, {quiescent} quiescent, {} distinct final configurations", finals.len()));
    if args.against_central {
        out.line(format!("central agreement: {agreeing}/{n}"));
    }
    let seeds: Vec<String> = conflicts.iter().map(u64::to_string).collect();
    out.line(format!("remote conflicts: {} ({})", conflicts.len(), seeds.join(", ")));
    out.json(&json!({
        "partition": partition,
        "case": case,
        "trials": trials,
        "quiescent": quiescent,
        "distinct_finals": finals.len(),
        "agree_with_central": agreeing,
        "remote_conflict_seeds": conflicts,
    }));
    Ok(if args.against_central && agreeing as u64 != n { Status::Unsettled } else { Status::Ok })
}
