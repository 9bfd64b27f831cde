use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{deploy, DistError, DistributedState, LocalStep, MergeError, Partition};
use crate::engine::{
    apply_production, canonical_text, init_config, ApplyError, Case, Configuration, EngineError, Event, MatchFailure,
    NodeId, ReplayError, Trace,
};
use crate::grammar::Gag;
use crate::terms::{Subst, Term};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Uniform over every legal event at every location.
    #[default]
    Uniform,
    /// Cycle through locations, uniform over the events of the current one.
    RoundRobin,
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uniform" => Ok(Policy::Uniform),
            "round-robin" => Ok(Policy::RoundRobin),
            _ => Err(format!("unknown policy `{s}` (expected uniform or round-robin)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub seed: u64,
    pub policy: Policy,
    pub step_cap: usize,
    /// Run the integrity walk after every event.
    pub check_integrity: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { seed: 0, policy: Policy::Uniform, step_cap: 10_000, check_integrity: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Quiescent,
    StepCap,
}

enum Choice {
    Apply { location: String, node: NodeId, production: String },
    Deliver(String),
}

fn choices_at(g: &Gag, state: &DistributedState, location: &str, out: &mut Vec<Choice>) {
    for e in super::enabled_set(&state.locals[location].config, g) {
        if e.is_enabled() && (e.parameters.is_empty() || has_constants(g)) {
            out.push(Choice::Apply { location: location.to_string(), node: e.node, production: e.production });
        }
    }
    for m in state.in_flight.values().filter(|m| m.to == location) {
        out.push(Choice::Deliver(m.id.clone()));
    }
}

fn has_constants(g: &Gag) -> bool {
    g.symbols.values().any(|s| s.arity == 0)
}

/// Parameters get constants of the grammar, drawn uniformly.
fn pick_bindings(g: &Gag, production: &str, rng: &mut ChaCha8Rng) -> Subst {
    let constants: Vec<&str> = g.symbols.values().filter(|s| s.arity == 0).map(|s| s.name.as_str()).collect();
    let Some(p) = g.production(production) else {
        return Subst::new();
    };
    p.parameters().into_iter().map(|x| (x, Term::cst(constants[rng.gen_range(0..constants.len())]))).collect()
}

/// Apply locally and append the event to `trace`.
pub fn apply_recorded(
    g: &Gag,
    state: &mut DistributedState,
    trace: &mut Trace,
    location: &str,
    production: &str,
    node: &NodeId,
    bindings: &Subst,
) -> Result<LocalStep, DistError> {
    let step = state.local_apply(g, location, production, node, bindings)?;
    trace.events.push(Event::Applied {
        node: node.clone(),
        production: production.to_string(),
        bindings: bindings.clone(),
        sigma_in: Some(step.matched.sigma_in.clone()),
        sigma_out: Some(step.matched.sigma_out.clone()),
        emitted: step.emitted.clone(),
    });
    Ok(step)
}

/// Deliver one message and append the event to `trace`.
pub fn deliver_recorded(state: &mut DistributedState, trace: &mut Trace, id: &str) -> Result<Vec<String>, DistError> {
    let emitted = state.deliver(id)?;
    trace.events.push(Event::Delivered { message: id.to_string(), emitted: emitted.clone() });
    Ok(emitted)
}

/// Deliver oldest messages first until none is in flight or `cap` deliveries were made.
pub fn drain_recorded(state: &mut DistributedState, trace: &mut Trace, cap: usize) -> Result<usize, DistError> {
    let mut n = 0;
    while n < cap {
        let Some(id) = state.in_flight.keys().next().cloned() else {
            break;
        };
        deliver_recorded(state, trace, &id)?;
        n += 1;
    }
    Ok(n)
}

/// Run seeded random events until quiescence or `step_cap` events.
pub fn scheduler_run(
    g: &Gag,
    state: &mut DistributedState,
    trace: &mut Trace,
    opts: &RunOptions,
) -> Result<(StopReason, usize), DistError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let locations: Vec<String> = state.locals.keys().cloned().collect();
    let mut pointer = 0;
    for steps in 0..opts.step_cap {
        let mut choices = Vec::new();
        match opts.policy {
            Policy::Uniform => {
                for l in &locations {
                    choices_at(g, state, l, &mut choices);
                }
            }
            Policy::RoundRobin => {
                for k in 0..locations.len() {
                    let i = (pointer + k) % locations.len();
                    choices_at(g, state, &locations[i], &mut choices);
                    if !choices.is_empty() {
                        pointer = (i + 1) % locations.len();
                        break;
                    }
                }
            }
        }
        if choices.is_empty() {
            return Ok((StopReason::Quiescent, steps));
        }
        match choices.swap_remove(rng.gen_range(0..choices.len())) {
            Choice::Apply { location, node, production } => {
                let bindings = pick_bindings(g, &production, &mut rng);
                apply_recorded(g, state, trace, &location, &production, &node, &bindings)?;
            }
            Choice::Deliver(id) => {
                deliver_recorded(state, trace, &id)?;
            }
        }
        if opts.check_integrity {
            state.check_integrity().map_err(DistError::Integrity)?;
        }
    }
    let mut left = Vec::new();
    for l in &locations {
        choices_at(g, state, l, &mut left);
    }
    let stop = if left.is_empty() { StopReason::Quiescent } else { StopReason::StepCap };
    Ok((stop, opts.step_cap))
}

/// Replay the applications of a distributed trace in one central configuration.
pub fn central_replay(g: &Gag, trace: &Trace) -> Result<Configuration, ReplayError> {
    let mut cfg = init_config(g, &trace.case)?;
    for (index, e) in trace.events.iter().enumerate() {
        if let Event::Applied { node, production, bindings, .. } = e {
            apply_production(&mut cfg, g, production, &NodeId::central(node.name.clone()), bindings)
                .map_err(|error| ReplayError::Apply { index, error })?;
        }
    }
    Ok(cfg)
}

/// One seeded distributed run, compared with the central replay of its decisions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialReport {
    pub seed: u64,
    pub stop: StopReason,
    pub steps: usize,
    /// Messages still in flight after the final drain.
    pub undelivered: usize,
    pub merged: Result<String, MergeError>,
    pub central: Result<String, ReplayError>,
    /// A step that was enabled locally but is triggered and not enabled globally.
    pub remote_conflict: Option<String>,
    pub trace: Trace,
}

impl TrialReport {
    pub fn agrees(&self) -> bool {
        matches!((&self.merged, &self.central), (Ok(a), Ok(b)) if a == b)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SimulateError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Deploy the case, run the scheduler, drain up to `drain_cap` messages and compare.
pub fn simulate_trial(
    g: &Gag,
    case: &Case,
    partition: &Partition,
    opts: &RunOptions,
    drain_cap: usize,
) -> Result<TrialReport, SimulateError> {
    let cfg = init_config(g, case)?;
    let mut state = deploy(g, &cfg, partition)?;
    let mut trace = Trace::new(case.clone());
    trace.partition = Some(partition.clone());
    let (stop, steps) = scheduler_run(g, &mut state, &mut trace, opts)?;
    drain_recorded(&mut state, &mut trace, drain_cap)?;
    let merged = state.merge().map(|c| canonical_text(&c));
    let central = central_replay(g, &trace).map(|c| canonical_text(&c));
    let remote_conflict = match (&central, &merged) {
        (
            Err(ReplayError::Apply {
                index,
                error:
                    ApplyError::NotEnabled { node, production, failure: MatchFailure::TriggeredButCyclic { cycle, .. } },
            }),
            _,
        ) => Some(format!("event {}: {production} at {node} is triggered but not enabled ({cycle})", index + 1)),
        (_, Err(e @ MergeError::CyclicMerge { .. })) => Some(e.to_string()),
        _ => None,
    };
    Ok(TrialReport {
        seed: opts.seed,
        stop,
        steps,
        undelivered: state.in_flight.len(),
        merged,
        central,
        remote_conflict,
        trace,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DistReplayError {
    #[error("trace has no partition")]
    NotDistributed,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Deploy(DistError),
    #[error("event {}: {error}", .index + 1)]
    Event { index: usize, error: DistError },
    #[error("event {}: recorded {field} differs from the replayed one", .index + 1)]
    Mismatch { index: usize, field: &'static str },
}

/// Rebuild a distributed state from its trace, checking recorded substitutions and message ids.
pub fn replay_distributed(g: &Gag, trace: &Trace) -> Result<DistributedState, DistReplayError> {
    let partition = trace.partition.as_ref().ok_or(DistReplayError::NotDistributed)?;
    let cfg = init_config(g, &trace.case)?;
    let mut state = deploy(g, &cfg, partition).map_err(DistReplayError::Deploy)?;
    for (index, e) in trace.events.iter().enumerate() {
        match e {
            Event::Applied { node, production, bindings, sigma_in, sigma_out, emitted } => {
                let step = state
                    .local_apply(g, &node.ns, production, node, bindings)
                    .map_err(|error| DistReplayError::Event { index, error })?;
                if sigma_in.as_ref().is_some_and(|r| *r != step.matched.sigma_in) {
                    return Err(DistReplayError::Mismatch { index, field: "sigma_in" });
                }
                if sigma_out.as_ref().is_some_and(|r| *r != step.matched.sigma_out) {
                    return Err(DistReplayError::Mismatch { index, field: "sigma_out" });
                }
                if *emitted != step.emitted {
                    return Err(DistReplayError::Mismatch { index, field: "emitted" });
                }
            }
            Event::Delivered { message, emitted } => {
                let got = state.deliver(message).map_err(|error| DistReplayError::Event { index, error })?;
                if *emitted != got {
                    return Err(DistReplayError::Mismatch { index, field: "emitted" });
                }
            }
        }
    }
    Ok(state)
}
