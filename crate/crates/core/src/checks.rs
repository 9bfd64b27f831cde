//! Seeded checks of the rewriting laws against central runs: confluence,
//! monotony, and the commutation diagram of the distributed runtime.
//!
//! Each trial walks a random prefix from the case, picks a configuration where
//! the law has something to say, and compares canonical forms. `Ok(None)` means
//! the walk offered no candidate; callers draw another seed.

use std::collections::{HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::distribution::{deploy, DistributedState, Partition};
use crate::engine::{
    apply_production, canonical_text, canonicalize, enabled_set, init_config, progress, Case, Configuration,
    EnabledEntry, EngineError, NodeId, Progress, ScriptStep, Status,
};
use crate::grammar::Gag;
use crate::terms::Subst;

/// Message budget for draining after each distributed step.
const DRAIN_CAP: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("seed {seed}: {detail}")]
pub struct LawFailure {
    pub seed: u64,
    pub detail: String,
}

/// Two steps a trial exercised, printed as `P/X`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairTrial {
    pub prefix: usize,
    pub first: ScriptStep,
    pub second: ScriptStep,
}

impl std::fmt::Display for PairTrial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "after {} steps: {}/{} and {}/{}",
            self.prefix, self.first.production, self.first.node, self.second.production, self.second.node
        )
    }
}

fn enabled_only(cfg: &Configuration, g: &Gag) -> Vec<EnabledEntry> {
    enabled_set(cfg, g).into_iter().filter(EnabledEntry::is_enabled).collect()
}

/// Configurations `Γ0 … Γn` along a uniformly random maximal walk of at most `steps` applications.
pub fn random_walk(g: &Gag, case: &Case, steps: usize, rng: &mut impl Rng) -> Result<Vec<Configuration>, EngineError> {
    let mut cfg = init_config(g, case)?;
    let mut out = vec![cfg.clone()];
    for _ in 0..steps {
        let Some(e) = enabled_only(&cfg, g).choose(rng).cloned() else {
            break;
        };
        apply_production(&mut cfg, g, &e.production, &e.node, &Subst::new()).expect("an enabled production applies");
        out.push(cfg.clone());
    }
    Ok(out)
}

fn step_of(e: &EnabledEntry) -> ScriptStep {
    ScriptStep::new(e.node.clone(), e.production.clone())
}

fn apply_checked(cfg: &mut Configuration, g: &Gag, s: &ScriptStep) -> Result<(), String> {
    apply_production(cfg, g, &s.production, &s.node, &s.bindings).map_err(|e| e.to_string())?;
    cfg.check(g).map_err(|e| format!("not a configuration after {}/{}: {e}", s.production, s.node))
}

/// Pairs of enabled steps at distinct nodes accepted by `keep`.
fn pairs(
    cfg: &Configuration,
    g: &Gag,
    keep: impl Fn(&Configuration, &EnabledEntry, &EnabledEntry) -> bool,
) -> Vec<(ScriptStep, ScriptStep)> {
    let en = enabled_only(cfg, g);
    let mut out = Vec::new();
    for (i, a) in en.iter().enumerate() {
        for b in &en[i + 1..] {
            if a.node != b.node && keep(cfg, a, b) {
                out.push((step_of(a), step_of(b)));
            }
        }
    }
    out
}

/// Pick a walk prefix offering a pair, then the pair, both uniformly.
fn pick_pair(
    g: &Gag,
    case: &Case,
    rng: &mut ChaCha8Rng,
    max_prefix: usize,
    keep: impl Fn(&Configuration, &EnabledEntry, &EnabledEntry) -> bool,
) -> Result<Option<(usize, Configuration, ScriptStep, ScriptStep)>, EngineError> {
    let walk = random_walk(g, case, max_prefix, rng)?;
    let candidates: Vec<(usize, Vec<(ScriptStep, ScriptStep)>)> =
        walk.iter().enumerate().map(|(k, c)| (k, pairs(c, g, &keep))).filter(|(_, p)| !p.is_empty()).collect();
    let Some((k, ps)) = candidates.choose(rng) else {
        return Ok(None);
    };
    let (a, b) = ps.choose(rng).cloned().expect("non-empty");
    Ok(Some((*k, walk[*k].clone(), a, b)))
}

/// Both orders of two enabled steps at distinct nodes succeed and meet.
pub fn confluence_trial(g: &Gag, case: &Case, seed: u64, max_prefix: usize) -> Result<Option<PairTrial>, LawFailure> {
    let fail = |detail: String| LawFailure { seed, detail };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let Some((prefix, cfg, a, b)) =
        pick_pair(g, case, &mut rng, max_prefix, |_, _, _| true).map_err(|e| fail(e.to_string()))?
    else {
        return Ok(None);
    };
    let trial = PairTrial { prefix, first: a, second: b };
    let mut ab = cfg.clone();
    let mut ba = cfg;
    for (c, x, y) in [(&mut ab, &trial.first, &trial.second), (&mut ba, &trial.second, &trial.first)] {
        apply_checked(c, g, x).and_then(|_| apply_checked(c, g, y)).map_err(|e| fail(format!("{trial}: {e}")))?;
    }
    if canonical_text(&ab) != canonical_text(&ba) {
        return Err(fail(format!("{trial}: the two orders reach different configurations")));
    }
    Ok(Some(trial))
}

/// An enabled step stays enabled across a detour avoiding its node, and applying it
/// before or after the detour meets.
pub fn monotony_trial(
    g: &Gag,
    case: &Case,
    seed: u64,
    max_prefix: usize,
    max_detour: usize,
) -> Result<Option<(ScriptStep, usize)>, LawFailure> {
    let fail = |detail: String| LawFailure { seed, detail };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let walk = random_walk(g, case, max_prefix, &mut rng).map_err(|e| fail(e.to_string()))?;
    let start = walk.choose(&mut rng).expect("walk has Γ0").clone();
    let Some(target) = enabled_only(&start, g).choose(&mut rng).map(step_of) else {
        return Ok(None);
    };

    let mut detour = Vec::new();
    let mut moved = start.clone();
    for _ in 0..max_detour {
        let others: Vec<EnabledEntry> = enabled_only(&moved, g).into_iter().filter(|e| e.node != target.node).collect();
        let Some(e) = others.choose(&mut rng) else {
            break;
        };
        let s = step_of(e);
        apply_checked(&mut moved, g, &s).map_err(fail)?;
        detour.push(s);
    }
    let still = enabled_set(&moved, g)
        .into_iter()
        .find(|e| e.node == target.node && e.production == target.production)
        .map(|e| e.status);
    if still != Some(Status::Enabled) {
        return Err(fail(format!(
            "{}/{} lost after a detour of {} steps: {still:?}",
            target.production,
            target.node,
            detour.len()
        )));
    }
    apply_checked(&mut moved, g, &target).map_err(fail)?;

    let mut early = start;
    apply_checked(&mut early, g, &target).map_err(fail)?;
    for s in &detour {
        apply_checked(&mut early, g, s).map_err(|e| fail(format!("detour replayed after the target: {e}")))?;
    }
    if canonical_text(&early) != canonical_text(&moved) {
        return Err(fail(format!("{}/{} before and after the detour disagree", target.production, target.node)));
    }
    Ok(Some((target, detour.len())))
}

fn location_of_node(g: &Gag, partition: &Partition, cfg: &Configuration, node: &NodeId) -> Option<String> {
    partition.location_of(&cfg.sort_of(g, node)?).map(str::to_string)
}

fn local_step(
    g: &Gag,
    state: &mut DistributedState,
    partition: &Partition,
    central: &Configuration,
    s: &ScriptStep,
) -> Result<(), String> {
    let loc = location_of_node(g, partition, central, &s.node).ok_or_else(|| format!("{} has no location", s.node))?;
    let node = NodeId::in_ns(s.node.name.clone(), loc.clone());
    state.local_apply(g, &loc, &s.production, &node, &s.bindings).map_err(|e| e.to_string())?;
    state.check_integrity().map_err(|e| e.to_string())?;
    Ok(())
}

fn drain_all(state: &mut DistributedState) -> Result<(), String> {
    state.drain(DRAIN_CAP).map_err(|e| e.to_string())?;
    if !state.in_flight.is_empty() {
        return Err(format!("{} messages still in flight after {DRAIN_CAP} deliveries", state.in_flight.len()));
    }
    state.check_integrity().map_err(|e| e.to_string())
}

/// The four interleavings of `P1/X1` and `P2/X2` at distinct locations, with and
/// without intermediate drains, all merge to the central `Γ -P1/X1-> -P2/X2->`.
pub fn commutation_trial(
    g: &Gag,
    case: &Case,
    partition: &Partition,
    seed: u64,
    max_prefix: usize,
) -> Result<Option<PairTrial>, LawFailure> {
    let fail = |detail: String| LawFailure { seed, detail };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let apart = |c: &Configuration, a: &EnabledEntry, b: &EnabledEntry| {
        location_of_node(g, partition, c, &a.node) != location_of_node(g, partition, c, &b.node)
    };
    let picked = pick_pair(g, case, &mut rng, max_prefix, apart).map_err(|e| fail(e.to_string()))?;
    let Some((prefix, cfg, a, b)) = picked else {
        return Ok(None);
    };
    let trial = PairTrial { prefix, first: a, second: b };
    let ctx = |e: String| fail(format!("{trial}: {e}"));

    let mut central = cfg.clone();
    apply_checked(&mut central, g, &trial.first)
        .and_then(|_| apply_checked(&mut central, g, &trial.second))
        .map_err(ctx)?;
    let expected = canonical_text(&central);

    let deployed = deploy(g, &cfg, partition).map_err(|e| ctx(e.to_string()))?;
    let routes: [(&str, [&ScriptStep; 2], bool); 4] = [
        ("P1 P2 drain", [&trial.first, &trial.second], false),
        ("P2 P1 drain", [&trial.second, &trial.first], false),
        ("P1 drain P2 drain", [&trial.first, &trial.second], true),
        ("P2 drain P1 drain", [&trial.second, &trial.first], true),
    ];
    for (name, [x, y], drain_between) in routes {
        let mut st = deployed.clone();
        let run = (|| {
            local_step(g, &mut st, partition, &cfg, x)?;
            if drain_between {
                drain_all(&mut st)?;
            }
            local_step(g, &mut st, partition, &cfg, y)?;
            drain_all(&mut st)?;
            st.merge().map_err(|e| e.to_string())
        })();
        let merged = run.map_err(|e| ctx(format!("route {name}: {e}")))?;
        if canonical_text(&merged) != expected {
            return Err(ctx(format!("route {name} merges to a configuration other than the central one")));
        }
    }
    Ok(Some(trial))
}

/// Configurations reachable in at most `depth` steps, up to alpha-equivalence, that
/// offer two enabled steps at distinct nodes. Returns that count and the number explored.
pub fn pair_offering_states(
    g: &Gag,
    case: &Case,
    depth: usize,
    state_cap: usize,
) -> Result<(usize, usize), EngineError> {
    let start = canonicalize(&init_config(g, case)?);
    let mut seen: HashSet<String> = HashSet::from([canonical_text(&start)]);
    let mut queue = VecDeque::from([(start, 0usize)]);
    let mut offering = 0;
    while let Some((cfg, d)) = queue.pop_front() {
        if !pairs(&cfg, g, |_, _, _| true).is_empty() {
            offering += 1;
        }
        if d == depth || seen.len() >= state_cap {
            continue;
        }
        for e in enabled_only(&cfg, g) {
            let mut next = cfg.clone();
            apply_production(&mut next, g, &e.production, &e.node, &Subst::new())
                .expect("an enabled production applies");
            let next = canonicalize(&next);
            if seen.insert(canonical_text(&next)) {
                queue.push_back((next, d + 1));
            }
        }
    }
    Ok((offering, seen.len()))
}

/// Run `trial` on seeds from 0 until `wanted` trials had a candidate; return how many did.
pub fn collect_trials<T>(
    wanted: usize,
    max_seeds: u64,
    mut trial: impl FnMut(u64) -> Result<Option<T>, LawFailure>,
) -> Result<Vec<T>, LawFailure> {
    let mut out = Vec::with_capacity(wanted);
    for seed in 0..max_seeds {
        if out.len() == wanted {
            break;
        }
        if let Some(t) = trial(seed)? {
            out.push(t);
        }
    }
    Ok(out)
}

/// Outcome of following a deterministic grammar from its case.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaximalRun {
    pub config: Configuration,
    pub progress: Progress,
    pub steps: usize,
}

/// Follow the only enabled step until none is left or `cap` steps were taken.
/// Fails when two steps are enabled at once, since the run would not be unique.
pub fn unique_maximal_run(g: &Gag, case: &Case, cap: usize) -> Result<MaximalRun, LawFailure> {
    let fail = |detail: String| LawFailure { seed: 0, detail };
    let mut cfg = init_config(g, case).map_err(|e| fail(e.to_string()))?;
    for steps in 0..cap {
        match enabled_only(&cfg, g).as_slice() {
            [] => return Ok(MaximalRun { progress: progress(&cfg, g), config: cfg, steps }),
            [e] => {
                apply_production(&mut cfg, g, &e.production, &e.node, &Subst::new())
                    .map_err(|e| fail(e.to_string()))?;
            }
            many => return Err(fail(format!("{} steps enabled after {steps} steps", many.len()))),
        }
    }
    Ok(MaximalRun { progress: progress(&cfg, g), config: cfg, steps: cap })
}
