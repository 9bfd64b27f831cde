//! Distributed runtime: sorts are partitioned over locations, each location keeps
//! a local configuration, and locations talk through four kinds of messages.
//!
//! Names are namespaced by location. A variable is owned by the location of its
//! synthesized occurrence; other locations read it through a placeholder, and the
//! owner keeps a subscription `placeholder = variable` so it knows whom to tell.
//! A child created at a distant location is referenced through a placeholder node
//! plus an alias to the real node.

mod scheduler;

pub use scheduler::{
    apply_recorded, central_replay, deliver_recorded, drain_recorded, replay_distributed, scheduler_run,
    simulate_trial, DistReplayError, Policy, RunOptions, SimulateError, StopReason, TrialReport,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{
    enabled_set, form_match, freshen_production, ApplyError, ConfigError, Configuration, EnabledEntry, Matched, NodeEq,
    NodeId,
};
use crate::grammar::{Form, Gag};
use crate::terms::{unify, Subst, Term, UnifyError, Var, CENTRAL};

/// Locations and the sorts they host, in declaration order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Partition {
    pub locations: IndexMap<String, Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("partition has no location")]
    Empty,
    #[error("partition mentions unknown sort `{0}`")]
    UnknownSort(String),
    #[error("sort `{0}` is assigned to two locations")]
    SortInTwoLocations(String),
    #[error("sort `{0}` has no location")]
    SortWithoutLocation(String),
    #[error("`{0}` is not a valid location name")]
    BadLocation(String),
}

impl Partition {
    /// The partition declared in the grammar file, if any.
    pub fn from_gag(g: &Gag) -> Option<Partition> {
        (!g.partition.is_empty()).then(|| Partition { locations: g.partition.clone() })
    }

    /// Every sort at one location.
    pub fn single(g: &Gag, location: &str) -> Partition {
        let mut locations = IndexMap::new();
        locations.insert(location.to_string(), g.sorts.keys().cloned().collect());
        Partition { locations }
    }

    pub fn location_of(&self, sort: &str) -> Option<&str> {
        self.locations.iter().find(|(_, sorts)| sorts.iter().any(|s| s == sort)).map(|(l, _)| l.as_str())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.locations.keys().map(String::as_str)
    }

    /// Total on the grammar's sorts, disjoint, and non-empty.
    pub fn check(&self, g: &Gag) -> Result<(), PartitionError> {
        if self.locations.is_empty() {
            return Err(PartitionError::Empty);
        }
        let mut seen = BTreeSet::new();
        for (loc, sorts) in &self.locations {
            if loc == CENTRAL || crate::terms::split_qualified(loc).is_err() || loc.contains('@') {
                return Err(PartitionError::BadLocation(loc.clone()));
            }
            for s in sorts {
                if g.sort(s).is_none() {
                    return Err(PartitionError::UnknownSort(s.clone()));
                }
                if !seen.insert(s.as_str()) {
                    return Err(PartitionError::SortInTwoLocations(s.clone()));
                }
            }
        }
        if let Some(s) = g.sorts.keys().find(|s| !seen.contains(s.as_str())) {
            return Err(PartitionError::SortWithoutLocation(s.clone()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Payload {
    /// `X = s(t)<y>`: a child of the sender, to be hosted by the receiver.
    NodeDefinition { node: NodeId, form: Form },
    /// `x = t`: a value for a variable the receiver subscribed to.
    ValueAssignment { var: Var, term: Term },
    /// `X = Y`: the sender's placeholder `X` stands for the real node `Y`.
    NodeAlias { node: NodeId, alias: NodeId },
    /// `y = x`: `subscriber` wants the value of the receiver's variable `var`.
    VarSubscription { subscriber: Var, var: Var },
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payload::NodeDefinition { node, form } => write!(f, "def {node} = {form}"),
            Payload::ValueAssignment { var, term } => write!(f, "val {var} = {term}"),
            Payload::NodeAlias { node, alias } => write!(f, "alias {node} = {alias}"),
            Payload::VarSubscription { subscriber, var } => write!(f, "sub {subscriber} = {var}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    /// `m{seq}_{hash}`, unique within a run.
    pub id: String,
    pub from: String,
    pub to: String,
    pub payload: Payload,
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{} to {}] {}", self.id, self.from, self.to, self.payload)
    }
}

/// One location's share of the configuration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalConfiguration {
    pub location: String,
    /// Local node equations; roots are the global roots hosted here.
    pub config: Configuration,
    /// Placeholder node to the distant node it stands for.
    pub node_aliases: BTreeMap<NodeId, NodeId>,
    /// Distant subscriber to the local variable whose value it awaits.
    pub subscriptions: BTreeMap<Var, Var>,
    /// Local variables already bound, each with the value it was bound to. Values
    /// are kept triangular: they may mention variables bound later (see `value_of`).
    pub resolved: Subst,
    /// Local names standing for distant variables, not yet bound.
    pub placeholders: BTreeSet<Var>,
}

impl LocalConfiguration {
    fn new(location: &str) -> Self {
        LocalConfiguration {
            location: location.to_string(),
            config: Configuration::new(location),
            node_aliases: BTreeMap::new(),
            subscriptions: BTreeMap::new(),
            resolved: Subst::new(),
            placeholders: BTreeSet::new(),
        }
    }

    fn name_taken(&self, id: &NodeId) -> bool {
        self.config.nodes.contains_key(id) || self.node_aliases.contains_key(id)
    }

    fn fresh_node(&self, name: &str, pending: &[NodeId]) -> NodeId {
        let mut name = name.to_string();
        loop {
            let id = NodeId::in_ns(name.clone(), self.location.clone());
            if !self.name_taken(&id) && !pending.contains(&id) {
                return id;
            }
            name.push('\'');
        }
    }

    /// Equations, aliases and subscriptions as text.
    pub fn describe(&self) -> String {
        let mut out = crate::textio::emit_config_body(&self.config);
        for (x, y) in &self.node_aliases {
            out.push_str(&format!("alias {x} = {y}\n"));
        }
        for (y, x) in &self.subscriptions {
            out.push_str(&format!("sub {y} = {x}\n"));
        }
        out
    }

    /// Current value of a bound variable, with later bindings expanded.
    pub fn value_of(&self, x: &Var) -> Option<Term> {
        self.resolved.get(x).map(|t| self.expand(t))
    }

    fn expand(&self, t: &Term) -> Term {
        match t {
            Term::Var { var } => match self.resolved.get(var) {
                Some(u) => self.expand(u),
                None => t.clone(),
            },
            Term::App { ctor, args } => {
                Term::App { ctor: ctor.clone(), args: args.iter().map(|a| self.expand(a)).collect() }
            }
        }
    }

    /// Apply `s` to the local variables, forwarding values to subscribers.
    fn bind(&mut self, s: &Subst) -> Vec<Payload> {
        if s.is_empty() {
            return Vec::new();
        }
        for nd in self.config.nodes.values_mut() {
            if let NodeEq::Open(f) = nd {
                *f = f.apply(s);
            }
        }
        for (x, t) in s.iter() {
            self.resolved.insert(x.clone(), t.clone());
            self.placeholders.remove(x);
        }
        let mut out = Vec::new();
        let subs = std::mem::take(&mut self.subscriptions);
        for (sub, target) in subs {
            match s.get(&target) {
                None => {
                    self.subscriptions.insert(sub, target);
                }
                Some(Term::Var { var }) => {
                    self.subscriptions.insert(sub, var.clone());
                }
                Some(t) => out.push(Payload::ValueAssignment { var: sub, term: t.clone() }),
            }
        }
        out
    }

    /// Replace distant variables by fresh placeholders, asking their owners for values.
    fn localize(&mut self, ts: &[Term], out: &mut Vec<Payload>) -> Vec<Term> {
        let mut fresh: BTreeMap<Var, Var> = BTreeMap::new();
        let loc = self.location.clone();
        let gen = &mut self.config.gen;
        let ts = ts
            .iter()
            .map(|t| {
                t.map_vars(&mut |v| {
                    if v.ns == loc {
                        return Term::from_var(v.clone());
                    }
                    Term::from_var(fresh.entry(v.clone()).or_insert_with(|| gen.fresh()).clone())
                })
            })
            .collect();
        for (v, bar) in fresh {
            self.placeholders.insert(bar.clone());
            out.push(Payload::VarSubscription { subscriber: bar, var: v });
        }
        ts
    }

    fn is_live(&self, v: &Var) -> bool {
        self.config.open_nodes().any(|(_, f)| f.vars().contains(v))
            || self.resolved.range_vars().contains(v)
            || self.subscriptions.values().any(|x| x == v)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DistError {
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("configuration to deploy is invalid: {0}")]
    Config(#[from] ConfigError),
    #[error("two nodes would both be named `{0}`")]
    NameClash(NodeId),
    #[error("unknown location `{0}`")]
    UnknownLocation(String),
    #[error("node `{node}` is not hosted at `{location}`")]
    WrongLocation { node: NodeId, location: String },
    #[error("binding for `{0}` is not ground")]
    NonGroundBinding(Var),
    #[error(transparent)]
    Apply(#[from] ApplyError),
    #[error("no message `{0}` in flight")]
    UnknownMessage(String),
    #[error("message destination `{0}` is not a location")]
    UnknownDestination(String),
    #[error("`{0}` received a second value")]
    AlreadyAssigned(Var),
    #[error("sort `{0}` has no location")]
    Unlocated(String),
    #[error("integrity: {0}")]
    Integrity(IntegrityError),
}

impl DistError {
    pub fn code(&self) -> &'static str {
        match self {
            DistError::Partition(_) => "BadPartition",
            DistError::Config(_) => "InvalidConfiguration",
            DistError::NameClash(_) => "NameClash",
            DistError::UnknownLocation(_) => "UnknownLocation",
            DistError::WrongLocation { .. } => "WrongLocation",
            DistError::NonGroundBinding(_) => "BadBinding",
            DistError::Apply(e) => e.code(),
            DistError::UnknownMessage(_) => "UnknownMessage",
            DistError::UnknownDestination(_) => "UnknownDestination",
            DistError::AlreadyAssigned(_) => "AlreadyAssigned",
            DistError::Unlocated(_) => "Unlocated",
            DistError::Integrity(_) => "Integrity",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MergeError {
    #[error("`{0}` refers to a node with no equation and no message in flight")]
    DanglingReference(NodeId),
    #[error("copy elimination is cyclic: `{var}` occurs in {term}")]
    CyclicMerge { var: Var, term: Term },
    #[error("copy elimination equates {left} and {right}")]
    MergeConflict { left: Term, right: Term },
    #[error("two locations define node `{0}`")]
    DuplicateNode(NodeId),
}

impl MergeError {
    pub fn code(&self) -> &'static str {
        match self {
            MergeError::DanglingReference(_) => "DanglingReference",
            MergeError::CyclicMerge { .. } => "CyclicMerge",
            MergeError::MergeConflict { .. } => "MergeConflict",
            MergeError::DuplicateNode(_) => "DuplicateNode",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum IntegrityError {
    #[error("placeholder `{var}` at `{location}` will never receive a value")]
    LostSubscription { location: String, var: Var },
    #[error("subscription `{subscriber} = {target}` at `{location}` points at a bound variable")]
    StaleSubscription { location: String, subscriber: Var, target: Var },
    #[error("child `{child}` of `{node}` at `{location}` is unreachable")]
    MissingChild { location: String, node: NodeId, child: NodeId },
}

/// Result of one local application.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalStep {
    pub matched: Matched,
    pub created: Vec<NodeId>,
    pub emitted: Vec<String>,
}

/// All local configurations plus the messages in flight.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributedState {
    pub partition: Partition,
    pub locals: IndexMap<String, LocalConfiguration>,
    pub roots: Vec<NodeId>,
    /// Unordered in principle; kept in send order so runs are reproducible.
    pub in_flight: IndexMap<String, Message>,
    pub next_message: u64,
}

fn message_id(seq: u64, payload: &Payload) -> String {
    let digest = Sha256::digest(payload.to_string().as_bytes());
    let hex: String = digest.iter().take(4).map(|b| format!("{b:02x}")).collect();
    format!("m{seq}_{hex}")
}

/// Renaming of the variables of `cfg` to names unique regardless of namespace.
fn base_names(cfg: &Configuration) -> BTreeMap<Var, String> {
    let vars = cfg.vars();
    let mut count: BTreeMap<&str, usize> = BTreeMap::new();
    for v in &vars {
        *count.entry(v.name.as_str()).or_default() += 1;
    }
    let mut taken: BTreeSet<String> = vars.iter().map(|v| v.name.clone()).collect();
    let mut out = BTreeMap::new();
    for v in &vars {
        let name = if count[v.name.as_str()] == 1 {
            v.name.clone()
        } else {
            let mut n = format!("{}_{}", v.name, v.ns);
            while !taken.insert(n.clone()) {
                n.push('\'');
            }
            n
        };
        out.insert(v.clone(), name);
    }
    out
}

/// Project a configuration onto the locations of `partition`.
pub fn deploy(g: &Gag, cfg: &Configuration, partition: &Partition) -> Result<DistributedState, DistError> {
    partition.check(g)?;
    cfg.check(g)?;
    let loc_of_sort =
        |s: &str| partition.location_of(s).map(str::to_string).ok_or_else(|| DistError::Unlocated(s.into()));
    let mut node_loc: BTreeMap<&NodeId, String> = BTreeMap::new();
    for id in cfg.nodes.keys() {
        let sort = cfg.sort_of(g, id).ok_or_else(|| ConfigError::BadForm(id.clone()))?;
        node_loc.insert(id, loc_of_sort(&sort)?);
    }
    let names = base_names(cfg);
    let mut owner: BTreeMap<Var, String> = BTreeMap::new();
    for (id, f) in cfg.open_nodes() {
        for y in f.synthesized.iter().filter_map(Term::as_var) {
            owner.insert(y.clone(), node_loc[id].clone());
        }
    }
    for (id, f) in cfg.open_nodes() {
        for x in f.vars() {
            owner.entry(x).or_insert_with(|| node_loc[id].clone());
        }
    }

    let mut locals: IndexMap<String, LocalConfiguration> =
        partition.names().map(|l| (l.to_string(), LocalConfiguration::new(l))).collect();
    let relocate = |id: &NodeId, loc: &str| NodeId::in_ns(id.name.clone(), loc);
    for (id, nd) in &cfg.nodes {
        let loc = node_loc[id].clone();
        let new_id = relocate(id, &loc);
        let eq = match nd {
            NodeEq::Closed { production, children } => {
                let mut cs = Vec::new();
                for c in children {
                    let cloc = &node_loc[c];
                    let here = relocate(c, &loc);
                    if *cloc != loc {
                        locals[&loc].node_aliases.insert(here.clone(), relocate(c, cloc));
                    }
                    cs.push(here);
                }
                NodeEq::Closed { production: production.clone(), children: cs }
            }
            NodeEq::Open(f) => {
                let mut subs = Vec::new();
                let form = f.map_vars(&mut |x| {
                    let local = Var::in_ns(names[x].clone(), loc.clone());
                    if owner[x] != loc {
                        subs.push((local.clone(), Var::in_ns(names[x].clone(), owner[x].clone()), owner[x].clone()));
                    }
                    Term::from_var(local)
                });
                for (placeholder, target, at) in subs {
                    locals[&loc].placeholders.insert(placeholder.clone());
                    locals[&at].subscriptions.insert(placeholder, target);
                }
                NodeEq::Open(form)
            }
        };
        if locals[&loc].config.nodes.insert(new_id.clone(), eq).is_some() {
            return Err(DistError::NameClash(new_id));
        }
    }
    let roots: Vec<NodeId> = cfg.roots.iter().map(|r| relocate(r, &node_loc[r])).collect();
    for r in &roots {
        locals[&r.ns].config.roots.push(r.clone());
    }
    for local in locals.values_mut() {
        for n in names.values() {
            local.config.gen.reserve(n);
        }
        for c in g.symbols.keys() {
            local.config.gen.reserve(c);
        }
    }
    Ok(DistributedState { partition: partition.clone(), locals, roots, in_flight: IndexMap::new(), next_message: 0 })
}

impl DistributedState {
    pub fn local(&self, location: &str) -> Result<&LocalConfiguration, DistError> {
        self.locals.get(location).ok_or_else(|| DistError::UnknownLocation(location.to_string()))
    }

    fn destination(&self, from: &str, payload: &Payload) -> String {
        match payload {
            Payload::NodeDefinition { form, .. } => self.partition.location_of(&form.sort).unwrap_or(from).to_string(),
            Payload::ValueAssignment { var, .. } => var.ns.clone(),
            Payload::NodeAlias { node, .. } => node.ns.clone(),
            Payload::VarSubscription { var, .. } => var.ns.clone(),
        }
    }

    fn send(&mut self, from: &str, payloads: Vec<Payload>) -> Vec<String> {
        let mut ids = Vec::with_capacity(payloads.len());
        for payload in payloads {
            let id = message_id(self.next_message, &payload);
            self.next_message += 1;
            let to = self.destination(from, &payload);
            self.in_flight.insert(id.clone(), Message { id: id.clone(), from: from.to_string(), to, payload });
            ids.push(id);
        }
        ids
    }

    /// Productions triggered at the open nodes of one location.
    pub fn enabled(&self, g: &Gag, location: &str) -> Result<Vec<EnabledEntry>, DistError> {
        Ok(enabled_set(&self.local(location)?.config, g))
    }

    /// Apply `production` at `node` within `location`; emitted messages join the in-flight set.
    pub fn local_apply(
        &mut self,
        g: &Gag,
        location: &str,
        production: &str,
        node: &NodeId,
        bindings: &Subst,
    ) -> Result<LocalStep, DistError> {
        let local = self.local(location)?;
        if node.ns != location {
            return Err(DistError::WrongLocation { node: node.clone(), location: location.to_string() });
        }
        if let Some((x, _)) = bindings.iter().find(|(_, t)| !t.is_ground()) {
            return Err(DistError::NonGroundBinding(x.clone()));
        }
        let def = match local.config.nodes.get(node) {
            None => return Err(ApplyError::UnknownNode(node.clone()).into()),
            Some(NodeEq::Closed { .. }) => return Err(ApplyError::NodeClosed(node.clone()).into()),
            Some(NodeEq::Open(f)) => f.clone(),
        };
        let mut local = local.clone();
        let (p, _) = freshen_production(g, production, bindings, &mut local.config.gen)?;
        let matched = form_match(&p.lhs, &def).map_err(|failure| ApplyError::NotEnabled {
            node: node.clone(),
            production: production.to_string(),
            failure,
        })?;

        let mut created = Vec::with_capacity(p.rhs.len());
        let mut out = Vec::new();
        let mut new_nodes = Vec::new();
        for (i, f) in p.rhs.iter().enumerate() {
            let id = local.fresh_node(&format!("{}_{}", node.name, i + 1), &created);
            let form = f.apply(&matched.sigma);
            let loc = self.partition.location_of(&form.sort).ok_or_else(|| DistError::Unlocated(form.sort.clone()))?;
            if loc == location {
                new_nodes.push((id.clone(), NodeEq::Open(form)));
            } else {
                local.placeholders.extend(form.synthesized.iter().filter_map(Term::as_var).cloned());
                out.push(Payload::NodeDefinition { node: id.clone(), form });
            }
            created.push(id);
        }
        out.extend(local.bind(&matched.sigma_out));
        for (id, eq) in new_nodes {
            local.config.nodes.insert(id, eq);
        }
        local
            .config
            .nodes
            .insert(node.clone(), NodeEq::Closed { production: production.to_string(), children: created.clone() });
        self.locals[location] = local;
        let emitted = self.send(location, out);
        Ok(LocalStep { matched, created, emitted })
    }

    /// Consume a message at its destination, returning the messages it provokes.
    pub fn consume(&mut self, m: &Message) -> Result<Vec<Payload>, DistError> {
        let to = m.to.as_str();
        let local = self.locals.get_mut(to).ok_or_else(|| DistError::UnknownDestination(to.to_string()))?;
        let mut out = Vec::new();
        match &m.payload {
            Payload::NodeDefinition { node, form } => {
                let bar = local.fresh_node(&node.name, &[]);
                let args = local.localize(&form.inherited, &mut out);
                let mut synthesized = Vec::with_capacity(form.synthesized.len());
                for y in &form.synthesized {
                    let y_bar = local.config.gen.fresh();
                    if let Some(y) = y.as_var() {
                        local.subscriptions.insert(y.clone(), y_bar.clone());
                    }
                    synthesized.push(Term::from_var(y_bar));
                }
                local.config.nodes.insert(bar.clone(), NodeEq::Open(Form::new(form.sort.clone(), args, synthesized)));
                out.push(Payload::NodeAlias { node: node.clone(), alias: bar });
            }
            Payload::ValueAssignment { var, term } => {
                if local.resolved.contains(var) {
                    return Err(DistError::AlreadyAssigned(var.clone()));
                }
                let t = local.localize(std::slice::from_ref(term), &mut out).remove(0);
                out.extend(local.bind(&Subst::singleton(var.clone(), t)));
            }
            Payload::NodeAlias { node, alias } => {
                local.node_aliases.insert(node.clone(), alias.clone());
            }
            Payload::VarSubscription { subscriber, var } => match local.value_of(var) {
                None => {
                    local.subscriptions.insert(subscriber.clone(), var.clone());
                }
                Some(Term::Var { var: v }) => {
                    local.subscriptions.insert(subscriber.clone(), v);
                }
                Some(t) => out.push(Payload::ValueAssignment { var: subscriber.clone(), term: t }),
            },
        }
        Ok(out)
    }

    /// Remove a message from flight, consume it, and send what it provokes.
    pub fn deliver(&mut self, id: &str) -> Result<Vec<String>, DistError> {
        let m = self.in_flight.get(id).cloned().ok_or_else(|| DistError::UnknownMessage(id.to_string()))?;
        let out = self.consume(&m)?;
        self.in_flight.shift_remove(id);
        Ok(self.send(&m.to, out))
    }

    /// Deliver messages oldest first until none is left or `cap` deliveries were made.
    pub fn drain(&mut self, cap: usize) -> Result<Vec<(String, Vec<String>)>, DistError> {
        let mut done = Vec::new();
        while done.len() < cap {
            let Some(id) = self.in_flight.keys().next().cloned() else {
                break;
            };
            let emitted = self.deliver(&id)?;
            done.push((id, emitted));
        }
        Ok(done)
    }

    pub fn is_quiescent(&self, g: &Gag) -> bool {
        self.in_flight.is_empty()
            && self.locals.values().all(|l| !enabled_set(&l.config, g).iter().any(EnabledEntry::is_enabled))
    }

    /// Global configuration: union of the locals and of in-flight messages, with copy rules eliminated.
    pub fn merge(&self) -> Result<Configuration, MergeError> {
        let mut goals: Vec<(Term, Term)> = Vec::new();
        let mut aliases: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        let mut nodes: BTreeMap<NodeId, NodeEq> = BTreeMap::new();
        for local in self.locals.values() {
            for (y, x) in &local.subscriptions {
                goals.push((Term::from_var(y.clone()), Term::from_var(x.clone())));
            }
            for (x, t) in local.resolved.iter() {
                goals.push((Term::from_var(x.clone()), t.clone()));
            }
            aliases.extend(local.node_aliases.iter().map(|(a, b)| (a.clone(), b.clone())));
            for (id, nd) in &local.config.nodes {
                nodes.insert(id.clone(), nd.clone());
            }
        }
        for m in self.in_flight.values() {
            match &m.payload {
                Payload::NodeDefinition { node, form } => {
                    nodes.insert(node.clone(), NodeEq::Open(form.clone()));
                }
                Payload::ValueAssignment { var, term } => goals.push((Term::from_var(var.clone()), term.clone())),
                Payload::NodeAlias { node, alias } => {
                    aliases.insert(node.clone(), alias.clone());
                }
                Payload::VarSubscription { subscriber, var } => {
                    goals.push((Term::from_var(subscriber.clone()), Term::from_var(var.clone())))
                }
            }
        }
        let mgu = unify(&goals).map_err(|e| match e {
            UnifyError::OccurCheck { var, term } => MergeError::CyclicMerge { var, term },
            UnifyError::Clash { left, right } => MergeError::MergeConflict { left, right },
        })?;
        let resolve = |id: &NodeId| -> Result<NodeId, MergeError> {
            let mut cur = id.clone();
            let mut hops = 0;
            while let Some(next) = aliases.get(&cur) {
                cur = next.clone();
                hops += 1;
                if hops > aliases.len() {
                    return Err(MergeError::DanglingReference(id.clone()));
                }
            }
            if nodes.contains_key(&cur) {
                Ok(NodeId::central(cur.name))
            } else {
                Err(MergeError::DanglingReference(id.clone()))
            }
        };
        let mut cfg = Configuration::new(CENTRAL);
        for (id, nd) in &nodes {
            let eq = match nd {
                NodeEq::Closed { production, children } => NodeEq::Closed {
                    production: production.clone(),
                    children: children.iter().map(&resolve).collect::<Result<_, _>>()?,
                },
                NodeEq::Open(f) => NodeEq::Open(f.apply(&mgu)),
            };
            let name = NodeId::central(id.name.clone());
            if cfg.nodes.insert(name.clone(), eq).is_some() {
                return Err(MergeError::DuplicateNode(name));
            }
        }
        cfg.roots = self.roots.iter().map(&resolve).collect::<Result<_, _>>()?;
        for v in cfg.vars() {
            cfg.gen.reserve(&v.name);
        }
        Ok(cfg)
    }

    /// Every live placeholder will get its value, no subscription points at a bound
    /// variable, and every child is reachable.
    pub fn check_integrity(&self) -> Result<(), IntegrityError> {
        let mut subscribed: BTreeSet<&Var> = BTreeSet::new();
        let mut defined_nodes: BTreeSet<&NodeId> = BTreeSet::new();
        for local in self.locals.values() {
            subscribed.extend(local.subscriptions.keys());
            defined_nodes.extend(local.config.nodes.keys());
        }
        let mut pending_nodes: BTreeSet<&NodeId> = BTreeSet::new();
        for m in self.in_flight.values() {
            match &m.payload {
                Payload::NodeDefinition { node, form } => {
                    pending_nodes.insert(node);
                    subscribed.extend(form.synthesized.iter().filter_map(Term::as_var));
                }
                Payload::ValueAssignment { var, .. } => {
                    subscribed.insert(var);
                }
                Payload::NodeAlias { node, .. } => {
                    pending_nodes.insert(node);
                }
                Payload::VarSubscription { subscriber, .. } => {
                    subscribed.insert(subscriber);
                }
            }
        }
        for local in self.locals.values() {
            for p in &local.placeholders {
                if local.is_live(p) && !subscribed.contains(p) {
                    return Err(IntegrityError::LostSubscription { location: local.location.clone(), var: p.clone() });
                }
            }
            for (sub, target) in &local.subscriptions {
                if local.resolved.contains(target) {
                    return Err(IntegrityError::StaleSubscription {
                        location: local.location.clone(),
                        subscriber: sub.clone(),
                        target: target.clone(),
                    });
                }
            }
            for (id, nd) in &local.config.nodes {
                let NodeEq::Closed { children, .. } = nd else {
                    continue;
                };
                for c in children {
                    let ok = local.config.nodes.contains_key(c)
                        || pending_nodes.contains(c)
                        || local.node_aliases.get(c).is_some_and(|real| defined_nodes.contains(real));
                    if !ok {
                        return Err(IntegrityError::MissingChild {
                            location: local.location.clone(),
                            node: id.clone(),
                            child: c.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}
