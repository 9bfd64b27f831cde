use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{Form, Gag};
use crate::terms::{NameGen, Var, CENTRAL};

/// Serialized as `name` or `name@ns`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub name: String,
    pub ns: String,
}

impl NodeId {
    pub fn central(name: impl Into<String>) -> Self {
        NodeId { name: name.into(), ns: CENTRAL.to_string() }
    }

    pub fn in_ns(name: impl Into<String>, ns: impl Into<String>) -> Self {
        NodeId { name: name.into(), ns: ns.into() }
    }
}

impl std::str::FromStr for NodeId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        crate::terms::split_qualified(s).map(|(name, ns)| NodeId { name, ns })
    }
}

impl Serialize for NodeId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ns == CENTRAL {
            write!(f, "{}", self.name)
        } else {
            write!(f, "{}@{}", self.name, self.ns)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NodeEq {
    Closed { production: String, children: Vec<NodeId> },
    Open(Form),
}

/// The artifact: node equations plus the variable generator that extends it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Configuration {
    pub nodes: BTreeMap<NodeId, NodeEq>,
    pub roots: Vec<NodeId>,
    pub gen: NameGen,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("root `{0}` has no equation")]
    MissingRoot(NodeId),
    #[error("child `{child}` of `{parent}` has no equation")]
    MissingChild { parent: NodeId, child: NodeId },
    #[error("node `{0}` has two parents")]
    SharedChild(NodeId),
    #[error("node `{0}` is neither a root nor a child")]
    Orphan(NodeId),
    #[error("node `{node}` is labeled by unknown production `{production}`")]
    UnknownProduction { node: NodeId, production: String },
    #[error("node `{node}` has {found} children, production expects {expected}")]
    ChildCount { node: NodeId, expected: usize, found: usize },
    #[error("child `{child}` should have sort `{expected}`")]
    ChildSort { child: NodeId, expected: String },
    #[error("open node `{0}` has a malformed form")]
    BadForm(NodeId),
    #[error("variable `{0}` occurs twice in synthesized positions")]
    DuplicateOutput(Var),
    #[error("generator would reissue `{0}`")]
    GeneratorBehind(Var),
}

impl Configuration {
    pub fn new(ns: &str) -> Self {
        Configuration { nodes: BTreeMap::new(), roots: Vec::new(), gen: NameGen::new(ns) }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for nd in self.nodes.values() {
            if let NodeEq::Open(f) = nd {
                out.extend(f.vars());
            }
        }
        out
    }

    pub fn open_nodes(&self) -> impl Iterator<Item = (&NodeId, &Form)> {
        self.nodes.iter().filter_map(|(k, v)| match v {
            NodeEq::Open(f) => Some((k, f)),
            NodeEq::Closed { .. } => None,
        })
    }

    /// Make the generator skip every name already present, plus constructor names.
    pub fn reserve_names(&mut self, g: &Gag) {
        for v in self.vars() {
            self.gen.reserve(&v.name);
        }
        for c in g.symbols.keys() {
            self.gen.reserve(c);
        }
    }

    /// Hierarchical name for the `i`-th child of `parent`.
    pub fn child_id(&self, parent: &NodeId, i: usize, pending: &[NodeId]) -> NodeId {
        let mut name = format!("{}_{}", parent.name, i + 1);
        loop {
            let id = NodeId::in_ns(name.clone(), parent.ns.clone());
            if !self.nodes.contains_key(&id) && !pending.contains(&id) {
                return id;
            }
            name.push('\'');
        }
    }

    /// Sort of a node, when it can be told from its equation or its parent's production.
    pub fn sort_of(&self, g: &Gag, id: &NodeId) -> Option<String> {
        match self.nodes.get(id)? {
            NodeEq::Open(f) => Some(f.sort.clone()),
            NodeEq::Closed { production, .. } => g.production(production).map(|p| p.lhs.sort.clone()),
        }
    }

    /// Structural invariants of a configuration over `g`.
    pub fn check(&self, g: &Gag) -> Result<(), ConfigError> {
        for r in &self.roots {
            if !self.nodes.contains_key(r) {
                return Err(ConfigError::MissingRoot(r.clone()));
            }
        }
        let mut parent: BTreeMap<&NodeId, &NodeId> = BTreeMap::new();
        let mut outputs = BTreeSet::new();
        for (id, nd) in &self.nodes {
            match nd {
                NodeEq::Closed { production, children } => {
                    let p = g.production(production).ok_or_else(|| ConfigError::UnknownProduction {
                        node: id.clone(),
                        production: production.clone(),
                    })?;
                    if p.rhs.len() != children.len() {
                        return Err(ConfigError::ChildCount {
                            node: id.clone(),
                            expected: p.rhs.len(),
                            found: children.len(),
                        });
                    }
                    for (c, f) in children.iter().zip(&p.rhs) {
                        if !self.nodes.contains_key(c) {
                            return Err(ConfigError::MissingChild { parent: id.clone(), child: c.clone() });
                        }
                        if parent.insert(c, id).is_some() {
                            return Err(ConfigError::SharedChild(c.clone()));
                        }
                        if self.sort_of(g, c).as_deref() != Some(f.sort.as_str()) {
                            return Err(ConfigError::ChildSort { child: c.clone(), expected: f.sort.clone() });
                        }
                    }
                }
                NodeEq::Open(f) => {
                    let sort = g.sort(&f.sort).ok_or_else(|| ConfigError::BadForm(id.clone()))?;
                    if sort.n_inherited != f.inherited.len() || sort.n_synthesized != f.synthesized.len() {
                        return Err(ConfigError::BadForm(id.clone()));
                    }
                    let ys = f.synthesized_vars().ok_or_else(|| ConfigError::BadForm(id.clone()))?;
                    for y in ys {
                        if !outputs.insert(y.clone()) {
                            return Err(ConfigError::DuplicateOutput(y.clone()));
                        }
                    }
                }
            }
        }
        for id in self.nodes.keys() {
            if !parent.contains_key(id) && !self.roots.contains(id) {
                return Err(ConfigError::Orphan(id.clone()));
            }
        }
        for v in self.vars() {
            if v.ns == self.gen.ns {
                if let Some(n) = crate::terms::generated_index(&v.name) {
                    if n >= self.gen.next {
                        return Err(ConfigError::GeneratorBehind(v));
                    }
                }
            }
        }
        Ok(())
    }
}
