//! Static distributability: local dependency graphs, the strong-acyclicity fixed
//! point, and a bounded search for triggered-but-not-enabled productions.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    apply_production, canonical_text, canonicalize, enabled_set, init_config, Case, EngineError, NodeId, Status,
};
use crate::grammar::{annotate, Gag, Polarity, Production, Side};
use crate::terms::{CyclicError, Subst};

/// `k(i)` or `k<j>`; indices are 0-based, printed 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AttrOcc {
    pub form: usize,
    pub side: Side,
    pub attr: usize,
}

impl AttrOcc {
    pub fn inh(form: usize, attr: usize) -> Self {
        AttrOcc { form, side: Side::Inherited, attr }
    }

    pub fn syn(form: usize, attr: usize) -> Self {
        AttrOcc { form, side: Side::Synthesized, attr }
    }
}

impl fmt::Display for AttrOcc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.side {
            Side::Inherited => write!(f, "{}({})", self.form, self.attr + 1),
            Side::Synthesized => write!(f, "{}<{}>", self.form, self.attr + 1),
        }
    }
}

pub type Edges = BTreeSet<(AttrOcc, AttrOcc)>;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GldGraph {
    pub edges: Edges,
}

/// Edge from a variable's input occurrence to each of its output occurrences.
pub fn gld(p: &Production) -> GldGraph {
    let ann = annotate(p);
    let at = |o: &crate::grammar::Occurrence| AttrOcc {
        form: o.position.form,
        side: o.position.side,
        attr: o.position.attr,
    };
    let mut edges = Edges::new();
    for src in ann.occurrences.iter().filter(|o| o.polarity == Polarity::Input) {
        for dst in ann.occurrences.iter().filter(|o| o.polarity == Polarity::Output && o.var == src.var) {
            edges.insert((at(src), at(dst)));
        }
    }
    GldGraph { edges }
}

/// Over-approximations for one sort: pairs are 0-based `(syn, inh)` and `(inh, syn)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortRelations {
    pub si: BTreeSet<(usize, usize)>,
    pub is: BTreeSet<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub sort: String,
    pub production: String,
    /// Attribute occurrences of the left-hand side; the last one links back to the first.
    pub cycle: Vec<AttrOcc>,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G({}, {}): ", self.sort, self.production)?;
        for a in &self.cycle {
            write!(f, "{a} -> ")?;
        }
        match self.cycle.first() {
            Some(a) => write!(f, "{a}"),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Verdict {
    StronglyAcyclic,
    NotStronglyAcyclic { witnesses: Vec<Witness> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaticReport {
    pub verdict: Verdict,
    pub relations: BTreeMap<String, SortRelations>,
    /// Sweeps over the productions, the last one adding nothing.
    pub iterations: usize,
    /// `Σ n_inh · n_syn + 1` over all sorts.
    pub bound: usize,
    /// Total number of SI and IS pairs after rule 1 and after each sweep.
    #[serde(default)]
    pub growth: Vec<usize>,
}

impl StaticReport {
    pub fn is_strongly_acyclic(&self) -> bool {
        self.verdict == Verdict::StronglyAcyclic
    }
}

/// Transitive reachability from `from` in `edges`.
fn reachable(edges: &Edges, from: AttrOcc) -> BTreeSet<AttrOcc> {
    let mut adj: BTreeMap<AttrOcc, Vec<AttrOcc>> = BTreeMap::new();
    for (a, b) in edges {
        adj.entry(*a).or_default().push(*b);
    }
    let mut seen = BTreeSet::new();
    let mut todo = vec![from];
    while let Some(a) = todo.pop() {
        for b in adj.get(&a).into_iter().flatten() {
            if seen.insert(*b) {
                todo.push(*b);
            }
        }
    }
    seen
}

/// IS(P): an lhs pattern and an lhs output term share a variable.
pub fn production_is(p: &Production) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for (i, pat) in p.lhs.inherited.iter().enumerate() {
        let pv = pat.vars();
        for (j, u) in p.lhs.synthesized.iter().enumerate() {
            if u.vars().iter().any(|v| pv.contains(v)) {
                out.insert((i, j));
            }
        }
    }
    out
}

pub fn strong_acyclicity(g: &Gag) -> StaticReport {
    let mut rel: BTreeMap<String, SortRelations> =
        g.sorts.keys().map(|s| (s.clone(), SortRelations::default())).collect();

    // Rule 1: services seed SI of their sort.
    for svc in &g.services {
        for f in &svc.forms {
            let Some(r) = rel.get_mut(&f.sort) else {
                continue;
            };
            for (j, y) in f.synthesized.iter().enumerate() {
                let Some(y) = y.as_var() else { continue };
                for (i, d) in f.inherited.iter().enumerate() {
                    if d.occurs(y) {
                        r.si.insert((j, i));
                    }
                }
            }
        }
    }

    let size = |rel: &BTreeMap<String, SortRelations>| rel.values().map(|r| r.si.len() + r.is.len()).sum::<usize>();
    let mut growth = vec![size(&rel)];
    let glds: Vec<GldGraph> = g.productions.iter().map(gld).collect();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut changed = false;
        for (p, base) in g.productions.iter().zip(&glds) {
            let s0 = &p.lhs.sort;
            // Rule 3.
            let mut graph = base.edges.clone();
            for (k, f) in p.rhs.iter().enumerate() {
                if let Some(r) = rel.get(&f.sort) {
                    graph.extend(r.is.iter().map(|&(i, j)| (AttrOcc::inh(k + 1, i), AttrOcc::syn(k + 1, j))));
                }
            }
            let mut found = Vec::new();
            for i in 0..p.lhs.inherited.len() {
                let reach = reachable(&graph, AttrOcc::inh(0, i));
                for j in 0..p.lhs.synthesized.len() {
                    if reach.contains(&AttrOcc::syn(0, j)) {
                        found.push((i, j));
                    }
                }
            }
            if let Some(r) = rel.get_mut(s0) {
                for pair in found {
                    changed |= r.is.insert(pair);
                }
            }
            // Rule 2.
            for (k, fk) in p.rhs.iter().enumerate() {
                let mut graph = base.edges.clone();
                if let Some(r) = rel.get(s0) {
                    graph.extend(r.si.iter().map(|&(j, i)| (AttrOcc::syn(0, j), AttrOcc::inh(0, i))));
                }
                for (k2, f2) in p.rhs.iter().enumerate() {
                    if k2 == k {
                        continue;
                    }
                    if let Some(r) = rel.get(&f2.sort) {
                        graph.extend(r.is.iter().map(|&(i, j)| (AttrOcc::inh(k2 + 1, i), AttrOcc::syn(k2 + 1, j))));
                    }
                }
                let mut found = Vec::new();
                for j in 0..fk.synthesized.len() {
                    let reach = reachable(&graph, AttrOcc::syn(k + 1, j));
                    for i in 0..fk.inherited.len() {
                        if reach.contains(&AttrOcc::inh(k + 1, i)) {
                            found.push((j, i));
                        }
                    }
                }
                if let Some(r) = rel.get_mut(&fk.sort) {
                    for pair in found {
                        changed |= r.si.insert(pair);
                    }
                }
            }
        }
        growth.push(size(&rel));
        if !changed {
            break;
        }
    }

    let mut witnesses = Vec::new();
    for p in &g.productions {
        let Some(r) = rel.get(&p.lhs.sort) else {
            continue;
        };
        let mut edges = Edges::new();
        edges.extend(r.si.iter().map(|&(j, i)| (AttrOcc::syn(0, j), AttrOcc::inh(0, i))));
        edges.extend(production_is(p).into_iter().map(|(i, j)| (AttrOcc::inh(0, i), AttrOcc::syn(0, j))));
        if let Some(cycle) = find_cycle(&edges) {
            witnesses.push(Witness { sort: p.lhs.sort.clone(), production: p.name.clone(), cycle });
        }
    }
    let bound = g.sorts.values().map(|s| s.n_inherited * s.n_synthesized).sum::<usize>() + 1;
    let verdict =
        if witnesses.is_empty() { Verdict::StronglyAcyclic } else { Verdict::NotStronglyAcyclic { witnesses } };
    StaticReport { verdict, relations: rel, iterations, bound, growth }
}

/// First cycle met by a depth-first search in vertex order.
pub fn find_cycle(edges: &Edges) -> Option<Vec<AttrOcc>> {
    let mut adj: BTreeMap<AttrOcc, Vec<AttrOcc>> = BTreeMap::new();
    for (a, b) in edges {
        adj.entry(*a).or_default().push(*b);
        adj.entry(*b).or_default();
    }
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn dfs(
        a: AttrOcc,
        adj: &BTreeMap<AttrOcc, Vec<AttrOcc>>,
        marks: &mut BTreeMap<AttrOcc, Mark>,
        path: &mut Vec<AttrOcc>,
    ) -> Option<Vec<AttrOcc>> {
        marks.insert(a, Mark::Active);
        path.push(a);
        for &b in &adj[&a] {
            match marks.get(&b) {
                Some(Mark::Active) => {
                    let start = path.iter().position(|x| *x == b).unwrap_or(0);
                    return Some(path[start..].to_vec());
                }
                Some(Mark::Done) => {}
                None => {
                    if let Some(c) = dfs(b, adj, marks, path) {
                        return Some(c);
                    }
                }
            }
        }
        path.pop();
        marks.insert(a, Mark::Done);
        None
    }
    let mut marks = BTreeMap::new();
    for &a in adj.keys() {
        if !marks.contains_key(&a) {
            if let Some(c) = dfs(a, &adj, &mut marks, &mut Vec::new()) {
                return Some(c);
            }
        }
    }
    None
}

/// Re-walk a witness: every consecutive pair, and last to first, must be an edge of `G(s, P)`.
pub fn witness_closes(g: &Gag, report: &StaticReport, w: &Witness) -> bool {
    let (Some(p), Some(r)) = (g.production(&w.production), report.relations.get(&w.sort)) else {
        return false;
    };
    if w.cycle.is_empty() {
        return false;
    }
    let is = production_is(p);
    let edge = |a: &AttrOcc, b: &AttrOcc| match (a.side, b.side) {
        (Side::Synthesized, Side::Inherited) => r.si.contains(&(a.attr, b.attr)),
        (Side::Inherited, Side::Synthesized) => is.contains(&(a.attr, b.attr)),
        _ => false,
    };
    let n = w.cycle.len();
    (0..n).all(|k| edge(&w.cycle[k], &w.cycle[(k + 1) % n]))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    /// Number of applications leading to the configuration.
    pub depth: usize,
    /// Canonical text of the configuration.
    pub config: String,
    pub node: NodeId,
    pub production: String,
    pub cycle: CyclicError,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundedReport {
    pub depth: usize,
    pub states: usize,
    pub counterexamples: Vec<Counterexample>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum BoundedError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("explored more than {cap} states")]
    BudgetExceeded { cap: usize },
}

/// Explore every configuration reachable in at most `depth` steps, up to alpha-equivalence.
pub fn bounded_input_enabled_check(
    g: &Gag,
    case: &Case,
    depth: usize,
    state_cap: usize,
) -> Result<BoundedReport, BoundedError> {
    let start = canonicalize(&init_config(g, case)?);
    let mut seen: HashSet<String> = HashSet::new();
    seen.insert(canonical_text(&start));
    let mut queue = VecDeque::from([(start, 0usize)]);
    let mut counterexamples = Vec::new();
    while let Some((cfg, d)) = queue.pop_front() {
        for entry in enabled_set(&cfg, g) {
            match entry.status {
                Status::TriggeredOnly { cycle } => counterexamples.push(Counterexample {
                    depth: d,
                    config: canonical_text(&cfg),
                    node: entry.node,
                    production: entry.production,
                    cycle,
                }),
                Status::Enabled if d < depth => {
                    let mut next = cfg.clone();
                    if apply_production(&mut next, g, &entry.production, &entry.node, &Subst::new()).is_err() {
                        continue;
                    }
                    let next = canonicalize(&next);
                    if seen.insert(canonical_text(&next)) {
                        if seen.len() > state_cap {
                            return Err(BoundedError::BudgetExceeded { cap: state_cap });
                        }
                        queue.push_back((next, d + 1));
                    }
                }
                Status::Enabled => {}
            }
        }
    }
    Ok(BoundedReport { depth, states: seen.len(), counterexamples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textio::fixtures;

    fn edge_strings(p: &Production) -> Vec<String> {
        gld(p).edges.iter().map(|(a, b)| format!("{a}->{b}")).collect()
    }

    #[test]
    fn gld_of_fork_and_leaf() {
        let g = fixtures::flatten();
        assert_eq!(edge_strings(g.production("Fork").unwrap()), vec!["0(1)->2(1)", "1<1>->0<1>", "2<1>->1(1)"]);
        assert_eq!(edge_strings(g.production("Leaf_a").unwrap()), vec!["0(1)->0<1>"]);
        let g = fixtures::coroutines();
        assert!(gld(g.production("Par").unwrap()).edges.iter().all(|(a, b)| a.form > 0 && b.form > 0));
        let g = fixtures::occur_check();
        assert!(gld(g.production("R").unwrap()).edges.is_empty());
    }

    #[test]
    fn strict_grammars_are_rejected() {
        for g in [fixtures::strict_cyclic(), fixtures::strict_acyclic()] {
            let r = strong_acyclicity(&g);
            let Verdict::NotStronglyAcyclic { witnesses } = &r.verdict else { panic!("{r:?}") };
            assert!(witnesses.iter().all(|w| witness_closes(&g, &r, w)));
            assert!(r.iterations <= r.bound);
        }
    }

    #[test]
    fn flatten_fixed_point() {
        let g = fixtures::flatten();
        let r = strong_acyclicity(&g);
        assert!(r.is_strongly_acyclic());
        assert!(r.relations["bin"].si.is_empty());
        assert_eq!(r.relations["bin"].is, [(0, 0)].into());
    }

    #[test]
    fn cycle_finder() {
        let a = AttrOcc::inh(0, 0);
        let b = AttrOcc::syn(0, 0);
        assert_eq!(find_cycle(&[(a, b)].into()), None);
        assert_eq!(find_cycle(&[(a, b), (b, a)].into()), Some(vec![a, b]));
    }
}
