//! First-order terms over a ranked alphabet, substitutions in solved form,
//! linear pattern matching and unification with occur check.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Namespace of every variable and node that does not belong to a location.
pub const CENTRAL: &str = "central";

/// A constructor symbol with its arity.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Symbol {
    pub name: String,
    pub arity: usize,
}

impl Symbol {
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        Symbol { name: name.into(), arity }
    }
}

/// Serialized as `name` or `name@ns`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub name: String,
    pub ns: String,
}

impl Var {
    pub fn new(name: impl Into<String>) -> Self {
        Var { name: name.into(), ns: CENTRAL.to_string() }
    }

    pub fn in_ns(name: impl Into<String>, ns: impl Into<String>) -> Self {
        Var { name: name.into(), ns: ns.into() }
    }

    pub fn is_central(&self) -> bool {
        self.ns == CENTRAL
    }
}

/// Split `name@ns`; a bare name is central.
pub fn split_qualified(s: &str) -> Result<(String, String), String> {
    let (name, ns) = match s.split_once('@') {
        Some((n, ns)) => (n, ns),
        None => (s, CENTRAL),
    };
    let ident = |x: &str| {
        let mut cs = x.chars();
        matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
            && cs.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
    };
    if ident(name) && ident(ns) {
        Ok((name.to_string(), ns.to_string()))
    } else {
        Err(format!("`{s}` is not a name"))
    }
}

impl std::str::FromStr for Var {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        split_qualified(s).map(|(name, ns)| Var { name, ns })
    }
}

impl Serialize for Var {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Var {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_central() {
            write!(f, "{}", self.name)
        } else {
            write!(f, "{}@{}", self.name, self.ns)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Term {
    Var { var: Var },
    App { ctor: String, args: Vec<Term> },
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var { var: Var::new(name) }
    }

    pub fn from_var(v: Var) -> Term {
        Term::Var { var: v }
    }

    pub fn cst(ctor: &str) -> Term {
        Term::App { ctor: ctor.to_string(), args: Vec::new() }
    }

    pub fn app(ctor: &str, args: Vec<Term>) -> Term {
        Term::App { ctor: ctor.to_string(), args }
    }

    pub fn as_var(&self) -> Option<&Var> {
        match self {
            Term::Var { var } => Some(var),
            Term::App { .. } => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var { .. } => false,
            Term::App { args, .. } => args.iter().all(Term::is_ground),
        }
    }

    pub fn occurs(&self, x: &Var) -> bool {
        match self {
            Term::Var { var } => var == x,
            Term::App { args, .. } => args.iter().any(|a| a.occurs(x)),
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Term::Var { var } => {
                out.insert(var.clone());
            }
            Term::App { args, .. } => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    /// Variables in left-to-right order of first occurrence.
    pub fn vars_in_order(&self, out: &mut Vec<Var>) {
        match self {
            Term::Var { var } => {
                if !out.contains(var) {
                    out.push(var.clone());
                }
            }
            Term::App { args, .. } => args.iter().for_each(|a| a.vars_in_order(out)),
        }
    }

    /// Every variable occurrence with its argument path.
    pub fn var_occurrences(&self) -> Vec<(Vec<usize>, Var)> {
        fn go(t: &Term, path: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, Var)>) {
            match t {
                Term::Var { var } => out.push((path.clone(), var.clone())),
                Term::App { args, .. } => {
                    for (i, a) in args.iter().enumerate() {
                        path.push(i);
                        go(a, path, out);
                        path.pop();
                    }
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn size(&self) -> usize {
        match self {
            Term::Var { .. } => 1,
            Term::App { args, .. } => 1 + args.iter().map(Term::size).sum::<usize>(),
        }
    }

    pub fn apply(&self, s: &Subst) -> Term {
        apply_subst(self, s)
    }

    /// Apply a mapping to variable names, leaving the term shape alone.
    pub fn map_vars(&self, f: &mut impl FnMut(&Var) -> Term) -> Term {
        match self {
            Term::Var { var } => f(var),
            Term::App { ctor, args } => {
                Term::App { ctor: ctor.clone(), args: args.iter().map(|a| a.map_vars(f)).collect() }
            }
        }
    }

    /// Check the term against an alphabet.
    pub fn check_arity(&self, arity_of: &impl Fn(&str) -> Option<usize>) -> Result<(), ArityError> {
        match self {
            Term::Var { .. } => Ok(()),
            Term::App { ctor, args } => {
                match arity_of(ctor) {
                    None => return Err(ArityError::UnknownConstructor(ctor.clone())),
                    Some(n) if n != args.len() => {
                        return Err(ArityError::Mismatch { ctor: ctor.clone(), expected: n, found: args.len() })
                    }
                    Some(_) => {}
                }
                args.iter().try_for_each(|a| a.check_arity(arity_of))
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var { var } => write!(f, "{var}"),
            Term::App { ctor, args } if args.is_empty() => write!(f, "{ctor}"),
            Term::App { ctor, args } => {
                write!(f, "{ctor}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ArityError {
    #[error("unknown constructor `{0}`")]
    UnknownConstructor(String),
    #[error("constructor `{ctor}` expects {expected} arguments, found {found}")]
    Mismatch { ctor: String, expected: usize, found: usize },
}

/// A finite map from variables to terms.
///
/// Most constructors keep it in solved form; [`Subst::is_solved`] checks it.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Subst {
    map: BTreeMap<Var, Term>,
}

impl Subst {
    pub fn new() -> Self {
        Subst::default()
    }

    pub fn singleton(x: Var, t: Term) -> Self {
        let mut s = Subst::new();
        s.insert(x, t);
        s
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Var, Term)>) -> Self {
        Subst { map: pairs.into_iter().collect() }
    }

    pub fn insert(&mut self, x: Var, t: Term) -> Option<Term> {
        self.map.insert(x, t)
    }

    pub fn get(&self, x: &Var) -> Option<&Term> {
        self.map.get(x)
    }

    pub fn remove(&mut self, x: &Var) -> Option<Term> {
        self.map.remove(x)
    }

    pub fn contains(&self, x: &Var) -> bool {
        self.map.contains_key(x)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Term)> {
        self.map.iter()
    }

    pub fn domain(&self) -> BTreeSet<Var> {
        self.map.keys().cloned().collect()
    }

    pub fn range_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for t in self.map.values() {
            t.collect_vars(&mut out);
        }
        out
    }

    /// No domain variable occurs in any image.
    pub fn is_solved(&self) -> bool {
        self.map.values().all(|t| t.vars().iter().all(|v| !self.map.contains_key(v)))
    }

    pub fn restrict(&self, keep: impl Fn(&Var) -> bool) -> Subst {
        Subst { map: self.map.iter().filter(|(k, _)| keep(k)).map(|(k, v)| (k.clone(), v.clone())).collect() }
    }

    pub fn into_pairs(self) -> Vec<(Var, Term)> {
        self.map.into_iter().collect()
    }

    /// `σσ′`, re-solved when the plain composition leaves a domain variable in an image.
    pub fn compose(&self, other: &Subst) -> Result<Subst, CyclicError> {
        compose(self, other)
    }
}

impl FromIterator<(Var, Term)> for Subst {
    fn from_iter<I: IntoIterator<Item = (Var, Term)>>(iter: I) -> Self {
        Subst::from_pairs(iter)
    }
}

impl fmt::Display for Subst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (x, t)) in self.map.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{x} = {t}")?;
        }
        f.write_str("}")
    }
}

/// Simultaneous replacement of every bound variable.
pub fn apply_subst(t: &Term, s: &Subst) -> Term {
    if s.is_empty() {
        return t.clone();
    }
    match t {
        Term::Var { var } => s.get(var).cloned().unwrap_or_else(|| t.clone()),
        Term::App { ctor, args } => {
            Term::App { ctor: ctor.clone(), args: args.iter().map(|a| apply_subst(a, s)).collect() }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum MatchError {
    #[error("constructor clash: pattern `{pattern}` against data `{data}`")]
    Clash { pattern: String, data: String },
    #[error("pattern `{pattern}` waits on unrefined data `{data}`")]
    Unrefined { pattern: String, data: String },
    #[error("constructor `{ctor}` used with {left} and {right} arguments")]
    Arity { ctor: String, left: usize, right: usize },
    #[error("pattern variable `{0}` occurs more than once")]
    NonLinear(Var),
}

/// Linear pattern matching: `match(c(p..), c(d..)) = Σ match(p_i, d_i)` and `match(x, d) = {x = d}`.
pub fn match_term(pattern: &Term, data: &Term) -> Result<Subst, MatchError> {
    let mut out = Subst::new();
    match_into(pattern, data, &mut out)?;
    Ok(out)
}

/// Match into an accumulator shared by several patterns (the sum of matches).
pub fn match_into(pattern: &Term, data: &Term, acc: &mut Subst) -> Result<(), MatchError> {
    match (pattern, data) {
        (Term::Var { var }, _) => {
            if acc.insert(var.clone(), data.clone()).is_some() {
                return Err(MatchError::NonLinear(var.clone()));
            }
            Ok(())
        }
        (Term::App { ctor: c, args: ps }, Term::App { ctor: d, args: ds }) => {
            if c != d {
                return Err(MatchError::Clash { pattern: pattern.to_string(), data: data.to_string() });
            }
            if ps.len() != ds.len() {
                return Err(MatchError::Arity { ctor: c.clone(), left: ps.len(), right: ds.len() });
            }
            ps.iter().zip(ds).try_for_each(|(p, d)| match_into(p, d, acc))
        }
        (Term::App { .. }, Term::Var { .. }) => {
            Err(MatchError::Unrefined { pattern: pattern.to_string(), data: data.to_string() })
        }
    }
}

/// Occur-check failure with the witness cycle `x1 ≻ x2 ≻ … ≻ x1`.
#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("cyclic equations through {}", display_cycle(.cycle))]
pub struct CyclicError {
    pub cycle: Vec<Var>,
}

fn display_cycle(c: &[Var]) -> String {
    c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" > ")
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Cyclic(#[from] CyclicError),
    #[error("variable `{0}` is defined twice")]
    DuplicateLhs(Var),
}

/// Solve `{x_i = t_i}` by iterated replacement of right-hand sides.
///
/// `x = x` counts as a cycle: it is no definition of `x`.
pub fn solve(equations: &[(Var, Term)]) -> Result<Subst, SolveError> {
    let mut defs: BTreeMap<&Var, &Term> = BTreeMap::new();
    for (x, t) in equations {
        if defs.insert(x, t).is_some() {
            return Err(SolveError::DuplicateLhs(x.clone()));
        }
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    let mut marks: BTreeMap<&Var, Mark> = BTreeMap::new();
    let mut solved: BTreeMap<&Var, Term> = BTreeMap::new();

    // Iterative depth-first resolution; the stack doubles as the witness path.
    for root in defs.keys().copied() {
        if marks.contains_key(root) {
            continue;
        }
        let mut stack: Vec<(&Var, Vec<&Var>)> = vec![(root, pending_deps(defs[root], &defs))];
        marks.insert(root, Mark::Active);
        while let Some((x, deps)) = stack.last_mut() {
            let x = *x;
            if let Some(y) = deps.pop() {
                match marks.get(y) {
                    Some(Mark::Done) => {}
                    Some(Mark::Active) => {
                        let start = stack.iter().position(|(v, _)| *v == y).unwrap_or(0);
                        let cycle = stack[start..].iter().map(|(v, _)| (*v).clone()).collect();
                        return Err(CyclicError { cycle }.into());
                    }
                    None => {
                        marks.insert(y, Mark::Active);
                        stack.push((y, pending_deps(defs[y], &defs)));
                    }
                }
            } else {
                let value = defs[x].map_vars(&mut |v| match solved.get(v) {
                    Some(t) => t.clone(),
                    None => Term::from_var(v.clone()),
                });
                solved.insert(x, value);
                marks.insert(x, Mark::Done);
                stack.pop();
            }
        }
    }
    Ok(solved.into_iter().map(|(k, v)| (k.clone(), v)).collect())
}

fn pending_deps<'a>(t: &Term, defs: &BTreeMap<&'a Var, &'a Term>) -> Vec<&'a Var> {
    let mut vs = Vec::new();
    t.vars_in_order(&mut vs);
    // Reverse so that `pop` visits dependencies left to right.
    vs.iter().rev().filter_map(|v| defs.get_key_value(v).map(|(k, _)| *k)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum UnifyError {
    #[error("cannot unify `{left}` with `{right}`")]
    Clash { left: Term, right: Term },
    #[error("occur check: `{var}` occurs in `{term}`")]
    OccurCheck { var: Var, term: Term },
}

/// Most general unifier by the Martelli–Montanari rules.
///
/// Bindings are kept triangular (a variable's value may mention bound variables)
/// and resolved once at the end, so long copy chains stay linear.
pub fn unify(goals: &[(Term, Term)]) -> Result<Subst, UnifyError> {
    let mut todo: Vec<(Term, Term)> = goals.iter().rev().cloned().collect();
    let mut bound: BTreeMap<Var, Term> = BTreeMap::new();
    while let Some((l, r)) = todo.pop() {
        match (walk(l, &bound), walk(r, &bound)) {
            // decompose / clash
            (Term::App { ctor: c, args: ls }, Term::App { ctor: d, args: rs }) => {
                if c != d || ls.len() != rs.len() {
                    return Err(UnifyError::Clash {
                        left: Term::App { ctor: c, args: ls },
                        right: Term::App { ctor: d, args: rs },
                    });
                }
                todo.extend(ls.into_iter().zip(rs).rev());
            }
            // delete
            (Term::Var { var: x }, Term::Var { var: y }) if x == y => {}
            // occur check / eliminate, after orienting
            (Term::Var { var: x }, t) | (t, Term::Var { var: x }) => {
                if occurs_through(&x, &t, &bound) {
                    return Err(UnifyError::OccurCheck { var: x, term: t });
                }
                bound.insert(x, t);
            }
        }
    }
    let pairs: Vec<(Var, Term)> = bound.into_iter().collect();
    match solve(&pairs) {
        Ok(s) => Ok(s),
        Err(e) => unreachable!("occur check keeps bindings acyclic: {e}"),
    }
}

fn walk(mut t: Term, bound: &BTreeMap<Var, Term>) -> Term {
    while let Term::Var { var } = &t {
        match bound.get(var) {
            Some(u) => t = u.clone(),
            None => break,
        }
    }
    t
}

/// Does `x` occur in `t` once bound variables are expanded?
fn occurs_through(x: &Var, t: &Term, bound: &BTreeMap<Var, Term>) -> bool {
    let mut seen: BTreeSet<&Var> = BTreeSet::new();
    let mut todo: Vec<&Term> = vec![t];
    while let Some(t) = todo.pop() {
        match t {
            Term::Var { var } => {
                if var == x {
                    return true;
                }
                if seen.insert(var) {
                    if let Some(u) = bound.get(var) {
                        todo.push(u);
                    }
                }
            }
            Term::App { args, .. } => todo.extend(args.iter()),
        }
    }
    false
}

/// `σσ′ = {x = tσ′ | x = t ∈ σ} ∪ {y = u ∈ σ′ | y ∉ dom σ}`.
pub fn compose(s: &Subst, t: &Subst) -> Result<Subst, CyclicError> {
    let mut out: Subst = s.iter().map(|(x, u)| (x.clone(), apply_subst(u, t))).collect();
    for (y, u) in t.iter() {
        if !out.contains(y) {
            out.insert(y.clone(), u.clone());
        }
    }
    // Drop trivial bindings x = x left by the composition.
    let out: Subst = out.into_pairs().into_iter().filter(|(x, u)| u.as_var() != Some(x)).collect();
    if out.is_solved() {
        return Ok(out);
    }
    match solve(&out.into_pairs()) {
        Ok(s) => Ok(s),
        Err(SolveError::Cyclic(c)) => Err(c),
        Err(SolveError::DuplicateLhs(_)) => unreachable!("a map has unique keys"),
    }
}

/// Per-namespace monotone counter issuing `v0, v1, …`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NameGen {
    pub ns: String,
    pub next: u64,
}

impl NameGen {
    pub fn new(ns: impl Into<String>) -> Self {
        NameGen { ns: ns.into(), next: 0 }
    }

    pub fn starting_at(ns: impl Into<String>, next: u64) -> Self {
        NameGen { ns: ns.into(), next }
    }

    pub fn fresh_name(&mut self) -> String {
        let n = self.next;
        self.next += 1;
        format!("v{n}")
    }

    pub fn fresh(&mut self) -> Var {
        let name = self.fresh_name();
        Var::in_ns(name, self.ns.clone())
    }

    /// Make sure a name read from input is never issued again.
    pub fn reserve(&mut self, name: &str) {
        if let Some(n) = generated_index(name) {
            if n >= self.next {
                self.next = n + 1;
            }
        }
    }
}

/// `Some(n)` when the name has the shape `v<n>` of generated names.
pub fn generated_index(name: &str) -> Option<u64> {
    let digits = name.strip_prefix('v')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if digits.len() > 1 && digits.starts_with('0') {
        return None;
    }
    digits.parse().ok()
}

/// Injective renaming of `vars` to fresh names, in variable order.
pub fn fresh_rename(vars: &BTreeSet<Var>, gen: &mut NameGen) -> Subst {
    vars.iter().map(|v| (v.clone(), Term::from_var(gen.fresh()))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Term {
        Term::var(n)
    }
    fn c(n: &str) -> Term {
        Term::cst(n)
    }
    fn a(f: &str, args: Vec<Term>) -> Term {
        Term::app(f, args)
    }
    fn x(n: &str) -> Var {
        Var::new(n)
    }

    #[test]
    fn match_binds_arguments() {
        let s = match_term(&a("a", vec![v("x1"), v("x2")]), &a("a", vec![c("t1"), c("t2")])).unwrap();
        assert_eq!(s, Subst::from_pairs([(x("x1"), c("t1")), (x("x2"), c("t2"))]));
    }

    #[test]
    fn match_constants_is_empty() {
        assert_eq!(match_term(&c("c"), &c("c")).unwrap(), Subst::new());
    }

    #[test]
    fn match_clash() {
        let e = match_term(&c("Nil"), &a("Cons_a", vec![c("Nil")])).unwrap_err();
        assert!(matches!(e, MatchError::Clash { .. }));
    }

    #[test]
    fn match_against_variable_is_not_triggered() {
        let e = match_term(&a("a", vec![v("y")]), &v("x")).unwrap_err();
        assert!(matches!(e, MatchError::Unrefined { .. }));
    }

    #[test]
    fn match_rejects_nonlinear_pattern() {
        let e = match_term(&a("f", vec![v("x"), v("x")]), &a("f", vec![c("a"), c("a")])).unwrap_err();
        assert_eq!(e, MatchError::NonLinear(x("x")));
    }

    #[test]
    fn solve_examples() {
        assert_eq!(solve(&[(x("x"), v("u"))]).unwrap(), Subst::singleton(x("x"), v("u")));
        assert_eq!(solve(&[]).unwrap(), Subst::new());
        let err = solve(&[(x("x"), a("a", vec![a("a", vec![v("x")])]))]).unwrap_err();
        assert_eq!(err, SolveError::Cyclic(CyclicError { cycle: vec![x("x")] }));
    }

    #[test]
    fn solve_chains_and_longer_cycles() {
        let s = solve(&[(x("x"), a("f", vec![v("y")])), (x("y"), a("g", vec![v("z")]))]).unwrap();
        assert_eq!(s.get(&x("x")), Some(&a("f", vec![a("g", vec![v("z")])])));
        assert!(s.is_solved());
        let err = solve(&[(x("x"), v("y")), (x("y"), a("g", vec![v("x")]))]).unwrap_err();
        let SolveError::Cyclic(c) = err else { panic!() };
        assert_eq!(c.cycle, vec![x("x"), x("y")]);
    }

    #[test]
    fn solve_rejects_duplicate_lhs() {
        assert!(matches!(solve(&[(x("x"), c("a")), (x("x"), c("b"))]), Err(SolveError::DuplicateLhs(_))));
    }

    #[test]
    fn unify_examples() {
        assert_eq!(unify(&[(v("x"), v("x"))]).unwrap(), Subst::new());
        let goals = [(a("f", vec![v("x"), c("b")]), a("f", vec![c("a"), v("y")]))];
        let s = unify(&goals).unwrap();
        assert_eq!(s, Subst::from_pairs([(x("x"), c("a")), (x("y"), c("b"))]));
        assert_eq!(goals[0].0.apply(&s), goals[0].1.apply(&s));
        // root()<u> against root()<x>, componentwise.
        assert_eq!(unify(&[(v("x"), v("u"))]).unwrap(), Subst::singleton(x("x"), v("u")));
    }

    #[test]
    fn unify_failures() {
        assert!(matches!(unify(&[(c("a"), c("b"))]), Err(UnifyError::Clash { .. })));
        assert!(matches!(unify(&[(v("x"), a("f", vec![v("x")]))]), Err(UnifyError::OccurCheck { .. })));
        assert!(matches!(unify(&[(a("f", vec![v("x")]), v("x"))]), Err(UnifyError::OccurCheck { .. })));
    }

    #[test]
    fn apply_examples() {
        let s = Subst::singleton(x("x"), c("Nil"));
        assert_eq!(a("a", vec![v("x"), v("y")]).apply(&s), a("a", vec![c("Nil"), v("y")]));
        let s = Subst::singleton(x("x"), v("z"));
        assert_eq!(a("Cons_a", vec![v("x")]).apply(&s), a("Cons_a", vec![v("z")]));
        assert_eq!(c("c").apply(&s), c("c"));
    }

    #[test]
    fn compose_examples() {
        let s = compose(&Subst::singleton(x("x"), v("y")), &Subst::singleton(x("y"), c("Nil"))).unwrap();
        assert_eq!(s, Subst::from_pairs([(x("x"), c("Nil")), (x("y"), c("Nil"))]));
        let t = Subst::singleton(x("q"), c("b"));
        assert_eq!(compose(&Subst::new(), &t).unwrap(), t);
        let s = compose(&Subst::singleton(x("x"), a("a", vec![v("z")])), &Subst::singleton(x("z"), c("b"))).unwrap();
        assert_eq!(s, Subst::from_pairs([(x("x"), a("a", vec![c("b")])), (x("z"), c("b"))]));
    }

    #[test]
    fn compose_reports_cycles() {
        let err =
            compose(&Subst::singleton(x("x"), a("f", vec![v("y")])), &Subst::singleton(x("y"), a("g", vec![v("x")])));
        assert!(err.is_err());
    }

    #[test]
    fn fresh_rename_examples() {
        let mut g = NameGen::new(CENTRAL);
        assert_eq!(fresh_rename(&[x("x")].into(), &mut g), Subst::singleton(x("x"), v("v0")));
        assert_eq!(fresh_rename(&BTreeSet::new(), &mut g), Subst::new());
        let mut g = NameGen::starting_at(CENTRAL, 5);
        assert_eq!(
            fresh_rename(&[x("y"), x("x")].into(), &mut g),
            Subst::from_pairs([(x("x"), v("v5")), (x("y"), v("v6"))])
        );
    }

    #[test]
    fn generator_skips_reserved_names() {
        let mut g = NameGen::new(CENTRAL);
        g.reserve("v7");
        g.reserve("v07");
        g.reserve("vx");
        assert_eq!(g.fresh_name(), "v8");
    }

    #[test]
    fn display_forms() {
        assert_eq!(a("Cons_a", vec![c("Nil")]).to_string(), "Cons_a(Nil)");
        assert_eq!(Term::from_var(Var::in_ns("x", "L1")).to_string(), "x@L1");
        assert_eq!(Subst::from_pairs([(x("x"), c("a")), (x("y"), v("z"))]).to_string(), "{x = a, y = z}");
    }
}
