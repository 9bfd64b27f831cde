//! Sorts, forms, productions and grammars; validation, polarity annotation and link graphs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::terms::{apply_subst, Subst, Symbol, Term, Var};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sort {
    pub name: String,
    pub n_inherited: usize,
    pub n_synthesized: usize,
    /// Optional attribute names; empty when the sort was declared by counts.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inherited_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub synthesized_names: Vec<String>,
}

impl Sort {
    pub fn new(name: impl Into<String>, n_inherited: usize, n_synthesized: usize) -> Self {
        Sort {
            name: name.into(),
            n_inherited,
            n_synthesized,
            inherited_names: Vec::new(),
            synthesized_names: Vec::new(),
        }
    }
}

/// `s(t1..tn)<u1..um>`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Form {
    pub sort: String,
    pub inherited: Vec<Term>,
    pub synthesized: Vec<Term>,
}

impl Form {
    pub fn new(sort: impl Into<String>, inherited: Vec<Term>, synthesized: Vec<Term>) -> Self {
        Form { sort: sort.into(), inherited, synthesized }
    }

    pub fn apply(&self, s: &Subst) -> Form {
        Form {
            sort: self.sort.clone(),
            inherited: self.inherited.iter().map(|t| apply_subst(t, s)).collect(),
            synthesized: self.synthesized.iter().map(|t| apply_subst(t, s)).collect(),
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.inherited.iter().chain(&self.synthesized).for_each(|t| t.collect_vars(&mut out));
        out
    }

    pub fn map_vars(&self, f: &mut impl FnMut(&Var) -> Term) -> Form {
        Form {
            sort: self.sort.clone(),
            inherited: self.inherited.iter().map(|t| t.map_vars(f)).collect(),
            synthesized: self.synthesized.iter().map(|t| t.map_vars(f)).collect(),
        }
    }

    /// Synthesized entries as variables, when the form is a service call.
    pub fn synthesized_vars(&self) -> Option<Vec<&Var>> {
        self.synthesized.iter().map(Term::as_var).collect()
    }

    /// Synthesized entries are pairwise distinct variables.
    pub fn is_service_call(&self) -> bool {
        match self.synthesized_vars() {
            Some(vs) => vs.iter().collect::<BTreeSet<_>>().len() == vs.len(),
            None => false,
        }
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.sort)?;
        write_list(f, &self.inherited)?;
        f.write_str(")<")?;
        write_list(f, &self.synthesized)?;
        f.write_str(">")
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, ts: &[Term]) -> fmt::Result {
    for (i, t) in ts.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{t}")?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Production {
    pub name: String,
    pub lhs: Form,
    pub rhs: Vec<Form>,
}

impl Production {
    pub fn new(name: impl Into<String>, lhs: Form, rhs: Vec<Form>) -> Self {
        Production { name: name.into(), lhs, rhs }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = self.lhs.vars();
        for f in &self.rhs {
            out.extend(f.vars());
        }
        out
    }

    pub fn apply(&self, s: &Subst) -> Production {
        Production {
            name: self.name.clone(),
            lhs: self.lhs.apply(s),
            rhs: self.rhs.iter().map(|f| f.apply(s)).collect(),
        }
    }

    /// Variables with no input occurrence.
    pub fn parameters(&self) -> BTreeSet<Var> {
        let ann = annotate(self);
        let inputs: BTreeSet<&Var> =
            ann.occurrences.iter().filter(|o| o.polarity == Polarity::Input).map(|o| &o.var).collect();
        self.vars().into_iter().filter(|v| !inputs.contains(v)).collect()
    }
}

impl fmt::Display for Production {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.name, self.lhs)?;
        if !self.rhs.is_empty() {
            f.write_str(" <-")?;
            for form in &self.rhs {
                write!(f, " {form}")?;
            }
        }
        Ok(())
    }
}

/// A named interface entry; several forms describe a multi-root case.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Service {
    pub name: String,
    pub forms: Vec<Form>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gag {
    pub symbols: IndexMap<String, Symbol>,
    pub sorts: IndexMap<String, Sort>,
    pub productions: Vec<Production>,
    pub services: Vec<Service>,
    /// Declared location → sorts, in declaration order.
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub partition: IndexMap<String, Vec<String>>,
}

impl Gag {
    pub fn arity(&self, ctor: &str) -> Option<usize> {
        self.symbols.get(ctor).map(|s| s.arity)
    }

    pub fn sort(&self, name: &str) -> Option<&Sort> {
        self.sorts.get(name)
    }

    pub fn production(&self, name: &str) -> Option<&Production> {
        self.productions.iter().find(|p| p.name == name)
    }

    pub fn production_index(&self, name: &str) -> Option<usize> {
        self.productions.iter().position(|p| p.name == name)
    }

    pub fn service(&self, name: &str) -> Option<&Service> {
        self.services.iter().find(|s| s.name == name)
    }

    pub fn productions_of_sort<'a>(&'a self, sort: &'a str) -> impl Iterator<Item = &'a Production> + 'a {
        self.productions.iter().filter(move |p| p.lhs.sort == sort)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Inherited,
    Synthesized,
}

/// Where a variable occurrence sits: form index (0 is the lhs), side, attribute, argument path.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Position {
    pub form: usize,
    pub side: Side,
    pub attr: usize,
    pub path: Vec<usize>,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.side {
            Side::Inherited => write!(f, "{}({})", self.form, self.attr + 1)?,
            Side::Synthesized => write!(f, "{}<{}>", self.form, self.attr + 1)?,
        }
        for p in &self.path {
            write!(f, ".{}", p + 1)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// `x?`
    Input,
    /// `x!`
    Output,
}

/// How a whole form is labeled: `?F` for a left-hand side, `!F` for a call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Label {
    Query,
    Bang,
}

impl Label {
    pub fn polarity(self, side: Side) -> Polarity {
        match (self, side) {
            (Label::Query, Side::Inherited) | (Label::Bang, Side::Synthesized) => Polarity::Input,
            (Label::Query, Side::Synthesized) | (Label::Bang, Side::Inherited) => Polarity::Output,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occurrence {
    pub var: Var,
    pub polarity: Polarity,
    pub position: Position,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Annotated {
    pub production: Production,
    pub occurrences: Vec<Occurrence>,
}

impl fmt::Display for Annotated {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = |pos: &Position, t: &Term| -> Term {
            tag_term(t, &mut Vec::new(), &|path: &[usize]| {
                self.occurrences
                    .iter()
                    .find(|o| {
                        o.position.form == pos.form
                            && o.position.side == pos.side
                            && o.position.attr == pos.attr
                            && o.position.path == path
                    })
                    .map(|o| o.polarity)
            })
        };
        let show = |k: usize, form: &Form| -> Form {
            Form {
                sort: form.sort.clone(),
                inherited: form
                    .inherited
                    .iter()
                    .enumerate()
                    .map(|(i, t)| tag(&Position { form: k, side: Side::Inherited, attr: i, path: vec![] }, t))
                    .collect(),
                synthesized: form
                    .synthesized
                    .iter()
                    .enumerate()
                    .map(|(j, t)| tag(&Position { form: k, side: Side::Synthesized, attr: j, path: vec![] }, t))
                    .collect(),
            }
        };
        write!(f, "{}", show(0, &self.production.lhs))?;
        if !self.production.rhs.is_empty() {
            f.write_str(" <-")?;
            for (k, form) in self.production.rhs.iter().enumerate() {
                write!(f, " {}", show(k + 1, form))?;
            }
        }
        Ok(())
    }
}

fn tag_term(t: &Term, path: &mut Vec<usize>, pol: &dyn Fn(&[usize]) -> Option<Polarity>) -> Term {
    match t {
        Term::Var { var } => {
            let mark = match pol(path) {
                Some(Polarity::Input) => "?",
                Some(Polarity::Output) => "!",
                None => "",
            };
            Term::from_var(Var { name: format!("{}{mark}", var.name), ns: var.ns.clone() })
        }
        Term::App { ctor, args } => Term::App {
            ctor: ctor.clone(),
            args: args
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    path.push(i);
                    let r = tag_term(a, path, pol);
                    path.pop();
                    r
                })
                .collect(),
        },
    }
}

/// Occurrences of a labeled form at index `k`.
pub fn form_occurrences(k: usize, label: Label, form: &Form) -> Vec<Occurrence> {
    let mut out = Vec::new();
    for (side, terms) in [(Side::Inherited, &form.inherited), (Side::Synthesized, &form.synthesized)] {
        for (attr, t) in terms.iter().enumerate() {
            for (path, var) in t.var_occurrences() {
                out.push(Occurrence {
                    var,
                    polarity: label.polarity(side),
                    position: Position { form: k, side, attr, path },
                });
            }
        }
    }
    out
}

/// `!(F0 <- F1..Fk) = ?(F0) <- !(F1)..!(Fk)`.
pub fn annotate(p: &Production) -> Annotated {
    let mut occurrences = form_occurrences(0, Label::Query, &p.lhs);
    for (k, f) in p.rhs.iter().enumerate() {
        occurrences.extend(form_occurrences(k + 1, Label::Bang, f));
    }
    Annotated { production: p.clone(), occurrences }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkGraph {
    pub vertices: Vec<Occurrence>,
    /// Indices into `vertices`, from the `?` occurrence to a `!` occurrence.
    pub edges: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("variable `{var}` has input occurrences at {first} and {second}")]
pub struct AdmissibilityError {
    pub var: Var,
    pub first: Position,
    pub second: Position,
}

pub fn link_graph(forms: &[(Label, &Form)]) -> Result<LinkGraph, AdmissibilityError> {
    let mut vertices = Vec::new();
    for (k, (label, form)) in forms.iter().enumerate() {
        vertices.extend(form_occurrences(k, *label, form));
    }
    let mut source: BTreeMap<&Var, usize> = BTreeMap::new();
    for (i, o) in vertices.iter().enumerate() {
        if o.polarity == Polarity::Input {
            if let Some(&j) = source.get(&o.var) {
                return Err(AdmissibilityError {
                    var: o.var.clone(),
                    first: vertices[j].position.clone(),
                    second: o.position.clone(),
                });
            }
            source.insert(&o.var, i);
        }
    }
    let mut edges = Vec::new();
    for (i, o) in vertices.iter().enumerate() {
        if o.polarity == Polarity::Output {
            if let Some(&s) = source.get(&o.var) {
                edges.push((s, i));
            }
        }
    }
    edges.sort();
    Ok(LinkGraph { vertices, edges })
}

/// Link graph of the annotated forms of a production.
pub fn production_link_graph(p: &Production) -> Result<LinkGraph, AdmissibilityError> {
    let mut forms = vec![(Label::Query, &p.lhs)];
    forms.extend(p.rhs.iter().map(|f| (Label::Bang, f)));
    link_graph(&forms)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "lowercase")]
pub enum Site {
    Sort(usize),
    Production(usize),
    Service(usize),
    Partition(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ViolationKind {
    DuplicateInputOccurrence { var: Var },
    NonDistinctSynthesized { var: Var },
    NonVariableSynthesized { term: String },
    UnknownConstructor { ctor: String },
    ArityMismatch { ctor: String, expected: usize, found: usize },
    UndeclaredSort { sort: String },
    AttributeCountMismatch { sort: String, inherited: usize, synthesized: usize },
    DuplicateName { name: String },
    UnknownPartitionSort { sort: String },
    SortInTwoLocations { sort: String },
    SortWithoutLocation { sort: String },
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::DuplicateInputOccurrence { var } => {
                write!(f, "DuplicateInputOccurrence({var})")
            }
            ViolationKind::NonDistinctSynthesized { var } => {
                write!(f, "NonDistinctSynthesized({var})")
            }
            ViolationKind::NonVariableSynthesized { term } => {
                write!(f, "NonVariableSynthesized({term})")
            }
            ViolationKind::UnknownConstructor { ctor } => write!(f, "UnknownConstructor({ctor})"),
            ViolationKind::ArityMismatch { ctor, expected, found } => {
                write!(f, "ArityMismatch({ctor}: expected {expected}, found {found})")
            }
            ViolationKind::UndeclaredSort { sort } => write!(f, "UndeclaredSort({sort})"),
            ViolationKind::AttributeCountMismatch { sort, inherited, synthesized } => {
                write!(f, "AttributeCountMismatch({sort}: used with {inherited} inherited, {synthesized} synthesized)")
            }
            ViolationKind::DuplicateName { name } => write!(f, "DuplicateName({name})"),
            ViolationKind::UnknownPartitionSort { sort } => {
                write!(f, "UnknownPartitionSort({sort})")
            }
            ViolationKind::SortInTwoLocations { sort } => write!(f, "SortInTwoLocations({sort})"),
            ViolationKind::SortWithoutLocation { sort } => write!(f, "SortWithoutLocation({sort})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub site: Site,
    /// Name of the production, service, sort or location at `site`.
    pub name: String,
    pub position: Option<Position>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.site {
            Site::Sort(_) => "sort",
            Site::Production(_) => "production",
            Site::Service(_) => "service",
            Site::Partition(_) => "location",
        };
        write!(f, "{what} {}", self.name)?;
        if let Some(p) = &self.position {
            write!(f, " at {p}")?;
        }
        write!(f, ": {}", self.kind)
    }
}

/// All well-formedness violations, sorted by site and position.
pub fn validate(g: &Gag) -> Vec<Violation> {
    let mut out = Vec::new();
    let arity = |c: &str| g.arity(c);

    let mut seen = BTreeSet::new();
    for (i, p) in g.productions.iter().enumerate() {
        let site = Site::Production(i);
        let mut push = |position: Option<Position>, kind| {
            out.push(Violation { site: site.clone(), name: p.name.clone(), position, kind })
        };
        if !seen.insert(p.name.as_str()) {
            push(None, ViolationKind::DuplicateName { name: p.name.clone() });
        }
        let forms: Vec<&Form> = std::iter::once(&p.lhs).chain(&p.rhs).collect();
        for (k, form) in forms.iter().enumerate() {
            check_form_shape(g, k, form, &arity, &mut push);
        }
        // Synthesized entries of each call must be distinct variables.
        let mut call_dups = BTreeSet::new();
        for (k, form) in p.rhs.iter().enumerate() {
            let mut outputs = BTreeSet::new();
            for (j, t) in form.synthesized.iter().enumerate() {
                let pos = Position { form: k + 1, side: Side::Synthesized, attr: j, path: vec![] };
                match t.as_var() {
                    None => push(Some(pos), ViolationKind::NonVariableSynthesized { term: t.to_string() }),
                    Some(v) => {
                        if !outputs.insert(v.clone()) {
                            call_dups.insert(pos.clone());
                            push(Some(pos), ViolationKind::NonDistinctSynthesized { var: v.clone() });
                        }
                    }
                }
            }
        }
        // At most one input occurrence per variable.
        let mut inputs = BTreeSet::new();
        for o in annotate(p).occurrences.iter().filter(|o| o.polarity == Polarity::Input) {
            if call_dups.contains(&o.position) {
                continue;
            }
            if !inputs.insert(o.var.clone()) {
                push(Some(o.position.clone()), ViolationKind::DuplicateInputOccurrence { var: o.var.clone() });
            }
        }
    }

    let mut seen = BTreeSet::new();
    for (i, s) in g.services.iter().enumerate() {
        let site = Site::Service(i);
        let mut push = |position: Option<Position>, kind| {
            out.push(Violation { site: site.clone(), name: s.name.clone(), position, kind })
        };
        if !seen.insert(s.name.as_str()) {
            push(None, ViolationKind::DuplicateName { name: s.name.clone() });
        }
        let mut outputs = BTreeSet::new();
        for (k, form) in s.forms.iter().enumerate() {
            check_form_shape(g, k, form, &arity, &mut push);
            for (j, t) in form.synthesized.iter().enumerate() {
                let pos = Position { form: k, side: Side::Synthesized, attr: j, path: vec![] };
                match t.as_var() {
                    None => push(Some(pos), ViolationKind::NonVariableSynthesized { term: t.to_string() }),
                    Some(v) => {
                        if !outputs.insert(v.clone()) {
                            push(Some(pos), ViolationKind::NonDistinctSynthesized { var: v.clone() });
                        }
                    }
                }
            }
        }
    }

    let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
    for (i, (loc, sorts)) in g.partition.iter().enumerate() {
        for s in sorts {
            let v = |kind| Violation { site: Site::Partition(i), name: loc.clone(), position: None, kind };
            if !g.sorts.contains_key(s) {
                out.push(v(ViolationKind::UnknownPartitionSort { sort: s.clone() }));
            } else if owner.insert(s, loc).is_some() {
                out.push(v(ViolationKind::SortInTwoLocations { sort: s.clone() }));
            }
        }
    }
    if !g.partition.is_empty() {
        for (i, s) in g.sorts.keys().enumerate() {
            if !owner.contains_key(s.as_str()) {
                out.push(Violation {
                    site: Site::Sort(i),
                    name: s.clone(),
                    position: None,
                    kind: ViolationKind::SortWithoutLocation { sort: s.clone() },
                });
            }
        }
    }

    out.sort();
    out
}

fn check_form_shape(
    g: &Gag,
    k: usize,
    form: &Form,
    arity: &impl Fn(&str) -> Option<usize>,
    push: &mut impl FnMut(Option<Position>, ViolationKind),
) {
    match g.sort(&form.sort) {
        None => push(
            Some(Position { form: k, side: Side::Inherited, attr: 0, path: vec![] }),
            ViolationKind::UndeclaredSort { sort: form.sort.clone() },
        ),
        Some(s) => {
            if s.n_inherited != form.inherited.len() || s.n_synthesized != form.synthesized.len() {
                push(
                    Some(Position { form: k, side: Side::Inherited, attr: 0, path: vec![] }),
                    ViolationKind::AttributeCountMismatch {
                        sort: form.sort.clone(),
                        inherited: form.inherited.len(),
                        synthesized: form.synthesized.len(),
                    },
                );
            }
        }
    }
    for (side, terms) in [(Side::Inherited, &form.inherited), (Side::Synthesized, &form.synthesized)] {
        for (attr, t) in terms.iter().enumerate() {
            if let Err(e) = t.check_arity(arity) {
                let kind = match e {
                    crate::terms::ArityError::UnknownConstructor(ctor) => ViolationKind::UnknownConstructor { ctor },
                    crate::terms::ArityError::Mismatch { ctor, expected, found } => {
                        ViolationKind::ArityMismatch { ctor, expected, found }
                    }
                };
                push(Some(Position { form: k, side, attr, path: vec![] }), kind);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum InstantiateError {
    #[error("`{0}` is not a parameter of the production")]
    NotAParameter(Var),
    #[error("binding for `{var}` reuses variable `{clash}` of the production")]
    BindingClash { var: Var, clash: Var },
    #[error("instance breaks linearity: {0}")]
    Linearity(String),
}

/// Substitute parameter bindings; unbound parameters stay as free output variables.
pub fn instantiate_parameters(p: &Production, bindings: &Subst) -> Result<Production, InstantiateError> {
    if bindings.is_empty() {
        return Ok(p.clone());
    }
    let params = p.parameters();
    let pvars = p.vars();
    for (x, t) in bindings.iter() {
        if !params.contains(x) {
            return Err(InstantiateError::NotAParameter(x.clone()));
        }
        if let Some(clash) = t.vars().into_iter().find(|v| pvars.contains(v)) {
            return Err(InstantiateError::BindingClash { var: x.clone(), clash });
        }
    }
    // Two parameters bound to terms sharing a variable would give it two output
    // occurrences, which is fine; it must not create a second input occurrence.
    let inst = p.apply(bindings);
    let ann = annotate(&inst);
    let mut inputs = BTreeSet::new();
    for o in ann.occurrences.iter().filter(|o| o.polarity == Polarity::Input) {
        if !inputs.insert(o.var.clone()) {
            return Err(InstantiateError::Linearity(format!("{} has two input occurrences", o.var)));
        }
    }
    Ok(inst)
}
