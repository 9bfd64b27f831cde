use std::collections::BTreeSet;

use indexmap::IndexMap;

use super::lexer::{lex, Spanned, Tok};
use super::ParseError;
use crate::analysis::{AttrOcc, Verdict, Witness};
use crate::distribution::Partition;
use crate::engine::{Case, Configuration, Event, NodeEq, NodeId, ScriptStep, Trace};
use crate::grammar::{Form, Gag, Production, Service, Sort};
use crate::terms::{NameGen, Subst, Symbol, Term, Var, CENTRAL};

pub(crate) struct Parser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    ctors: &'a dyn Fn(&str) -> bool,
}

impl<'a> Parser<'a> {
    pub(crate) fn new(src: &str, ctors: &'a dyn Fn(&str) -> bool) -> Result<Self, ParseError> {
        let toks = lex(src).map_err(|e| ParseError {
            line: e.line,
            col: e.col,
            expected: "a token".into(),
            found: format!("`{}`", e.ch),
        })?;
        Ok(Parser { toks, pos: 0, ctors })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|s| &s.tok)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn starts_line(&self) -> bool {
        self.toks.get(self.pos).is_none_or(|s| s.starts_line)
    }

    pub(crate) fn err(&self, expected: impl Into<String>) -> ParseError {
        match self.toks.get(self.pos) {
            Some(s) => ParseError { line: s.line, col: s.col, expected: expected.into(), found: s.tok.to_string() },
            None => {
                let (line, col) = self.toks.last().map_or((1, 1), |s| (s.line, s.col + 1));
                ParseError { line, col, expected: expected.into(), found: "end of input".into() }
            }
        }
    }

    fn at_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Tok::Punct(q)) if *q == p)
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.err(format!("`{p}`")))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.at_keyword(kw) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("`{kw}`")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err(what)),
        }
    }

    fn number(&mut self) -> Result<u64, ParseError> {
        match self.peek() {
            Some(Tok::Num(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            _ => Err(self.err("a number")),
        }
    }

    fn header(&mut self) -> Result<(), ParseError> {
        self.expect_keyword("format")?;
        let at = self.pos;
        if self.number()? != 1 {
            self.pos = at;
            return Err(self.err("format version 1"));
        }
        Ok(())
    }

    fn optional_ns(&mut self) -> Result<String, ParseError> {
        if self.eat_punct("@") {
            self.ident("a namespace")
        } else {
            Ok(CENTRAL.to_string())
        }
    }

    fn var(&mut self) -> Result<Var, ParseError> {
        let name = self.ident("a variable")?;
        let ns = self.optional_ns()?;
        Ok(Var::in_ns(name, ns))
    }

    fn node_id(&mut self) -> Result<NodeId, ParseError> {
        let name = self.ident("a node id")?;
        let ns = self.optional_ns()?;
        Ok(NodeId::in_ns(name, ns))
    }

    /// Production names may carry a `!` or `?` label.
    fn production_name(&mut self) -> Result<String, ParseError> {
        let mut name = String::new();
        if self.eat_punct("!") {
            name.push('!');
        } else if self.eat_punct("?") {
            name.push('?');
        }
        name.push_str(&self.ident("a production name")?);
        Ok(name)
    }

    pub(crate) fn term(&mut self) -> Result<Term, ParseError> {
        let name = self.ident("a term")?;
        if self.at_punct("@") {
            let ns = self.optional_ns()?;
            return Ok(Term::from_var(Var::in_ns(name, ns)));
        }
        if self.eat_punct("(") {
            let args = self.term_list(")")?;
            return Ok(Term::app(&name, args));
        }
        if (self.ctors)(&name) {
            Ok(Term::cst(&name))
        } else {
            Ok(Term::var(&name))
        }
    }

    fn term_list(&mut self, close: &str) -> Result<Vec<Term>, ParseError> {
        let mut out = Vec::new();
        if self.eat_punct(close) {
            return Ok(out);
        }
        loop {
            out.push(self.term()?);
            if self.eat_punct(close) {
                return Ok(out);
            }
            if !self.eat_punct(",") {
                return Err(self.err(format!("`,` or `{close}`")));
            }
        }
    }

    fn form(&mut self) -> Result<Form, ParseError> {
        let sort = self.ident("a sort")?;
        self.expect_punct("(")?;
        let inherited = self.term_list(")")?;
        self.expect_punct("<")?;
        let synthesized = self.term_list(">")?;
        Ok(Form::new(sort, inherited, synthesized))
    }

    fn at_form(&self) -> bool {
        matches!(self.peek(), Some(Tok::Ident(_))) && matches!(self.peek_at(1), Some(Tok::Punct("(")))
    }

    pub(crate) fn subst(&mut self) -> Result<Subst, ParseError> {
        self.expect_punct("{")?;
        let mut out = Subst::new();
        if self.eat_punct("}") {
            return Ok(out);
        }
        loop {
            let at = self.pos;
            let x = self.var()?;
            self.expect_punct("=")?;
            let t = self.term()?;
            if out.insert(x.clone(), t).is_some() {
                self.pos = at;
                return Err(self.err(format!("a single binding for `{x}`")));
            }
            if self.eat_punct("}") {
                return Ok(out);
            }
            self.expect_punct(",")?;
        }
    }

    fn name_set(&mut self) -> Result<Vec<String>, ParseError> {
        self.expect_punct("{")?;
        let mut out = Vec::new();
        if self.eat_punct("}") {
            return Ok(out);
        }
        loop {
            out.push(self.ident("a sort")?);
            if self.eat_punct("}") {
                return Ok(out);
            }
            self.expect_punct(",")?;
        }
    }

    /// `partition L = {a, b};` with the keyword already consumed.
    fn partition_entry(&mut self, into: &mut IndexMap<String, Vec<String>>) -> Result<(), ParseError> {
        let at = self.pos;
        let loc = self.ident("a location")?;
        if into.contains_key(&loc) {
            self.pos = at;
            return Err(self.err(format!("a location other than `{loc}`, already declared")));
        }
        self.expect_punct("=")?;
        let sorts = self.name_set()?;
        self.expect_punct(";")?;
        into.insert(loc, sorts);
        Ok(())
    }

    fn attr_spec(&mut self, key: &str) -> Result<(usize, Vec<String>), ParseError> {
        self.expect_keyword(key)?;
        self.expect_punct("=")?;
        if self.eat_punct("[") {
            let mut names = Vec::new();
            if !self.eat_punct("]") {
                loop {
                    names.push(self.ident("an attribute name")?);
                    if self.eat_punct("]") {
                        break;
                    }
                    self.expect_punct(",")?;
                }
            }
            Ok((names.len(), names))
        } else {
            Ok((self.number()? as usize, Vec::new()))
        }
    }
}

/// Constructor names declared by `ctor C/n;` statements.
fn declared_ctors(src: &str) -> BTreeSet<String> {
    let Ok(toks) = lex(src) else {
        return BTreeSet::new();
    };
    toks.windows(3)
        .filter_map(|w| match (&w[0].tok, &w[1].tok, &w[2].tok) {
            (Tok::Ident(k), Tok::Ident(c), Tok::Punct("/")) if k == "ctor" => Some(c.clone()),
            _ => None,
        })
        .collect()
}

/// Parse a `.gag` grammar source.
pub fn parse_gag(src: &str) -> Result<Gag, ParseError> {
    let ctors = declared_ctors(src);
    let is_ctor = |s: &str| ctors.contains(s);
    let mut p = Parser::new(src, &is_ctor)?;
    if p.at_keyword("format") {
        p.header()?;
    }
    if p.at_end() {
        return Err(p.err("a declaration"));
    }
    let mut g = Gag::default();
    while !p.at_end() {
        let kw_at = p.pos;
        let kw = p.ident("`sort`, `ctor`, `prod`, `service` or `partition`")?;
        let name_at = p.pos;
        let dup = |p: &mut Parser, what: &str, name: &str| {
            p.pos = name_at;
            Err(p.err(format!("a new {what} name, `{name}` is already declared")))
        };
        match kw.as_str() {
            "sort" => {
                let name = p.ident("a sort name")?;
                if g.sorts.contains_key(&name) {
                    return dup(&mut p, "sort", &name);
                }
                p.expect_punct("(")?;
                let (n_inh, inh_names) = p.attr_spec("inh")?;
                p.expect_punct(",")?;
                let (n_syn, syn_names) = p.attr_spec("syn")?;
                p.expect_punct(")")?;
                p.expect_punct(";")?;
                let mut s = Sort::new(name.clone(), n_inh, n_syn);
                s.inherited_names = inh_names;
                s.synthesized_names = syn_names;
                g.sorts.insert(name, s);
            }
            "ctor" => {
                let name = p.ident("a constructor name")?;
                if g.symbols.contains_key(&name) {
                    return dup(&mut p, "constructor", &name);
                }
                p.expect_punct("/")?;
                let arity = p.number()? as usize;
                p.expect_punct(";")?;
                g.symbols.insert(name.clone(), Symbol::new(name, arity));
            }
            "prod" => {
                let name = p.production_name()?;
                if g.production(&name).is_some() {
                    return dup(&mut p, "production", &name);
                }
                p.expect_punct(":")?;
                let lhs = p.form()?;
                let mut rhs = Vec::new();
                if p.eat_punct("<-") {
                    while p.at_form() {
                        rhs.push(p.form()?);
                    }
                }
                p.expect_punct(";")?;
                g.productions.push(Production::new(name, lhs, rhs));
            }
            "service" => {
                let name = p.ident("a service name")?;
                if g.service(&name).is_some() {
                    return dup(&mut p, "service", &name);
                }
                p.expect_punct(":")?;
                let mut forms = vec![p.form()?];
                while p.eat_punct(",") {
                    forms.push(p.form()?);
                }
                p.expect_punct(";")?;
                g.services.push(Service { name, forms });
            }
            "partition" => p.partition_entry(&mut g.partition)?,
            _ => {
                p.pos = kw_at;
                return Err(p.err("`sort`, `ctor`, `prod`, `service` or `partition`"));
            }
        }
    }
    Ok(g)
}

/// Parse a partition sidecar: `partition L = {sorts};` lines.
pub fn parse_partition(src: &str) -> Result<Partition, ParseError> {
    let none = |_: &str| false;
    let mut p = Parser::new(src, &none)?;
    if p.at_keyword("format") {
        p.header()?;
    }
    let mut locations = IndexMap::new();
    while !p.at_end() {
        p.expect_keyword("partition")?;
        p.partition_entry(&mut locations)?;
    }
    if locations.is_empty() {
        return Err(p.err("`partition`"));
    }
    Ok(Partition { locations })
}

fn ctor_test(g: &Gag) -> impl Fn(&str) -> bool + '_ {
    |s: &str| g.symbols.contains_key(s)
}

/// Parse a term against the constructors of `g`.
pub fn parse_term(g: &Gag, src: &str) -> Result<Term, ParseError> {
    let is_ctor = ctor_test(g);
    let mut p = Parser::new(src, &is_ctor)?;
    let t = p.term()?;
    if !p.at_end() {
        return Err(p.err("end of input"));
    }
    Ok(t)
}

/// Parse `{x = t, …}`.
pub fn parse_subst(g: &Gag, src: &str) -> Result<Subst, ParseError> {
    let is_ctor = ctor_test(g);
    let mut p = Parser::new(src, &is_ctor)?;
    let s = p.subst()?;
    if !p.at_end() {
        return Err(p.err("end of input"));
    }
    Ok(s)
}

/// Right-hand side of a node equation.
fn node_eq(p: &mut Parser) -> Result<NodeEq, ParseError> {
    let head_at = p.pos;
    let head = p.production_name()?;
    if !p.at_punct("(") {
        return Ok(NodeEq::Closed { production: head, children: Vec::new() });
    }
    // Look past the matching parenthesis: `<` means an open form.
    let mut depth = 0usize;
    let mut k = p.pos;
    while let Some(s) = p.toks.get(k) {
        match s.tok {
            Tok::Punct("(") => depth += 1,
            Tok::Punct(")") => {
                depth -= 1;
                if depth == 0 {
                    break;
                }
            }
            _ => {}
        }
        k += 1;
    }
    let open = matches!(p.toks.get(k + 1).map(|s| &s.tok), Some(Tok::Punct("<")));
    if open {
        p.pos = head_at;
        return Ok(NodeEq::Open(p.form()?));
    }
    p.expect_punct("(")?;
    let mut children = Vec::new();
    if !p.eat_punct(")") {
        loop {
            children.push(p.node_id()?);
            if p.eat_punct(")") {
                break;
            }
            p.expect_punct(",")?;
        }
    }
    Ok(NodeEq::Closed { production: head, children })
}

fn config_lines(p: &mut Parser, g: &Gag, cfg: &mut Configuration, stop: &[&str]) -> Result<(), ParseError> {
    let mut explicit_gen = false;
    while !p.at_end() && !stop.iter().any(|k| p.at_keyword(k)) {
        if p.at_keyword("gen") && !matches!(p.peek_at(1), Some(Tok::Punct("=")) | Some(Tok::Punct("@"))) {
            p.pos += 1;
            let ns = p.ident("a namespace")?;
            let next = p.number()?;
            cfg.gen = NameGen::starting_at(ns, next);
            explicit_gen = true;
        } else if p.at_keyword("root") && !matches!(p.peek_at(1), Some(Tok::Punct("=")) | Some(Tok::Punct("@"))) {
            p.pos += 1;
            cfg.roots.push(p.node_id()?);
        } else {
            let at = p.pos;
            let id = p.node_id()?;
            p.expect_punct("=")?;
            let eq = node_eq(p)?;
            if cfg.nodes.insert(id.clone(), eq).is_some() {
                p.pos = at;
                return Err(p.err(format!("a single equation for `{id}`")));
            }
        }
    }
    if !explicit_gen {
        cfg.reserve_names(g);
    }
    Ok(())
}

/// Parse a `.gagc` configuration. Without a `gen` line the generator starts past every name present.
pub fn parse_config(g: &Gag, src: &str) -> Result<Configuration, ParseError> {
    let is_ctor = ctor_test(g);
    let mut p = Parser::new(src, &is_ctor)?;
    p.header()?;
    p.expect_keyword("config")?;
    let mut cfg = Configuration::new(CENTRAL);
    config_lines(&mut p, g, &mut cfg, &[])?;
    Ok(cfg)
}

fn emits(p: &mut Parser) -> Result<Vec<String>, ParseError> {
    let mut out = Vec::new();
    while p.at_keyword("emit") && p.starts_line() {
        p.pos += 1;
        out.push(p.ident("a message id")?);
    }
    Ok(out)
}

fn apply_line(p: &mut Parser) -> Result<(NodeId, String, Subst), ParseError> {
    p.expect_keyword("apply")?;
    let node = p.node_id()?;
    let production = p.production_name()?;
    let bindings = if p.at_keyword("with") {
        p.pos += 1;
        p.subst()?
    } else {
        Subst::new()
    };
    Ok((node, production, bindings))
}

fn trace_body(p: &mut Parser) -> Result<Trace, ParseError> {
    p.expect_keyword("trace")?;
    p.expect_keyword("case")?;
    let service = p.ident("a service name")?;
    let closing = if p.at_keyword("closing") {
        p.pos += 1;
        p.subst()?
    } else {
        Subst::new()
    };
    let mut trace = Trace::new(Case { service, closing });
    let mut locations = IndexMap::new();
    while p.at_keyword("partition") {
        p.pos += 1;
        p.partition_entry(&mut locations)?;
    }
    if !locations.is_empty() {
        trace.partition = Some(Partition { locations });
    }
    while !p.at_end() {
        if p.at_keyword("apply") {
            let (node, production, bindings) = apply_line(p)?;
            let mut sigma_in = None;
            let mut sigma_out = None;
            if p.at_keyword("in") {
                p.pos += 1;
                sigma_in = Some(p.subst()?);
            }
            if p.at_keyword("out") {
                p.pos += 1;
                sigma_out = Some(p.subst()?);
            }
            let emitted = emits(p)?;
            trace.events.push(Event::Applied { node, production, bindings, sigma_in, sigma_out, emitted });
        } else if p.at_keyword("deliver") {
            p.pos += 1;
            let message = p.ident("a message id")?;
            let emitted = emits(p)?;
            trace.events.push(Event::Delivered { message, emitted });
        } else {
            return Err(p.err("`apply` or `deliver`"));
        }
    }
    Ok(trace)
}

/// Parse a `.gagt` trace.
pub fn parse_trace(g: &Gag, src: &str) -> Result<Trace, ParseError> {
    let is_ctor = ctor_test(g);
    let mut p = Parser::new(src, &is_ctor)?;
    p.header()?;
    trace_body(&mut p)
}

/// Parse a script of `apply NODE PROD [with {…}]` lines; a full trace is accepted too.
pub fn parse_script(g: &Gag, src: &str) -> Result<Vec<ScriptStep>, ParseError> {
    let is_ctor = ctor_test(g);
    let mut p = Parser::new(src, &is_ctor)?;
    if p.at_keyword("format") {
        p.header()?;
    }
    if p.at_keyword("trace") {
        return Ok(trace_body(&mut p)?.script());
    }
    if p.at_keyword("script") {
        p.pos += 1;
    }
    let mut out = Vec::new();
    while !p.at_end() {
        let (node, production, bindings) = apply_line(&mut p)?;
        out.push(ScriptStep { node, production, bindings });
    }
    Ok(out)
}

fn attr_occ(p: &mut Parser) -> Result<AttrOcc, ParseError> {
    let form = p.number()? as usize;
    let (close, side) = if p.eat_punct("(") {
        (")", crate::grammar::Side::Inherited)
    } else if p.eat_punct("<") {
        (">", crate::grammar::Side::Synthesized)
    } else {
        return Err(p.err("`(` or `<`"));
    };
    let at = p.pos;
    let attr = p.number()? as usize;
    if attr == 0 {
        p.pos = at;
        return Err(p.err("a 1-based attribute index"));
    }
    p.expect_punct(close)?;
    Ok(AttrOcc { form, side, attr: attr - 1 })
}

/// Read back the verdict part of a static report.
pub fn parse_verdict(src: &str) -> Result<Verdict, ParseError> {
    let none = |_: &str| false;
    let mut p = Parser::new(src, &none)?;
    if p.at_keyword("format") {
        p.header()?;
    }
    p.expect_keyword("verdict")?;
    let word_at = p.pos;
    let word = p.ident("a verdict")?;
    let mut witnesses = Vec::new();
    while !p.at_end() {
        if !p.at_keyword("witness") {
            p.pos += 1;
            continue;
        }
        p.pos += 1;
        let sort = p.ident("a sort")?;
        let production = p.production_name()?;
        p.expect_punct(":")?;
        let mut cycle = vec![attr_occ(&mut p)?];
        while matches!(p.peek(), Some(Tok::Num(_))) && !p.starts_line() {
            cycle.push(attr_occ(&mut p)?);
        }
        witnesses.push(Witness { sort, production, cycle });
    }
    match word.as_str() {
        "strongly_acyclic" => Ok(Verdict::StronglyAcyclic),
        "not_strongly_acyclic" => Ok(Verdict::NotStronglyAcyclic { witnesses }),
        _ => {
            p.pos = word_at;
            Err(p.err("`strongly_acyclic` or `not_strongly_acyclic`"))
        }
    }
}

/// Bindings keyed by variable name, as typed interactively (`x = t, y = u`).
pub fn parse_bindings(g: &Gag, src: &str) -> Result<Subst, ParseError> {
    let trimmed = src.trim();
    if trimmed.is_empty() {
        return Ok(Subst::new());
    }
    if trimmed.starts_with('{') {
        return parse_subst(g, trimmed);
    }
    parse_subst(g, &format!("{{{trimmed}}}"))
}
