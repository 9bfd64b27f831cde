//! Two-register Minsky machines and their encoding as grammars.
//!
//! Instruction `k` becomes sort `s{k}` with two inherited attributes holding the
//! registers in unary (`zero`, `succ`). The machine halts iff the unique maximal
//! derivation from `s1(zero, zero)` closes.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{Form, Gag, Production, Service, Sort};
use crate::terms::{Symbol, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Register {
    R1,
    R2,
}

impl Register {
    fn index(self) -> usize {
        match self {
            Register::R1 => 1,
            Register::R2 => 2,
        }
    }
}

/// Targets are 1-based instruction numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Instr {
    Inc { reg: Register, next: usize },
    JzDec { reg: Register, zero: usize, dec: usize },
    Halt,
}

impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instr::Inc { reg, next } => write!(f, "INC(r{}, {next})", reg.index()),
            Instr::JzDec { reg, zero, dec } => write!(f, "JZDEC(r{}, {zero}, {dec})", reg.index()),
            Instr::Halt => f.write_str("HALT"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MinskyError {
    #[error("empty program")]
    Empty,
    #[error("instruction {instr} jumps to {target}, outside 1..={len}")]
    TargetOutOfRange { instr: usize, target: usize, len: usize },
    #[error("cannot read instruction `{0}`")]
    Syntax(String),
}

/// `INC(r1,2); INC(r1,3); JZDEC(r1,5,4); INC(r2,3); HALT`: moves r1 into r2 and stops.
pub fn default_program() -> Vec<Instr> {
    vec![
        Instr::Inc { reg: Register::R1, next: 2 },
        Instr::Inc { reg: Register::R1, next: 3 },
        Instr::JzDec { reg: Register::R1, zero: 5, dec: 4 },
        Instr::Inc { reg: Register::R2, next: 3 },
        Instr::Halt,
    ]
}

/// `JZDEC(r1,1,1)` spins forever on a zero register.
pub fn looping_program() -> Vec<Instr> {
    vec![Instr::JzDec { reg: Register::R1, zero: 1, dec: 1 }]
}

/// Read instructions separated by `;` or newlines.
pub fn parse_program(src: &str) -> Result<Vec<Instr>, MinskyError> {
    let mut out = Vec::new();
    for raw in src.split([';', '\n']) {
        let item: String = raw.split('#').next().unwrap_or("").chars().filter(|c| !c.is_whitespace()).collect();
        if item.is_empty() {
            continue;
        }
        let upper = item.to_ascii_uppercase();
        if upper == "HALT" {
            out.push(Instr::Halt);
            continue;
        }
        let bad = || MinskyError::Syntax(item.clone());
        let (op, rest) = upper.split_once('(').ok_or_else(bad)?;
        let args: Vec<&str> = rest.strip_suffix(')').ok_or_else(bad)?.split(',').collect();
        let reg = match args.first().copied() {
            Some("R1") => Register::R1,
            Some("R2") => Register::R2,
            _ => return Err(bad()),
        };
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad());
        out.push(match (op, args.len()) {
            ("INC", 2) => Instr::Inc { reg, next: num(args[1])? },
            ("JZDEC", 3) => Instr::JzDec { reg, zero: num(args[1])?, dec: num(args[2])? },
            _ => return Err(bad()),
        });
    }
    Ok(out)
}

fn sort(k: usize) -> String {
    format!("s{k}")
}

fn zero() -> Term {
    Term::cst("zero")
}

fn succ(t: Term) -> Term {
    Term::app("succ", vec![t])
}

/// Registers as a pair, with `f` applied to register `reg`.
fn regs(reg: Register, f: impl FnOnce(Term) -> Term) -> Vec<Term> {
    match reg {
        Register::R1 => vec![f(Term::var("x")), Term::var("y")],
        Register::R2 => vec![Term::var("x"), f(Term::var("y"))],
    }
}

/// Encode a program; production names are `Inc_k_r_i`, `Jz_k_r_i`, `Dec_k_r_j` and `Halt_k`.
pub fn minsky_encode(program: &[Instr]) -> Result<Gag, MinskyError> {
    if program.is_empty() {
        return Err(MinskyError::Empty);
    }
    let len = program.len();
    let check = |instr: usize, target: usize| {
        if (1..=len).contains(&target) {
            Ok(())
        } else {
            Err(MinskyError::TargetOutOfRange { instr, target, len })
        }
    };
    let mut g = Gag::default();
    g.symbols.insert("zero".into(), Symbol::new("zero", 0));
    g.symbols.insert("succ".into(), Symbol::new("succ", 1));
    for k in 1..=len {
        g.sorts.insert(sort(k), Sort::new(sort(k), 2, 0));
    }
    for (i, ins) in program.iter().enumerate() {
        let k = i + 1;
        let lhs = |inh: Vec<Term>| Form::new(sort(k), inh, vec![]);
        match *ins {
            Instr::Inc { reg, next } => {
                check(k, next)?;
                let r = reg.index();
                g.productions.push(Production::new(
                    format!("Inc_{k}_{r}_{next}"),
                    lhs(regs(reg, |t| t)),
                    vec![Form::new(sort(next), regs(reg, succ), vec![])],
                ));
            }
            Instr::JzDec { reg, zero: z, dec } => {
                check(k, z)?;
                check(k, dec)?;
                let r = reg.index();
                g.productions.push(Production::new(
                    format!("Jz_{k}_{r}_{z}"),
                    lhs(regs(reg, |_| zero())),
                    vec![Form::new(sort(z), regs(reg, |_| zero()), vec![])],
                ));
                g.productions.push(Production::new(
                    format!("Dec_{k}_{r}_{dec}"),
                    lhs(regs(reg, succ)),
                    vec![Form::new(sort(dec), regs(reg, |t| t), vec![])],
                ));
            }
            Instr::Halt => {
                g.productions.push(Production::new(format!("Halt_{k}"), lhs(regs(Register::R1, |t| t)), vec![]));
            }
        }
    }
    g.services.push(Service { name: "Start".into(), forms: vec![Form::new(sort(1), vec![zero(), zero()], vec![])] });
    Ok(g)
}
