//! CTL over reachability graphs, with `in(M.N)` and `emits(s)` atoms,
//! optional weak fairness, witnesses and on-the-fly safety checking.

mod eval;
mod kripke;
mod onthefly;
mod witness;

use std::fmt;

use thiserror::Error;

use crate::boolform::Symbol;
use crate::lex::{self, Cursor, SyntaxError, Tok};
use crate::product::ProductError;

pub use eval::{
    check, check_kripke, check_with, fair_states, fair_states_kripke, CheckOptions, CheckResult,
};
pub use kripke::{Kripke, Labeling, StateSet, SymbolLabels};
pub use onthefly::{check_on_the_fly, check_on_the_fly_with, eval_state, OnTheFly};
pub use witness::{validate_trace, witness, Trace, TraceKind};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CtlFormula {
    True,
    False,
    InState { machine: String, node: String },
    Emits(Symbol),
    Not(Box<CtlFormula>),
    And(Box<CtlFormula>, Box<CtlFormula>),
    Or(Box<CtlFormula>, Box<CtlFormula>),
    EX(Box<CtlFormula>),
    EG(Box<CtlFormula>),
    EF(Box<CtlFormula>),
    EU(Box<CtlFormula>, Box<CtlFormula>),
    AX(Box<CtlFormula>),
    AG(Box<CtlFormula>),
    AF(Box<CtlFormula>),
    AU(Box<CtlFormula>, Box<CtlFormula>),
}

impl CtlFormula {
    pub fn in_state(machine: &str, node: &str) -> Self {
        CtlFormula::InState {
            machine: machine.to_string(),
            node: node.to_string(),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: CtlFormula) -> Self {
        CtlFormula::Not(Box::new(f))
    }

    pub fn and(a: CtlFormula, b: CtlFormula) -> Self {
        CtlFormula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: CtlFormula, b: CtlFormula) -> Self {
        CtlFormula::Or(Box::new(a), Box::new(b))
    }

    pub fn ex(f: CtlFormula) -> Self {
        CtlFormula::EX(Box::new(f))
    }

    pub fn eg(f: CtlFormula) -> Self {
        CtlFormula::EG(Box::new(f))
    }

    pub fn ef(f: CtlFormula) -> Self {
        CtlFormula::EF(Box::new(f))
    }

    pub fn eu(a: CtlFormula, b: CtlFormula) -> Self {
        CtlFormula::EU(Box::new(a), Box::new(b))
    }

    pub fn ax(f: CtlFormula) -> Self {
        CtlFormula::AX(Box::new(f))
    }

    pub fn ag(f: CtlFormula) -> Self {
        CtlFormula::AG(Box::new(f))
    }

    pub fn af(f: CtlFormula) -> Self {
        CtlFormula::AF(Box::new(f))
    }

    pub fn au(a: CtlFormula, b: CtlFormula) -> Self {
        CtlFormula::AU(Box::new(a), Box::new(b))
    }

    /// True when no temporal operator occurs.
    pub fn is_state_predicate(&self) -> bool {
        use CtlFormula::*;
        match self {
            True | False | InState { .. } | Emits(_) => true,
            Not(f) => f.is_state_predicate(),
            And(a, b) | Or(a, b) => a.is_state_predicate() && b.is_state_predicate(),
            _ => false,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            CtlFormula::Or(..) => 0,
            CtlFormula::And(..) => 1,
            _ => 2,
        }
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        use CtlFormula::*;
        let paren = self.precedence() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            True => f.write_str("true")?,
            False => f.write_str("false")?,
            InState { machine, node } => write!(f, "in({machine}.{node})")?,
            Emits(s) => write!(f, "emits({s})")?,
            Not(x) => {
                f.write_str("!")?;
                x.write_prec(f, 2)?;
            }
            And(a, b) => {
                a.write_prec(f, 1)?;
                f.write_str(" & ")?;
                b.write_prec(f, 2)?;
            }
            Or(a, b) => {
                a.write_prec(f, 0)?;
                f.write_str(" | ")?;
                b.write_prec(f, 1)?;
            }
            EX(x) | EG(x) | EF(x) | AX(x) | AG(x) | AF(x) => {
                let op = match self {
                    EX(_) => "EX",
                    EG(_) => "EG",
                    EF(_) => "EF",
                    AX(_) => "AX",
                    AG(_) => "AG",
                    _ => "AF",
                };
                write!(f, "{op} ")?;
                x.write_prec(f, 2)?;
            }
            EU(a, b) | AU(a, b) => {
                let q = if matches!(self, EU(..)) { "E" } else { "A" };
                write!(f, "{q}[{a} U {b}]")?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for CtlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}

#[derive(Debug, Clone, Error)]
pub enum CheckError {
    #[error("CTL syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("unknown machine `{0}`")]
    UnknownMachine(String),
    #[error("unknown node `{node}` in machine `{machine}`")]
    UnknownNode { machine: String, node: String },
    #[error("graph has {} deadlock state(s): {}", .0.len(), .0.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", "))]
    Deadlock(Vec<usize>),
    #[error("on-the-fly checking needs a state predicate, got `{0}`")]
    NotStatePredicate(String),
    #[error("no witness shape for `{0}`")]
    UnsupportedWitness(String),
    #[error(transparent)]
    Product(#[from] ProductError),
}

/// Parses a CTL formula.
///
/// Precedence from loosest: `|`, `&`, then the prefix operators (`!` and the
/// temporal ones), which bind tighter than any binary connective.
pub fn parse_ctl(text: &str) -> Result<CtlFormula, CheckError> {
    let toks = lex::tokenize(text, false)?;
    let mut cur = Cursor::new(toks);
    let f = parse_or(&mut cur)?;
    if !cur.at_eof() {
        return Err(cur.unexpected("`&`, `|` or end of formula").into());
    }
    Ok(f)
}

fn parse_or(cur: &mut Cursor) -> Result<CtlFormula, SyntaxError> {
    let mut lhs = parse_and(cur)?;
    while cur.eat_punct("|") {
        lhs = CtlFormula::or(lhs, parse_and(cur)?);
    }
    Ok(lhs)
}

fn parse_and(cur: &mut Cursor) -> Result<CtlFormula, SyntaxError> {
    let mut lhs = parse_unary(cur)?;
    while cur.eat_punct("&") {
        lhs = CtlFormula::and(lhs, parse_unary(cur)?);
    }
    Ok(lhs)
}

fn parse_unary(cur: &mut Cursor) -> Result<CtlFormula, SyntaxError> {
    if cur.eat_punct("!") {
        return Ok(CtlFormula::not(parse_unary(cur)?));
    }
    if cur.eat_punct("(") {
        let f = parse_or(cur)?;
        cur.expect_punct(")")?;
        return Ok(f);
    }
    let t = cur.peek().clone();
    let word = match &t.tok {
        Tok::Ident(w) => w.clone(),
        _ => return Err(cur.unexpected("a CTL formula")),
    };
    let unary: Option<fn(CtlFormula) -> CtlFormula> = match word.as_str() {
        "AG" => Some(CtlFormula::ag),
        "AF" => Some(CtlFormula::af),
        "AX" => Some(CtlFormula::ax),
        "EG" => Some(CtlFormula::eg),
        "EF" => Some(CtlFormula::ef),
        "EX" => Some(CtlFormula::ex),
        _ => None,
    };
    if let Some(make) = unary {
        cur.bump();
        return Ok(make(parse_unary(cur)?));
    }
    match word.as_str() {
        "A" | "E" => {
            cur.bump();
            cur.expect_punct("[")?;
            let lhs = parse_or(cur)?;
            cur.expect_word("U")?;
            let rhs = parse_or(cur)?;
            cur.expect_punct("]")?;
            Ok(if word == "A" {
                CtlFormula::au(lhs, rhs)
            } else {
                CtlFormula::eu(lhs, rhs)
            })
        }
        "in" => {
            cur.bump();
            cur.expect_punct("(")?;
            let (machine, _) = cur.expect_ident()?;
            cur.expect_punct(".")?;
            let (node, _) = cur.expect_ident()?;
            cur.expect_punct(")")?;
            Ok(CtlFormula::InState { machine, node })
        }
        "emits" => {
            cur.bump();
            cur.expect_punct("(")?;
            let (sym, pos) = cur.expect_ident()?;
            cur.expect_punct(")")?;
            let sym = Symbol::new(&sym).map_err(|e| SyntaxError::new(pos, e.to_string()))?;
            Ok(CtlFormula::Emits(sym))
        }
        "true" => {
            cur.bump();
            Ok(CtlFormula::True)
        }
        "false" => {
            cur.bump();
            Ok(CtlFormula::False)
        }
        other => Err(SyntaxError::new(
            t.pos,
            format!("unknown operator `{other}`"),
        )),
    }
}
