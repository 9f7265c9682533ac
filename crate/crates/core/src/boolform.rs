//! Boolean guards over a broadcast symbol alphabet.
//!
//! Guards label CLG edges. `+`, `*` and `!` are sum, product and complement;
//! `1` and `0` are the constants. A symbol that is not received in a step
//! evaluates to false.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::lex::{self, Cursor, SyntaxError, Tok};

/// A broadcast symbol. Ordered and compared by name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(Arc<str>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid identifier `{0}`")]
pub struct InvalidIdentifier(pub String);

impl Symbol {
    pub fn new(name: &str) -> Result<Self, InvalidIdentifier> {
        if lex::is_ident(name) {
            Ok(Symbol(Arc::from(name)))
        } else {
            Err(InvalidIdentifier(name.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Symbol {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(Symbol),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(s: Symbol) -> Self {
        Formula::Atom(s)
    }

    pub fn constant(b: bool) -> Self {
        if b {
            Formula::True
        } else {
            Formula::False
        }
    }

    pub fn as_const(&self) -> Option<bool> {
        match self {
            Formula::True => Some(true),
            Formula::False => Some(false),
            _ => None,
        }
    }

    /// Negation with constant folding and double-negation elimination.
    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        match f {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Not(inner) => *inner,
            f => Formula::Not(Box::new(f)),
        }
    }

    /// Conjunction with unit and zero laws applied.
    pub fn and(a: Formula, b: Formula) -> Self {
        match (a, b) {
            (Formula::False, _) | (_, Formula::False) => Formula::False,
            (Formula::True, x) | (x, Formula::True) => x,
            (a, b) if a == b => a,
            (a, b) => Formula::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        match (a, b) {
            (Formula::True, _) | (_, Formula::True) => Formula::True,
            (Formula::False, x) | (x, Formula::False) => x,
            (a, b) if a == b => a,
            (a, b) => Formula::Or(Box::new(a), Box::new(b)),
        }
    }

    pub fn and_all(items: impl IntoIterator<Item = Formula>) -> Self {
        items.into_iter().fold(Formula::True, Formula::and)
    }

    pub fn or_all(items: impl IntoIterator<Item = Formula>) -> Self {
        items.into_iter().fold(Formula::False, Formula::or)
    }

    pub fn eval_with(&self, present: &impl Fn(&Symbol) -> bool) -> bool {
        match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(s) => present(s),
            Formula::Not(f) => !f.eval_with(present),
            Formula::And(a, b) => a.eval_with(present) && b.eval_with(present),
            Formula::Or(a, b) => a.eval_with(present) || b.eval_with(present),
        }
    }

    /// Evaluates under received-set semantics: `Atom(s)` is `s ∈ present`.
    pub fn eval(&self, present: &BTreeSet<Symbol>) -> bool {
        self.eval_with(&|s| present.contains(s))
    }

    /// Substitutes the atoms for which `fixed` answers, then simplifies.
    pub fn restrict_with(&self, fixed: &impl Fn(&Symbol) -> Option<bool>) -> Formula {
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Atom(s) => match fixed(s) {
                Some(b) => Formula::constant(b),
                None => self.clone(),
            },
            Formula::Not(f) => Formula::not(f.restrict_with(fixed)),
            Formula::And(a, b) => {
                let a = a.restrict_with(fixed);
                if a == Formula::False {
                    return a;
                }
                Formula::and(a, b.restrict_with(fixed))
            }
            Formula::Or(a, b) => {
                let a = a.restrict_with(fixed);
                if a == Formula::True {
                    return a;
                }
                Formula::or(a, b.restrict_with(fixed))
            }
        }
    }

    pub fn restrict(&self, fixed: &BTreeMap<Symbol, bool>) -> Formula {
        self.restrict_with(&|s| fixed.get(s).copied())
    }

    pub fn support(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_support(&mut out);
        out
    }

    fn collect_support(&self, out: &mut BTreeSet<Symbol>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(s) => {
                out.insert(s.clone());
            }
            Formula::Not(f) => f.collect_support(out),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.collect_support(out);
                b.collect_support(out);
            }
        }
    }

    /// Some assignment of the support that makes the formula true, if any.
    /// Symbols in the returned set are true, all others false.
    pub fn satisfying_assignment(&self) -> Option<BTreeSet<Symbol>> {
        self.find_assignment(true)
    }

    pub fn is_satisfiable(&self) -> bool {
        match self.as_const() {
            Some(b) => b,
            None => self.find_assignment(true).is_some(),
        }
    }

    pub fn is_unsatisfiable(&self) -> bool {
        !self.is_satisfiable()
    }

    pub fn is_tautology(&self) -> bool {
        match self.as_const() {
            Some(b) => b,
            None => self.find_assignment(false).is_none(),
        }
    }

    /// A falsifying assignment, if the formula is not a tautology.
    pub fn falsifying_assignment(&self) -> Option<BTreeSet<Symbol>> {
        self.find_assignment(false)
    }

    pub fn equivalent(&self, other: &Formula) -> bool {
        let diff = Formula::or(
            Formula::and(self.clone(), Formula::not(other.clone())),
            Formula::and(Formula::not(self.clone()), other.clone()),
        );
        diff.is_unsatisfiable()
    }

    // Exhaustive search over the support; supports here stay small.
    fn find_assignment(&self, target: bool) -> Option<BTreeSet<Symbol>> {
        let support: Vec<Symbol> = self.support().into_iter().collect();
        let index: HashMap<&Symbol, usize> =
            support.iter().enumerate().map(|(i, s)| (s, i)).collect();
        assert!(
            support.len() < 64,
            "guard support too large for exhaustive search"
        );
        let total: u64 = 1 << support.len();
        for mask in 0..total {
            let v = self.eval_with(&|s| mask >> index[s] & 1 == 1);
            if v == target {
                return Some(
                    support
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask >> i & 1 == 1)
                        .map(|(_, s)| s.clone())
                        .collect(),
                );
            }
        }
        None
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Or(..) => 0,
            Formula::And(..) => 1,
            _ => 2,
        }
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.precedence() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Formula::True => f.write_str("1")?,
            Formula::False => f.write_str("0")?,
            Formula::Atom(s) => write!(f, "{s}")?,
            Formula::Not(x) => {
                f.write_str("!")?;
                x.write_prec(f, 2)?;
            }
            Formula::And(a, b) => {
                a.write_prec(f, 1)?;
                f.write_str("*")?;
                b.write_prec(f, 2)?;
            }
            Formula::Or(a, b) => {
                a.write_prec(f, 0)?;
                f.write_str(" + ")?;
                b.write_prec(f, 1)?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Formula({self})")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("empty guard")]
    Empty,
    #[error("guard syntax error at {0}")]
    Syntax(#[from] SyntaxError),
}

/// Parses a guard. Precedence is `!` over `*` over `+`.
pub fn parse_formula(text: &str) -> Result<Formula, FormulaError> {
    let toks = lex::tokenize(text, false)?;
    let mut cur = Cursor::new(toks);
    if cur.at_eof() {
        return Err(FormulaError::Empty);
    }
    let f = parse_sum(&mut cur)?;
    if !cur.at_eof() {
        return Err(cur.unexpected("`+`, `*` or end of guard").into());
    }
    Ok(f)
}

fn parse_sum(cur: &mut Cursor) -> Result<Formula, SyntaxError> {
    let mut lhs = parse_product(cur)?;
    while cur.eat_punct("+") {
        let rhs = parse_product(cur)?;
        lhs = Formula::Or(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_product(cur: &mut Cursor) -> Result<Formula, SyntaxError> {
    let mut lhs = parse_factor(cur)?;
    while cur.eat_punct("*") {
        let rhs = parse_factor(cur)?;
        lhs = Formula::And(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_factor(cur: &mut Cursor) -> Result<Formula, SyntaxError> {
    if cur.eat_punct("!") {
        return Ok(Formula::Not(Box::new(parse_factor(cur)?)));
    }
    if cur.eat_punct("(") {
        let f = parse_sum(cur)?;
        cur.expect_punct(")")?;
        return Ok(f);
    }
    let t = cur.peek().clone();
    match t.tok {
        Tok::Number(ref n) if n == "1" => {
            cur.bump();
            Ok(Formula::True)
        }
        Tok::Number(ref n) if n == "0" => {
            cur.bump();
            Ok(Formula::False)
        }
        Tok::Ident(ref s) => {
            cur.bump();
            Ok(Formula::Atom(Symbol(Arc::from(s.as_str()))))
        }
        _ => Err(cur.unexpected("`!`, `(`, `1`, `0` or a symbol")),
    }
}
