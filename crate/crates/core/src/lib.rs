//! Explicit-state model checking for systems of Concurrent State Machines.
//!
//! Machines are labeled graphs whose nodes emit symbol sets and whose edges
//! carry Boolean guards over received symbols. A system runs its machines in
//! lock-step under broadcast communication; [`product::build_product`]
//! computes the reachable global state graph and [`ctl`] evaluates CTL
//! formulas on it, optionally under weak fairness.

pub mod boolform;
pub mod casestudy;
pub mod cli;
pub mod csm;
pub mod ctl;
mod lex;
pub mod modelfmt;
pub mod product;

pub use boolform::{parse_formula, Formula, Symbol};
pub use csm::{
    make_machine, validate_system, Clg, Diagnostic, Edge, GlobalState, Machine, Node, System,
};
pub use ctl::{check, parse_ctl, CheckResult, CtlFormula, Trace};
pub use lex::SyntaxError;
pub use product::{build_product, ReachabilityGraph, Stats};
