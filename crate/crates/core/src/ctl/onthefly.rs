//! `AG p` for state predicates, evaluated while the product is explored.
//! Exploration stops at the first discovered `¬p` state.

use super::eval::CheckResult;
use super::kripke::Kripke;
use super::witness::{Trace, TraceKind};
use super::{CheckError, CtlFormula};
use crate::csm::{GlobalState, System};
use crate::product::{explore, Limits, ReachabilityGraph};

#[derive(Debug, Clone)]
pub struct OnTheFly {
    pub result: CheckResult,
    /// The explored part of the product (all of it when the check passed).
    pub graph: ReachabilityGraph,
    /// Shortest path to the first violation, over `graph`'s edge indices.
    pub counterexample: Option<Trace>,
    pub states_explored: usize,
    /// BFS layers that received at least one state.
    pub layers: usize,
}

/// Evaluates a state predicate on one global state.
pub fn eval_state(s: &System, f: &CtlFormula, g: &GlobalState) -> Result<bool, CheckError> {
    Ok(compile(s, f)?.eval(s, g))
}

enum Pred {
    Const(bool),
    In(usize, usize),
    Emits(crate::boolform::Symbol),
    Not(Box<Pred>),
    And(Box<Pred>, Box<Pred>),
    Or(Box<Pred>, Box<Pred>),
}

impl Pred {
    fn eval(&self, s: &System, g: &GlobalState) -> bool {
        match self {
            Pred::Const(b) => *b,
            Pred::In(m, n) => g.0[*m] == *n,
            Pred::Emits(sym) => s
                .machines()
                .iter()
                .zip(&g.0)
                .any(|(m, &n)| m.nodes()[n].outputs.contains(sym)),
            Pred::Not(p) => !p.eval(s, g),
            Pred::And(a, b) => a.eval(s, g) && b.eval(s, g),
            Pred::Or(a, b) => a.eval(s, g) || b.eval(s, g),
        }
    }
}

fn compile(s: &System, f: &CtlFormula) -> Result<Pred, CheckError> {
    Ok(match f {
        CtlFormula::True => Pred::Const(true),
        CtlFormula::False => Pred::Const(false),
        CtlFormula::InState { machine, node } => {
            let mi = s
                .machine_index(machine)
                .ok_or_else(|| CheckError::UnknownMachine(machine.clone()))?;
            let ni = s.machines()[mi]
                .node_index(node)
                .ok_or_else(|| CheckError::UnknownNode {
                    machine: machine.clone(),
                    node: node.clone(),
                })?;
            Pred::In(mi, ni)
        }
        CtlFormula::Emits(sym) => Pred::Emits(sym.clone()),
        CtlFormula::Not(x) => Pred::Not(Box::new(compile(s, x)?)),
        CtlFormula::And(a, b) => Pred::And(Box::new(compile(s, a)?), Box::new(compile(s, b)?)),
        CtlFormula::Or(a, b) => Pred::Or(Box::new(compile(s, a)?), Box::new(compile(s, b)?)),
        other => return Err(CheckError::NotStatePredicate(other.to_string())),
    })
}

/// Checks `AG p` without materializing the whole product.
pub fn check_on_the_fly(s: &System, p: &CtlFormula) -> Result<OnTheFly, CheckError> {
    check_on_the_fly_with(s, p, Limits::default())
}

pub fn check_on_the_fly_with(
    s: &System,
    p: &CtlFormula,
    limits: Limits,
) -> Result<OnTheFly, CheckError> {
    let pred = compile(s, p)?;
    let ex = explore(s, limits, |g| !pred.eval(s, g))?;
    let graph = ex.graph;
    let (k, _) = Kripke::from_graph(&graph, true)?;
    let n = graph.states().len();
    let mut satisfying = k.empty_set();
    for (i, g) in graph.states().iter().enumerate() {
        satisfying.set(i, pred.eval(s, g));
    }
    let counterexample = ex.stopped_at.map(|bad| {
        // BFS discovery order makes the tree path through first-discovering
        // edges a shortest one.
        let mut path = Vec::new();
        let mut at = bad;
        while at != graph.initial() {
            let e = (0..graph.edges().len())
                .find(|&e| {
                    graph.edges()[e].dst == at
                        && graph.depth(graph.edges()[e].src) + 1 == graph.depth(at)
                })
                .expect("discovering edge");
            path.push(e);
            at = graph.edges()[e].src;
        }
        path.reverse();
        Trace {
            kind: TraceKind::Path,
            prefix: path,
            cycle: Vec::new(),
        }
    });
    let holds = ex.stopped_at.is_none();
    Ok(OnTheFly {
        result: CheckResult {
            holds_at_initial: holds,
            satisfying,
            complete: holds,
            fair: false,
            patched_deadlocks: Vec::new(),
        },
        states_explored: n,
        layers: ex.layers,
        graph,
        counterexample,
    })
}
