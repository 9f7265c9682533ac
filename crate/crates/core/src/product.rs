//! The CSM product: reachability graph of a system under broadcast
//! semantics, with void-edge cancellation and per-transition fairness sets.
//!
//! One global step moves every machine along exactly one enabled edge (an
//! ear or a transition). All machines see the union of the outputs of the
//! *current* nodes plus whatever the environment supplies; environment
//! symbols are left free and end up in the residual guard of each product
//! edge.

use std::collections::HashMap;

use fixedbitset::FixedBitSet;
use serde::Serialize;
use thiserror::Error;

use crate::boolform::Formula;
use crate::csm::{enabled_edges, validate_system, Diagnostic, EdgeId, GlobalState, System};

pub type StateId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductEdge {
    pub src: StateId,
    pub dst: StateId,
    /// Condition on environment symbols; always satisfiable.
    pub residual: Formula,
    /// The component edge taken by each machine, in system order.
    pub choices: Vec<EdgeId>,
}

/// Weak-fairness obligation of one component transition. A product edge is
/// a member when it takes the transition or when the transition cannot fire
/// at the edge's source under the edge's residual.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FairnessSet {
    pub machine: usize,
    pub transition: EdgeId,
    pub members: FixedBitSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub states: usize,
    pub edges: usize,
    pub deadlocks: usize,
    pub fairness_sets: usize,
    pub env_alphabet_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Limits {
    pub max_states: Option<usize>,
    pub max_edges: Option<usize>,
}

impl Limits {
    pub fn states(n: usize) -> Self {
        Limits {
            max_states: Some(n),
            max_edges: None,
        }
    }
}

#[derive(Debug, Clone, Error)]
pub enum ProductError {
    #[error("system has validation errors: {}", .0.iter().map(|d| d.message.as_str()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("{what} limit of {limit} exceeded after exploring {} states and {} edges", .partial.states, .partial.edges)]
    CapExceeded {
        what: &'static str,
        limit: usize,
        partial: Stats,
    },
}

/// A successor of a global state before indexing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Successor {
    pub dst: GlobalState,
    pub residual: Formula,
    pub choices: Vec<EdgeId>,
}

/// All non-void global moves out of `g`, in machine-major lexicographic
/// order of the component edges chosen.
pub fn successors(s: &System, g: &GlobalState) -> Vec<Successor> {
    let received = s.emit(g);
    let env = s.environment_alphabet();
    let candidates: Vec<Vec<(EdgeId, Formula)>> = s
        .machines()
        .iter()
        .zip(&g.0)
        .map(|(m, &n)| enabled_edges(m, n, &received, env).expect("state refers to valid nodes"))
        .collect();
    let mut out = Vec::new();
    if candidates.iter().any(|c| c.is_empty()) {
        return out;
    }
    let mut choices = Vec::with_capacity(candidates.len());
    extend_tuple(s, &candidates, &mut choices, Formula::True, &mut out);
    out
}

fn extend_tuple(
    s: &System,
    candidates: &[Vec<(EdgeId, Formula)>],
    choices: &mut Vec<EdgeId>,
    conj: Formula,
    out: &mut Vec<Successor>,
) {
    let depth = choices.len();
    if depth == candidates.len() {
        let dst = GlobalState(
            choices
                .iter()
                .zip(s.machines())
                .map(|(&e, m)| m.edges()[e].dst)
                .collect(),
        );
        out.push(Successor {
            dst,
            residual: conj,
            choices: choices.clone(),
        });
        return;
    }
    for (edge, residual) in &candidates[depth] {
        let next = Formula::and(conj.clone(), residual.clone());
        // A void partial tuple prunes its whole subtree.
        if next.is_unsatisfiable() {
            continue;
        }
        choices.push(*edge);
        extend_tuple(s, candidates, choices, next, out);
        choices.pop();
    }
}

#[derive(Debug, Clone)]
pub struct ReachabilityGraph {
    system: System,
    states: Vec<GlobalState>,
    index: HashMap<GlobalState, StateId>,
    edges: Vec<ProductEdge>,
    outgoing: Vec<Vec<usize>>,
    deadlocks: Vec<StateId>,
    fairness: Vec<FairnessSet>,
    depth: Vec<usize>,
}

impl ReachabilityGraph {
    pub fn system(&self) -> &System {
        &self.system
    }

    pub fn states(&self) -> &[GlobalState] {
        &self.states
    }

    pub fn state(&self, id: StateId) -> &GlobalState {
        &self.states[id]
    }

    pub fn state_id(&self, g: &GlobalState) -> Option<StateId> {
        self.index.get(g).copied()
    }

    pub fn initial(&self) -> StateId {
        0
    }

    pub fn edges(&self) -> &[ProductEdge] {
        &self.edges
    }

    pub fn outgoing(&self, s: StateId) -> &[usize] {
        &self.outgoing[s]
    }

    pub fn deadlocks(&self) -> &[StateId] {
        &self.deadlocks
    }

    pub fn fairness(&self) -> &[FairnessSet] {
        &self.fairness
    }

    /// BFS layer of each state, counted from the initial state.
    pub fn depth(&self, s: StateId) -> usize {
        self.depth[s]
    }

    pub fn stats(&self) -> Stats {
        Stats {
            states: self.states.len(),
            edges: self.edges.len(),
            deadlocks: self.deadlocks.len(),
            fairness_sets: self.fairness.len(),
            env_alphabet_size: self.system.environment_alphabet().len(),
        }
    }

    pub fn format_state(&self, s: StateId) -> String {
        self.system.format_state(&self.states[s])
    }
}

/// Builds the full reachability graph.
pub fn build_product(s: &System) -> Result<ReachabilityGraph, ProductError> {
    build_product_with(s, Limits::default())
}

pub fn build_product_with(s: &System, limits: Limits) -> Result<ReachabilityGraph, ProductError> {
    let errors: Vec<Diagnostic> = validate_system(s)
        .into_iter()
        .filter(|d| d.is_error())
        .collect();
    if !errors.is_empty() {
        return Err(ProductError::Invalid(errors));
    }
    Ok(explore(s, limits, |_| false)?.graph)
}

pub fn stats(rg: &ReachabilityGraph) -> Stats {
    rg.stats()
}

/// Result of a breadth-first exploration that may stop early.
#[derive(Debug, Clone)]
pub struct Exploration {
    pub graph: ReachabilityGraph,
    /// The first state for which the stop predicate fired.
    pub stopped_at: Option<StateId>,
    /// Number of BFS layers that contain at least one discovered state.
    pub layers: usize,
}

/// Breadth-first closure of `successors`. `stop` is consulted for each newly
/// discovered state (the initial one included); returning true ends the
/// search with the partial graph built so far.
pub fn explore(
    s: &System,
    limits: Limits,
    mut stop: impl FnMut(&GlobalState) -> bool,
) -> Result<Exploration, ProductError> {
    let mut rg = ReachabilityGraph {
        system: s.clone(),
        states: Vec::new(),
        index: HashMap::new(),
        edges: Vec::new(),
        outgoing: Vec::new(),
        deadlocks: Vec::new(),
        fairness: Vec::new(),
        depth: Vec::new(),
    };
    let init = s.initial_state();
    rg.index.insert(init.clone(), 0);
    rg.states.push(init.clone());
    rg.outgoing.push(Vec::new());
    rg.depth.push(0);
    if stop(&init) {
        finish(&mut rg, 1);
        return Ok(Exploration {
            graph: rg,
            stopped_at: Some(0),
            layers: 1,
        });
    }

    let mut next = 0;
    while next < rg.states.len() {
        let src = next;
        next += 1;
        let succ = successors(s, &rg.states[src]);
        if succ.is_empty() {
            rg.deadlocks.push(src);
        }
        for Successor {
            dst,
            residual,
            choices,
        } in succ
        {
            let (dst_id, fresh) = match rg.index.get(&dst) {
                Some(&id) => (id, false),
                None => {
                    let id = rg.states.len();
                    if let Some(limit) = limits.max_states {
                        if id >= limit {
                            finish(&mut rg, next);
                            return Err(cap("state", limit, &rg));
                        }
                    }
                    rg.index.insert(dst.clone(), id);
                    rg.states.push(dst.clone());
                    rg.outgoing.push(Vec::new());
                    rg.depth.push(rg.depth[src] + 1);
                    (id, true)
                }
            };
            if let Some(limit) = limits.max_edges {
                if rg.edges.len() >= limit {
                    finish(&mut rg, next);
                    return Err(cap("edge", limit, &rg));
                }
            }
            let e = rg.edges.len();
            rg.edges.push(ProductEdge {
                src,
                dst: dst_id,
                residual,
                choices,
            });
            rg.outgoing[src].push(e);
            if fresh && stop(&dst) {
                finish(&mut rg, next);
                let layers = rg.depth[dst_id] + 1;
                return Ok(Exploration {
                    graph: rg,
                    stopped_at: Some(dst_id),
                    layers,
                });
            }
        }
    }
    let expanded = rg.states.len();
    finish(&mut rg, expanded);
    let layers = rg.depth.iter().max().map_or(0, |d| d + 1);
    Ok(Exploration {
        graph: rg,
        stopped_at: None,
        layers,
    })
}

fn cap(what: &'static str, limit: usize, rg: &ReachabilityGraph) -> ProductError {
    ProductError::CapExceeded {
        what,
        limit,
        partial: rg.stats(),
    }
}

// Computes fairness sets over the first `expanded` states' edges.
fn finish(rg: &mut ReachabilityGraph, expanded: usize) {
    let s = &rg.system;
    let env = s.environment_alphabet();
    let mut sets = Vec::new();
    let mut set_of: HashMap<(usize, EdgeId), usize> = HashMap::new();
    for (mi, m) in s.machines().iter().enumerate() {
        for (t, _) in m.transitions() {
            set_of.insert((mi, t), sets.len());
            let mut members = FixedBitSet::with_capacity(rg.edges.len());
            members.insert_range(..);
            sets.push(FairnessSet {
                machine: mi,
                transition: t,
                members,
            });
        }
    }

    for src in 0..expanded.min(rg.states.len()) {
        if rg.outgoing[src].is_empty() {
            continue;
        }
        let g = &rg.states[src];
        let received = s.emit(g);
        // Transitions leaving each machine's current node, with their residuals.
        let mut local: Vec<(usize, EdgeId, Formula)> = Vec::new();
        for (mi, (m, &n)) in s.machines().iter().zip(&g.0).enumerate() {
            for (t, r) in enabled_edges(m, n, &received, env).expect("valid node") {
                if m.edges()[t].is_transition() {
                    local.push((mi, t, r));
                }
            }
        }
        for &e in &rg.outgoing[src] {
            let edge = &rg.edges[e];
            for (mi, t, r) in &local {
                if edge.choices[*mi] == *t {
                    continue;
                }
                if Formula::and(edge.residual.clone(), r.clone()).is_satisfiable() {
                    sets[set_of[&(*mi, *t)]].members.set(e, false);
                }
            }
        }
    }
    rg.fairness = sets;
}

/// Appends a silent observer machine to the system.
pub fn add_observer(
    s: &System,
    observer: crate::csm::Machine,
) -> Result<System, crate::csm::ModelError> {
    s.add_observer(observer)
}
