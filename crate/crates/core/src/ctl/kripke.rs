use std::collections::HashMap;

use fixedbitset::FixedBitSet;

use super::CheckError;
use crate::boolform::Symbol;
use crate::product::{ReachabilityGraph, StateId};

pub type StateSet = FixedBitSet;

/// Explicit transition graph with edge-based generalized Büchi fairness.
///
/// Edge indices of a graph derived from a [`ReachabilityGraph`] coincide
/// with product-edge indices; stutter loops added for deadlocks come after.
#[derive(Debug, Clone)]
pub struct Kripke {
    num_states: usize,
    initial: usize,
    edges: Vec<(usize, usize)>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
    fairness: Vec<FixedBitSet>,
}

impl Kripke {
    /// `fairness[i]` lists the member edge indices of set `i`.
    pub fn new(
        num_states: usize,
        initial: usize,
        edges: Vec<(usize, usize)>,
        fairness: Vec<Vec<usize>>,
    ) -> Kripke {
        let sets = fairness
            .into_iter()
            .map(|members| {
                let mut b = FixedBitSet::with_capacity(edges.len());
                for e in members {
                    b.insert(e);
                }
                b
            })
            .collect();
        Self::from_parts(num_states, initial, edges, sets)
    }

    fn from_parts(
        num_states: usize,
        initial: usize,
        edges: Vec<(usize, usize)>,
        fairness: Vec<FixedBitSet>,
    ) -> Kripke {
        assert!(initial < num_states.max(1));
        let mut outgoing = vec![Vec::new(); num_states];
        let mut incoming = vec![Vec::new(); num_states];
        for (i, &(s, d)) in edges.iter().enumerate() {
            outgoing[s].push(i);
            incoming[d].push(i);
        }
        Kripke {
            num_states,
            initial,
            edges,
            outgoing,
            incoming,
            fairness,
        }
    }

    /// Kripke view of a product graph. Deadlock states are an error unless
    /// `allow_deadlock`, in which case each gets a stutter self-loop that
    /// belongs to no fairness set. Returns the patched states.
    pub fn from_graph(
        rg: &ReachabilityGraph,
        allow_deadlock: bool,
    ) -> Result<(Kripke, Vec<StateId>), CheckError> {
        let mut dead: Vec<StateId> = (0..rg.states().len())
            .filter(|&s| rg.outgoing(s).is_empty())
            .collect();
        dead.sort_unstable();
        if !dead.is_empty() && !allow_deadlock {
            return Err(CheckError::Deadlock(dead));
        }
        let mut edges: Vec<(usize, usize)> = rg.edges().iter().map(|e| (e.src, e.dst)).collect();
        edges.extend(dead.iter().map(|&s| (s, s)));
        let fairness = rg
            .fairness()
            .iter()
            .map(|f| {
                let mut b = f.members.clone();
                b.grow(edges.len());
                b
            })
            .collect();
        Ok((
            Self::from_parts(rg.states().len(), rg.initial(), edges, fairness),
            dead,
        ))
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn outgoing(&self, s: usize) -> &[usize] {
        &self.outgoing[s]
    }

    pub fn incoming(&self, s: usize) -> &[usize] {
        &self.incoming[s]
    }

    pub fn fairness(&self) -> &[FixedBitSet] {
        &self.fairness
    }

    pub fn deadlocks(&self) -> Vec<usize> {
        (0..self.num_states)
            .filter(|&s| self.outgoing[s].is_empty())
            .collect()
    }

    pub fn empty_set(&self) -> StateSet {
        FixedBitSet::with_capacity(self.num_states)
    }

    pub fn full_set(&self) -> StateSet {
        let mut s = self.empty_set();
        s.insert_range(..);
        s
    }
}

/// Resolves atomic propositions to state sets.
pub trait Labeling {
    fn in_state(&self, machine: &str, node: &str) -> Result<StateSet, CheckError>;
    fn emits(&self, symbol: &Symbol) -> Result<StateSet, CheckError>;
}

impl Labeling for ReachabilityGraph {
    fn in_state(&self, machine: &str, node: &str) -> Result<StateSet, CheckError> {
        let sys = self.system();
        let mi = sys
            .machine_index(machine)
            .ok_or_else(|| CheckError::UnknownMachine(machine.to_string()))?;
        let ni = sys.machines()[mi]
            .node_index(node)
            .ok_or_else(|| CheckError::UnknownNode {
                machine: machine.to_string(),
                node: node.to_string(),
            })?;
        let mut set = FixedBitSet::with_capacity(self.states().len());
        for (i, g) in self.states().iter().enumerate() {
            set.set(i, g.0[mi] == ni);
        }
        Ok(set)
    }

    fn emits(&self, symbol: &Symbol) -> Result<StateSet, CheckError> {
        let sys = self.system();
        let mut set = FixedBitSet::with_capacity(self.states().len());
        for (i, g) in self.states().iter().enumerate() {
            let hit = sys
                .machines()
                .iter()
                .zip(&g.0)
                .any(|(m, &n)| m.nodes()[n].outputs.contains(symbol));
            set.set(i, hit);
        }
        Ok(set)
    }
}

/// Labeling for plain Kripke graphs: each `emits(p)` atom is a fixed state
/// set; `in(..)` atoms are not available.
#[derive(Debug, Clone, Default)]
pub struct SymbolLabels {
    num_states: usize,
    sets: HashMap<Symbol, StateSet>,
}

impl SymbolLabels {
    pub fn new(num_states: usize) -> Self {
        SymbolLabels {
            num_states,
            sets: HashMap::new(),
        }
    }

    pub fn insert(&mut self, symbol: Symbol, states: impl IntoIterator<Item = usize>) {
        let mut set = FixedBitSet::with_capacity(self.num_states);
        set.extend(states);
        self.sets.insert(symbol, set);
    }
}

impl Labeling for SymbolLabels {
    fn in_state(&self, machine: &str, _node: &str) -> Result<StateSet, CheckError> {
        Err(CheckError::UnknownMachine(machine.to_string()))
    }

    fn emits(&self, symbol: &Symbol) -> Result<StateSet, CheckError> {
        Ok(self
            .sets
            .get(symbol)
            .cloned()
            .unwrap_or_else(|| FixedBitSet::with_capacity(self.num_states)))
    }
}
