//! CLG graphs, machines and systems.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::boolform::{Formula, Symbol};
use crate::lex;

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid identifier `{0}`")]
    InvalidIdentifier(String),
    #[error("duplicate node `{node}` in machine `{machine}`")]
    DuplicateNode { machine: String, node: String },
    #[error("edge {src} -> {dst} in machine `{machine}` names a missing node")]
    DanglingEdge {
        machine: String,
        src: String,
        dst: String,
    },
    #[error("unknown node `{node}` in machine `{machine}`")]
    UnknownNode { machine: String, node: String },
    #[error("duplicate machine `{0}`")]
    DuplicateMachine(String),
    #[error("a system needs at least one machine")]
    EmptySystem,
    #[error("observer `{machine}` emits {symbols:?}; observers must be silent")]
    NoisyObserver {
        machine: String,
        symbols: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub name: String,
    pub outputs: BTreeSet<Symbol>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub guard: Formula,
}

impl Edge {
    /// A self-loop: the machine may remain where it is.
    pub fn is_ear(&self) -> bool {
        self.src == self.dst
    }

    pub fn is_transition(&self) -> bool {
        !self.is_ear()
    }
}

/// A labeled graph: nodes with output sets, edges with guards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clg {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    outgoing: Vec<Vec<EdgeId>>,
}

impl Clg {
    /// Builds a graph from named nodes and name-addressed edges.
    pub fn new<S: AsRef<str>>(
        nodes: Vec<Node>,
        edges: impl IntoIterator<Item = (S, S, Formula)>,
    ) -> Result<Clg, ModelError> {
        Self::named("", nodes, edges)
    }

    pub(crate) fn named<S: AsRef<str>>(
        machine: &str,
        nodes: Vec<Node>,
        edges: impl IntoIterator<Item = (S, S, Formula)>,
    ) -> Result<Clg, ModelError> {
        let mut index = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if !lex::is_ident(&n.name) {
                return Err(ModelError::InvalidIdentifier(n.name.clone()));
            }
            if index.insert(n.name.clone(), i).is_some() {
                return Err(ModelError::DuplicateNode {
                    machine: machine.to_string(),
                    node: n.name.clone(),
                });
            }
        }
        let mut es = Vec::new();
        for (s, d, guard) in edges {
            let (s, d) = (s.as_ref(), d.as_ref());
            match (index.get(s), index.get(d)) {
                (Some(&src), Some(&dst)) => es.push(Edge { src, dst, guard }),
                _ => {
                    return Err(ModelError::DanglingEdge {
                        machine: machine.to_string(),
                        src: s.to_string(),
                        dst: d.to_string(),
                    })
                }
            }
        }
        let mut outgoing = vec![Vec::new(); nodes.len()];
        for (i, e) in es.iter().enumerate() {
            outgoing[e.src].push(i);
        }
        Ok(Clg {
            nodes,
            edges: es,
            outgoing,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn outgoing(&self, node: NodeId) -> &[EdgeId] {
        &self.outgoing[node]
    }

    pub fn node_index(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Machine {
    name: String,
    graph: Clg,
    initial: NodeId,
}

/// Turns a CLG into a machine by choosing its initial node.
pub fn make_machine(name: &str, clg: Clg, initial: &str) -> Result<Machine, ModelError> {
    if !lex::is_ident(name) {
        return Err(ModelError::InvalidIdentifier(name.to_string()));
    }
    let initial = clg
        .node_index(initial)
        .ok_or_else(|| ModelError::UnknownNode {
            machine: name.to_string(),
            node: initial.to_string(),
        })?;
    Ok(Machine {
        name: name.to_string(),
        graph: clg,
        initial,
    })
}

impl Machine {
    /// Builds a machine from node `(name, outputs)` pairs and `(src, dst, guard)` edges.
    pub fn build(
        name: &str,
        initial: &str,
        nodes: &[(&str, &[&str])],
        edges: &[(&str, &str, Formula)],
    ) -> Result<Machine, ModelError> {
        let mut ns = Vec::new();
        for (n, outs) in nodes {
            let mut outputs = BTreeSet::new();
            for o in outs.iter() {
                outputs.insert(
                    Symbol::new(o).map_err(|_| ModelError::InvalidIdentifier(o.to_string()))?,
                );
            }
            ns.push(Node {
                name: n.to_string(),
                outputs,
            });
        }
        let clg = Clg::named(name, ns, edges.iter().map(|(s, d, g)| (*s, *d, g.clone())))?;
        make_machine(name, clg, initial)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn graph(&self) -> &Clg {
        &self.graph
    }

    pub fn initial(&self) -> NodeId {
        self.initial
    }

    pub fn nodes(&self) -> &[Node] {
        self.graph.nodes()
    }

    pub fn edges(&self) -> &[Edge] {
        self.graph.edges()
    }

    pub fn node_name(&self, n: NodeId) -> &str {
        &self.graph.nodes[n].name
    }

    pub fn node_index(&self, name: &str) -> Option<NodeId> {
        self.graph.node_index(name)
    }

    pub fn outputs(&self) -> BTreeSet<Symbol> {
        self.nodes()
            .iter()
            .flat_map(|n| n.outputs.iter().cloned())
            .collect()
    }

    pub fn guard_symbols(&self) -> BTreeSet<Symbol> {
        self.edges()
            .iter()
            .flat_map(|e| e.guard.support())
            .collect()
    }

    /// Edges between distinct nodes.
    pub fn transitions(&self) -> impl Iterator<Item = (EdgeId, &Edge)> {
        self.edges()
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_transition())
    }

    pub fn rename(mut self, name: &str) -> Result<Machine, ModelError> {
        if !lex::is_ident(name) {
            return Err(ModelError::InvalidIdentifier(name.to_string()));
        }
        self.name = name.to_string();
        Ok(self)
    }
}

/// Outgoing edges of `at` that can fire when exactly the internal symbols in
/// `received` are present. Atoms in `env_free` stay free; each result carries
/// the satisfiable residual guard over them.
pub fn enabled_edges(
    m: &Machine,
    at: NodeId,
    received: &BTreeSet<Symbol>,
    env_free: &BTreeSet<Symbol>,
) -> Result<Vec<(EdgeId, Formula)>, ModelError> {
    if at >= m.nodes().len() {
        return Err(ModelError::UnknownNode {
            machine: m.name.clone(),
            node: format!("#{at}"),
        });
    }
    let fixed = |s: &Symbol| {
        if env_free.contains(s) {
            None
        } else {
            Some(received.contains(s))
        }
    };
    Ok(m.graph
        .outgoing(at)
        .iter()
        .filter_map(|&e| {
            let residual = m.edges()[e].guard.restrict_with(&fixed);
            residual.is_satisfiable().then_some((e, residual))
        })
        .collect())
}

/// Vector of current nodes, one per machine in system order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GlobalState(pub Vec<NodeId>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct System {
    machines: Vec<Machine>,
    declared_env: Option<BTreeSet<Symbol>>,
    internal: BTreeSet<Symbol>,
    environment: BTreeSet<Symbol>,
}

impl System {
    pub fn new(machines: Vec<Machine>) -> Result<System, ModelError> {
        if machines.is_empty() {
            return Err(ModelError::EmptySystem);
        }
        let mut names = BTreeSet::new();
        for m in &machines {
            if !names.insert(m.name.clone()) {
                return Err(ModelError::DuplicateMachine(m.name.clone()));
            }
        }
        let internal: BTreeSet<Symbol> = machines.iter().flat_map(|m| m.outputs()).collect();
        let environment = machines
            .iter()
            .flat_map(|m| m.guard_symbols())
            .filter(|s| !internal.contains(s))
            .collect();
        Ok(System {
            machines,
            declared_env: None,
            internal,
            environment,
        })
    }

    /// Records an explicit environment declaration; `validate_system` checks
    /// it against the inferred alphabet.
    pub fn with_declared_env(mut self, env: BTreeSet<Symbol>) -> System {
        self.declared_env = Some(env);
        self
    }

    pub fn machines(&self) -> &[Machine] {
        &self.machines
    }

    pub fn machine_index(&self, name: &str) -> Option<usize> {
        self.machines.iter().position(|m| m.name == name)
    }

    pub fn declared_env(&self) -> Option<&BTreeSet<Symbol>> {
        self.declared_env.as_ref()
    }

    pub fn internal_alphabet(&self) -> &BTreeSet<Symbol> {
        &self.internal
    }

    pub fn environment_alphabet(&self) -> &BTreeSet<Symbol> {
        &self.environment
    }

    pub fn initial_state(&self) -> GlobalState {
        GlobalState(self.machines.iter().map(|m| m.initial).collect())
    }

    /// Union of the current nodes' outputs.
    pub fn emit(&self, g: &GlobalState) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        for (m, &n) in self.machines.iter().zip(&g.0) {
            out.extend(m.nodes()[n].outputs.iter().cloned());
        }
        out
    }

    /// Producer map; lists every machine emitting each internal symbol.
    pub fn producers(&self) -> BTreeMap<Symbol, Vec<usize>> {
        let mut map: BTreeMap<Symbol, Vec<usize>> = BTreeMap::new();
        for (i, m) in self.machines.iter().enumerate() {
            for s in m.outputs() {
                map.entry(s).or_default().push(i);
            }
        }
        map
    }

    /// Appends a silent observer machine.
    pub fn add_observer(&self, observer: Machine) -> Result<System, ModelError> {
        let outs = observer.outputs();
        if !outs.is_empty() {
            return Err(ModelError::NoisyObserver {
                machine: observer.name.clone(),
                symbols: outs.iter().map(|s| s.to_string()).collect(),
            });
        }
        let mut machines = self.machines.clone();
        machines.push(observer);
        let mut s = System::new(machines)?;
        s.declared_env = self.declared_env.clone();
        Ok(s)
    }

    pub fn format_state(&self, g: &GlobalState) -> String {
        let parts: Vec<String> = self
            .machines
            .iter()
            .zip(&g.0)
            .map(|(m, &n)| format!("{}.{}", m.name, m.node_name(n)))
            .collect();
        format!("({})", parts.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    fn error(message: String) -> Self {
        Diagnostic {
            severity: Severity::Error,
            message,
        }
    }

    fn warning(message: String) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            message,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

/// Static checks. Errors make the system unusable for product construction;
/// warnings flag likely modeling mistakes.
pub fn validate_system(s: &System) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    for (sym, owners) in s.producers() {
        if owners.len() > 1 {
            let names: Vec<&str> = owners.iter().map(|&i| s.machines[i].name()).collect();
            out.push(Diagnostic::error(format!(
                "duplicate producer {sym}: emitted by {}",
                names.join(", ")
            )));
        }
    }

    if let Some(declared) = &s.declared_env {
        for sym in declared.intersection(&s.internal) {
            out.push(Diagnostic::error(format!(
                "symbol {sym} is produced inside the system but declared as environment input"
            )));
        }
        let declared_ext: BTreeSet<_> = declared.difference(&s.internal).cloned().collect();
        if declared_ext != s.environment {
            out.push(Diagnostic::error(format!(
                "declared environment {{{}}} does not match inferred {{{}}}",
                join(&declared_ext),
                join(&s.environment)
            )));
        }
    }

    for m in &s.machines {
        for (n, node) in m.nodes().iter().enumerate() {
            let outgoing = m.graph.outgoing(n);
            if outgoing.is_empty() {
                out.push(Diagnostic::warning(format!(
                    "node {}.{} has no outgoing edges",
                    m.name, node.name
                )));
                continue;
            }
            let cover = Formula::or_all(outgoing.iter().map(|&e| m.edges()[e].guard.clone()));
            if let Some(present) = cover.falsifying_assignment() {
                let cond: Vec<String> = cover
                    .support()
                    .iter()
                    .map(|sym| {
                        if present.contains(sym) {
                            format!("{sym} present")
                        } else {
                            format!("{sym} absent")
                        }
                    })
                    .collect();
                out.push(Diagnostic::warning(format!(
                    "node {}.{} may block when {}",
                    m.name,
                    node.name,
                    cond.join(", ")
                )));
            }
        }

        let mut seen = vec![false; m.nodes().len()];
        seen[m.initial] = true;
        let mut queue = VecDeque::from([m.initial]);
        while let Some(n) = queue.pop_front() {
            for &e in m.graph.outgoing(n) {
                let edge = &m.edges()[e];
                if !seen[edge.dst] && edge.guard.is_satisfiable() {
                    seen[edge.dst] = true;
                    queue.push_back(edge.dst);
                }
            }
        }
        for (n, reached) in seen.iter().enumerate() {
            if !reached {
                out.push(Diagnostic::warning(format!(
                    "node {}.{} is unreachable",
                    m.name,
                    m.node_name(n)
                )));
            }
        }
    }

    let read: BTreeSet<Symbol> = s.machines.iter().flat_map(|m| m.guard_symbols()).collect();
    for sym in s.internal.difference(&read) {
        out.push(Diagnostic::warning(format!("symbol {sym} is never read")));
    }

    out.sort_by_key(|d| d.severity);
    out
}

fn join(set: &BTreeSet<Symbol>) -> String {
    set.iter()
        .map(|s| s.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}
