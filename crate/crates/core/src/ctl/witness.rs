//! Linear witnesses and counterexamples: finite paths and lassos.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::eval::{CheckResult, Evaluator};
use super::kripke::{Kripke, Labeling, StateSet};
use super::{CheckError, CtlFormula};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    Path,
    Lasso,
}

/// A sequence of edge indices from the initial state. For a lasso, `cycle`
/// starts and ends at the state where `prefix` ends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub kind: TraceKind,
    pub prefix: Vec<usize>,
    pub cycle: Vec<usize>,
}

impl Trace {
    /// States visited along prefix then cycle, starting with the initial one.
    pub fn states(&self, k: &Kripke) -> Vec<usize> {
        let mut out = vec![k.initial()];
        for &e in self.prefix.iter().chain(&self.cycle) {
            out.push(k.edges()[e].1);
        }
        out
    }

    /// Where the prefix ends (the cycle entry of a lasso).
    pub fn prefix_end(&self, k: &Kripke) -> usize {
        self.prefix.last().map_or(k.initial(), |&e| k.edges()[e].1)
    }
}

/// Builds a witness for a true existential or a counterexample for a false
/// universal formula:
///
/// * false `AG φ`: shortest path to a reachable `¬φ` state (fair in fair
///   mode); when `φ` is `AF p` the path continues into a lasso staying in
///   `¬p`.
/// * false `AF p` / true `EG p`: a lasso staying in `¬p` / `p`.
/// * true `EF p` / true `E[φ U ψ]`: shortest path to the goal.
///
/// Returns `Ok(None)` when the verdict has no linear witness of these shapes
/// (e.g. a true `AG φ`), and an error for other formula shapes.
pub fn witness(
    k: &Kripke,
    labels: &dyn Labeling,
    f: &CtlFormula,
    result: &CheckResult,
) -> Result<Option<Trace>, CheckError> {
    let mut ev = Evaluator::new(k, labels, result.fair);
    let init = k.initial();
    let holds = result.holds_at_initial;
    match f {
        CtlFormula::AG(inner) => {
            if holds {
                return Ok(None);
            }
            let ok = ev.sat(inner)?;
            let mut bad = complement(&ok);
            restrict_fair(&mut ev, &mut bad);
            let Some(path) = shortest_path(k, init, &k.full_set(), &bad) else {
                return Ok(None);
            };
            if let CtlFormula::AF(p) = inner.as_ref() {
                let hold = complement(&ev.sat(p)?);
                let end = path.last().map_or(init, |&e| k.edges()[e].1);
                if let Some((pre, cycle)) = lasso(&ev, end, &hold) {
                    let mut prefix = path;
                    prefix.extend(pre);
                    return Ok(Some(Trace {
                        kind: TraceKind::Lasso,
                        prefix,
                        cycle,
                    }));
                }
            }
            Ok(Some(Trace {
                kind: TraceKind::Path,
                prefix: path,
                cycle: Vec::new(),
            }))
        }
        CtlFormula::AF(p) => {
            if holds {
                return Ok(None);
            }
            let hold = complement(&ev.sat(p)?);
            Ok(lasso(&ev, init, &hold).map(|(prefix, cycle)| Trace {
                kind: TraceKind::Lasso,
                prefix,
                cycle,
            }))
        }
        CtlFormula::EG(p) => {
            if !holds {
                return Ok(None);
            }
            let hold = ev.sat(p)?;
            Ok(lasso(&ev, init, &hold).map(|(prefix, cycle)| Trace {
                kind: TraceKind::Lasso,
                prefix,
                cycle,
            }))
        }
        CtlFormula::EF(p) | CtlFormula::EU(_, p) => {
            if !holds {
                return Ok(None);
            }
            let within = match f {
                CtlFormula::EU(a, _) => ev.sat(a)?,
                _ => k.full_set(),
            };
            let mut goal = ev.sat(p)?;
            restrict_fair(&mut ev, &mut goal);
            Ok(shortest_path(k, init, &within, &goal).map(|prefix| Trace {
                kind: TraceKind::Path,
                prefix,
                cycle: Vec::new(),
            }))
        }
        other => Err(CheckError::UnsupportedWitness(other.to_string())),
    }
}

/// Structural replay: edges are contiguous from the initial state, a lasso
/// closes on its entry state, and in fair mode its cycle meets every
/// fairness set.
pub fn validate_trace(k: &Kripke, t: &Trace, fair: bool) -> bool {
    let valid_edge = |e: usize| e < k.edges().len();
    if !t.prefix.iter().chain(&t.cycle).all(|&e| valid_edge(e)) {
        return false;
    }
    let mut at = k.initial();
    for &e in &t.prefix {
        let (s, d) = k.edges()[e];
        if s != at {
            return false;
        }
        at = d;
    }
    match t.kind {
        TraceKind::Path => t.cycle.is_empty(),
        TraceKind::Lasso => {
            if t.cycle.is_empty() {
                return false;
            }
            let entry = at;
            for &e in &t.cycle {
                let (s, d) = k.edges()[e];
                if s != at {
                    return false;
                }
                at = d;
            }
            if at != entry {
                return false;
            }
            !fair
                || k.fairness()
                    .iter()
                    .all(|set| t.cycle.iter().any(|&e| set.contains(e)))
        }
    }
}

fn complement(s: &StateSet) -> StateSet {
    let mut c = s.clone();
    c.toggle_range(..);
    c
}

fn restrict_fair(ev: &mut Evaluator<'_>, set: &mut StateSet) {
    if ev.fair {
        set.intersect_with(&ev.fair_set());
    }
}

/// Shortest edge path from `from` to any state of `target`, passing only
/// through `within` (the endpoint excepted). Empty when `from` is a target.
fn shortest_path(
    k: &Kripke,
    from: usize,
    within: &StateSet,
    target: &StateSet,
) -> Option<Vec<usize>> {
    if target.contains(from) {
        return Some(Vec::new());
    }
    if !within.contains(from) {
        return None;
    }
    let mut parent: Vec<Option<usize>> = vec![None; k.num_states()];
    let mut seen = k.empty_set();
    seen.insert(from);
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        for &e in k.outgoing(v) {
            let w = k.edges()[e].1;
            if seen.contains(w) {
                continue;
            }
            seen.insert(w);
            parent[w] = Some(e);
            if target.contains(w) {
                let mut path = Vec::new();
                let mut at = w;
                while at != from {
                    let e = parent[at].expect("bfs parent");
                    path.push(e);
                    at = k.edges()[e].0;
                }
                path.reverse();
                return Some(path);
            }
            if within.contains(w) {
                queue.push_back(w);
            }
        }
    }
    None
}

/// A lasso from `from` that stays inside `hold` and whose cycle lies in an
/// accepting SCC of the `hold`-subgraph, meeting every fairness set in fair
/// mode.
fn lasso(ev: &Evaluator<'_>, from: usize, hold: &StateSet) -> Option<(Vec<usize>, Vec<usize>)> {
    let k = ev.k;
    if !hold.contains(from) {
        return None;
    }
    let sccs = ev.sccs(hold);
    let mut accepting = k.empty_set();
    for v in hold.ones() {
        if sccs.accepting[sccs.comp[v]] {
            accepting.insert(v);
        }
    }
    let prefix = shortest_path(k, from, hold, &accepting)?;
    let entry = prefix.last().map_or(from, |&e| k.edges()[e].1);
    let cid = sccs.comp[entry];
    let mut comp = k.empty_set();
    for v in hold.ones() {
        if sccs.comp[v] == cid {
            comp.insert(v);
        }
    }
    let internal = |e: usize| {
        let (s, d) = k.edges()[e];
        comp.contains(s) && comp.contains(d)
    };

    let mut cycle: Vec<usize> = Vec::new();
    let mut at = entry;
    if ev.fair {
        for set in k.fairness() {
            if cycle.iter().any(|&e| set.contains(e)) {
                continue;
            }
            let e = set.ones().find(|&e| internal(e))?;
            let src = k.edges()[e].0;
            cycle.extend(path_to(k, at, src, &comp)?);
            cycle.push(e);
            at = k.edges()[e].1;
        }
    }
    if cycle.is_empty() {
        let e = *k.outgoing(entry).iter().find(|&&e| internal(e))?;
        cycle.push(e);
        at = k.edges()[e].1;
    }
    cycle.extend(path_to(k, at, entry, &comp)?);
    Some((prefix, cycle))
}

fn path_to(k: &Kripke, from: usize, to: usize, within: &StateSet) -> Option<Vec<usize>> {
    let mut target = k.empty_set();
    target.insert(to);
    shortest_path(k, from, within, &target)
}
