//! Fixpoint labeling. Under fairness, path quantifiers range over fair
//! paths only: a path is fair when it traverses a member of every fairness
//! set infinitely often.

use std::collections::VecDeque;

use super::kripke::{Kripke, Labeling, StateSet};
use super::{CheckError, CtlFormula};
use crate::product::ReachabilityGraph;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CheckOptions {
    pub fair: bool,
    /// Patch deadlock states with stutter loops instead of failing.
    pub allow_deadlock: bool,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub holds_at_initial: bool,
    pub satisfying: StateSet,
    /// False when evaluation stopped early and `satisfying` is partial.
    pub complete: bool,
    pub fair: bool,
    /// Deadlock states that received a stutter loop.
    pub patched_deadlocks: Vec<usize>,
}

/// Checks `f` on a deadlock-free product graph.
pub fn check(
    rg: &ReachabilityGraph,
    f: &CtlFormula,
    fair: bool,
) -> Result<CheckResult, CheckError> {
    check_with(
        rg,
        f,
        CheckOptions {
            fair,
            allow_deadlock: false,
        },
    )
}

pub fn check_with(
    rg: &ReachabilityGraph,
    f: &CtlFormula,
    opts: CheckOptions,
) -> Result<CheckResult, CheckError> {
    let (k, patched) = Kripke::from_graph(rg, opts.allow_deadlock)?;
    let mut res = check_kripke(&k, rg, f, opts.fair)?;
    res.patched_deadlocks = patched;
    Ok(res)
}

pub fn check_kripke(
    k: &Kripke,
    labels: &dyn Labeling,
    f: &CtlFormula,
    fair: bool,
) -> Result<CheckResult, CheckError> {
    let mut ev = Evaluator::new(k, labels, fair);
    let satisfying = ev.sat(f)?;
    Ok(CheckResult {
        holds_at_initial: k.num_states() > 0 && satisfying.contains(k.initial()),
        satisfying,
        complete: true,
        fair,
        patched_deadlocks: Vec::new(),
    })
}

/// States from which some fair path starts.
pub fn fair_states(rg: &ReachabilityGraph) -> Result<StateSet, CheckError> {
    let (k, _) = Kripke::from_graph(rg, true)?;
    Ok(fair_states_kripke(&k))
}

pub fn fair_states_kripke(k: &Kripke) -> StateSet {
    struct NoAtoms;
    impl Labeling for NoAtoms {
        fn in_state(&self, m: &str, _: &str) -> Result<StateSet, CheckError> {
            Err(CheckError::UnknownMachine(m.to_string()))
        }
        fn emits(&self, _: &crate::boolform::Symbol) -> Result<StateSet, CheckError> {
            unreachable!("no atoms are evaluated")
        }
    }
    Evaluator::new(k, &NoAtoms, true).fair_set()
}

pub(crate) struct Evaluator<'a> {
    pub(crate) k: &'a Kripke,
    labels: &'a dyn Labeling,
    pub(crate) fair: bool,
    fair_states: Option<StateSet>,
}

/// SCC decomposition of the subgraph induced by a state set.
pub(crate) struct Sccs {
    /// Component id per state; `usize::MAX` outside the subgraph.
    pub comp: Vec<usize>,
    /// Whether each component can host an accepting cycle.
    pub accepting: Vec<bool>,
}

const NONE: usize = usize::MAX;

fn complement(s: &StateSet) -> StateSet {
    let mut c = s.clone();
    c.toggle_range(..);
    c
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(k: &'a Kripke, labels: &'a dyn Labeling, fair: bool) -> Self {
        Evaluator {
            k,
            labels,
            fair,
            fair_states: None,
        }
    }

    pub(crate) fn sat(&mut self, f: &CtlFormula) -> Result<StateSet, CheckError> {
        use CtlFormula::*;
        Ok(match f {
            True => self.k.full_set(),
            False => self.k.empty_set(),
            InState { machine, node } => self.labels.in_state(machine, node)?,
            Emits(s) => self.labels.emits(s)?,
            Not(x) => complement(&self.sat(x)?),
            And(a, b) => {
                let mut s = self.sat(a)?;
                s.intersect_with(&self.sat(b)?);
                s
            }
            Or(a, b) => {
                let mut s = self.sat(a)?;
                s.union_with(&self.sat(b)?);
                s
            }
            EX(x) => {
                let t = self.sat(x)?;
                self.ex_q(t)
            }
            EU(a, b) => {
                let hold = self.sat(a)?;
                let goal = self.sat(b)?;
                self.eu_q(&hold, goal)
            }
            EF(x) => {
                let goal = self.sat(x)?;
                self.eu_q(&self.k.full_set(), goal)
            }
            EG(x) => {
                let hold = self.sat(x)?;
                self.eg(&hold)
            }
            AX(x) => {
                let t = complement(&self.sat(x)?);
                let e = self.ex_q(t);
                complement(&e)
            }
            AG(x) => {
                let bad = complement(&self.sat(x)?);
                let e = self.eu_q(&self.k.full_set(), bad);
                complement(&e)
            }
            AF(x) => {
                let hold = complement(&self.sat(x)?);
                let e = self.eg(&hold);
                complement(&e)
            }
            AU(a, b) => {
                // A[a U b] = !(E[!b U (!a & !b)] | EG !b)
                let na = complement(&self.sat(a)?);
                let nb = complement(&self.sat(b)?);
                let mut both = na;
                both.intersect_with(&nb);
                let mut bad = self.eu_q(&nb, both);
                bad.union_with(&self.eg(&nb));
                complement(&bad)
            }
        })
    }

    /// Restricts a target set to fair states in fair mode.
    fn fair_target(&mut self, mut t: StateSet) -> StateSet {
        if self.fair {
            t.intersect_with(&self.fair_set());
        }
        t
    }

    fn ex_q(&mut self, target: StateSet) -> StateSet {
        let target = self.fair_target(target);
        self.pre(&target)
    }

    fn eu_q(&mut self, hold: &StateSet, goal: StateSet) -> StateSet {
        let goal = self.fair_target(goal);
        self.backward_reach(hold, goal)
    }

    /// States with a successor in `target`.
    pub(crate) fn pre(&self, target: &StateSet) -> StateSet {
        let mut out = self.k.empty_set();
        for &(s, d) in self.k.edges() {
            if target.contains(d) {
                out.insert(s);
            }
        }
        out
    }

    /// Least fixpoint: `goal` plus `hold`-states with a `hold`-path into it.
    pub(crate) fn backward_reach(&self, hold: &StateSet, goal: StateSet) -> StateSet {
        let mut seen = goal;
        let mut queue: VecDeque<usize> = seen.ones().collect();
        while let Some(v) = queue.pop_front() {
            for &e in self.k.incoming(v) {
                let u = self.k.edges()[e].0;
                if hold.contains(u) && !seen.contains(u) {
                    seen.insert(u);
                    queue.push_back(u);
                }
            }
        }
        seen
    }

    pub(crate) fn fair_set(&mut self) -> StateSet {
        if let Some(f) = &self.fair_states {
            return f.clone();
        }
        let all = self.k.full_set();
        let f = self.eg_core(&all);
        self.fair_states = Some(f.clone());
        f
    }

    fn eg(&mut self, hold: &StateSet) -> StateSet {
        self.eg_core(hold)
    }

    /// `hold`-states that can reach, inside `hold`, an accepting SCC.
    fn eg_core(&self, hold: &StateSet) -> StateSet {
        let sccs = self.sccs(hold);
        let mut goal = self.k.empty_set();
        for v in hold.ones() {
            if sccs.accepting[sccs.comp[v]] {
                goal.insert(v);
            }
        }
        self.backward_reach(hold, goal)
    }

    /// Tarjan's algorithm on the subgraph induced by `hold`. A component is
    /// accepting when it has an internal edge and, in fair mode, an internal
    /// member of every fairness set.
    pub(crate) fn sccs(&self, hold: &StateSet) -> Sccs {
        let n = self.k.num_states();
        let mut index = vec![NONE; n];
        let mut low = vec![0usize; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut comp = vec![NONE; n];
        let mut ncomp = 0;
        let mut counter = 0;
        let mut call: Vec<(usize, usize)> = Vec::new();

        for root in hold.ones() {
            if index[root] != NONE {
                continue;
            }
            call.push((root, 0));
            index[root] = counter;
            low[root] = counter;
            counter += 1;
            stack.push(root);
            on_stack[root] = true;

            while let Some(top) = call.last_mut() {
                let (v, pos) = *top;
                let out = self.k.outgoing(v);
                if pos < out.len() {
                    top.1 += 1;
                    let w = self.k.edges()[out[pos]].1;
                    if !hold.contains(w) {
                        continue;
                    }
                    if index[w] == NONE {
                        index[w] = counter;
                        low[w] = counter;
                        counter += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                } else {
                    call.pop();
                    if let Some(&(parent, _)) = call.last() {
                        low[parent] = low[parent].min(low[v]);
                    }
                    if low[v] == index[v] {
                        loop {
                            let w = stack.pop().expect("tarjan stack");
                            on_stack[w] = false;
                            comp[w] = ncomp;
                            if w == v {
                                break;
                            }
                        }
                        ncomp += 1;
                    }
                }
            }
        }

        let nsets = if self.fair {
            self.k.fairness().len()
        } else {
            0
        };
        let mut internal = vec![false; ncomp];
        let mut covered = vec![vec![false; nsets]; ncomp];
        for (e, &(s, d)) in self.k.edges().iter().enumerate() {
            if comp[s] == NONE || comp[s] != comp[d] {
                continue;
            }
            let c = comp[s];
            internal[c] = true;
            for (i, set) in self.k.fairness().iter().take(nsets).enumerate() {
                if set.contains(e) {
                    covered[c][i] = true;
                }
            }
        }
        let accepting = (0..ncomp)
            .map(|c| internal[c] && covered[c].iter().all(|&x| x))
            .collect();
        Sccs { comp, accepting }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolform::Symbol;
    use crate::ctl::{parse_ctl, SymbolLabels};

    fn sym(s: &str) -> Symbol {
        Symbol::new(s).unwrap()
    }

    fn states(s: &StateSet) -> Vec<usize> {
        s.ones().collect()
    }

    #[test]
    fn ag_true_holds() {
        let k = Kripke::new(2, 0, vec![(0, 1), (1, 0)], vec![]);
        let l = SymbolLabels::new(2);
        let r = check_kripke(&k, &l, &parse_ctl("AG true").unwrap(), false).unwrap();
        assert!(r.holds_at_initial);
        assert!(r.complete);
    }

    #[test]
    fn chain_operators() {
        // 0 -> 1 -> 2 -> 2, p at 2
        let k = Kripke::new(3, 0, vec![(0, 1), (1, 2), (2, 2)], vec![]);
        let mut l = SymbolLabels::new(3);
        l.insert(sym("p"), [2]);
        let sat = |f: &str| {
            check_kripke(&k, &l, &parse_ctl(f).unwrap(), false)
                .unwrap()
                .satisfying
        };
        assert_eq!(states(&sat("EX emits(p)")), vec![1, 2]);
        assert_eq!(states(&sat("EF emits(p)")), vec![0, 1, 2]);
        assert_eq!(states(&sat("AF emits(p)")), vec![0, 1, 2]);
        assert_eq!(states(&sat("EG !emits(p)")), Vec::<usize>::new());
        assert_eq!(states(&sat("AG emits(p)")), vec![2]);
        assert_eq!(states(&sat("A[!emits(p) U emits(p)]")), vec![0, 1, 2]);
    }

    #[test]
    fn self_loop_state_is_fair_without_sets() {
        let k = Kripke::new(1, 0, vec![(0, 0)], vec![]);
        assert_eq!(states(&fair_states_kripke(&k)), vec![0]);
    }

    #[test]
    fn cycle_missing_fairness_member_is_unfair() {
        // 0 <-> 1 is the only cycle; the fairness set's sole member leads to
        // the dead-end state 2 which only loops through an unfair edge.
        let k = Kripke::new(3, 0, vec![(0, 1), (1, 0), (1, 2), (2, 2)], vec![vec![2]]);
        assert!(fair_states_kripke(&k).is_clear());
        let k2 = Kripke::new(2, 0, vec![(0, 1), (1, 0)], vec![vec![1]]);
        assert_eq!(states(&fair_states_kripke(&k2)), vec![0, 1]);
    }

    #[test]
    fn fairness_forces_exit_from_ear() {
        // 0 loops or moves to 1; weak fairness on the move excludes looping.
        let k = Kripke::new(2, 0, vec![(0, 0), (0, 1), (1, 1)], vec![vec![1, 2]]);
        let mut l = SymbolLabels::new(2);
        l.insert(sym("done"), [1]);
        let f = parse_ctl("AF emits(done)").unwrap();
        assert!(!check_kripke(&k, &l, &f, false).unwrap().holds_at_initial);
        assert!(check_kripke(&k, &l, &f, true).unwrap().holds_at_initial);
    }

    #[test]
    fn unknown_atoms_error() {
        let k = Kripke::new(1, 0, vec![(0, 0)], vec![]);
        let l = SymbolLabels::new(1);
        assert!(matches!(
            check_kripke(&k, &l, &parse_ctl("in(M.n)").unwrap(), false),
            Err(CheckError::UnknownMachine(_))
        ));
    }
}
