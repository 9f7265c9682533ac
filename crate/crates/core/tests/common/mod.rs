//! Independent reference implementations used by the property and
//! acceptance tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use cosma::boolform::{parse_formula, Formula, Symbol};
use cosma::csm::{GlobalState, Machine, System};
use cosma::ctl::{CtlFormula, Kripke, SymbolLabels};
use cosma::product::ReachabilityGraph;
use rand::seq::SliceRandom;
use rand::Rng;

fn sym(s: &str) -> Symbol {
    Symbol::new(s).unwrap()
}

/// Random guard text of nesting depth at most `depth`.
pub fn random_guard(rng: &mut impl Rng, symbols: &[String], depth: u32) -> String {
    if symbols.is_empty() || depth == 0 || rng.gen_bool(0.3) {
        return match rng.gen_range(0..10) {
            0 => String::from("1"),
            1 => String::from("0"),
            _ if symbols.is_empty() => String::from("1"),
            _ => {
                let s = symbols.choose(rng).unwrap().clone();
                if rng.gen_bool(0.4) {
                    format!("!{s}")
                } else {
                    s
                }
            }
        };
    }
    let a = random_guard(rng, symbols, depth - 1);
    let b = random_guard(rng, symbols, depth - 1);
    match rng.gen_range(0..3) {
        0 => format!("({a}) * ({b})"),
        1 => format!("({a}) + ({b})"),
        _ => format!("!({a})"),
    }
}

/// A random valid system: up to 3 machines of up to 4 nodes, up to 3
/// internal symbols (each with one producer) and up to 2 environment
/// symbols.
pub fn random_system(rng: &mut impl Rng) -> System {
    let n_machines = rng.gen_range(1..=3);
    let sizes: Vec<usize> = (0..n_machines).map(|_| rng.gen_range(1..=4)).collect();
    let n_int = rng.gen_range(0..=3);
    let n_env = rng.gen_range(0..=2);
    let internal: Vec<String> = (0..n_int).map(|i| format!("x{i}")).collect();
    let env: Vec<String> = (0..n_env).map(|i| format!("e{i}")).collect();
    let mut outputs: Vec<Vec<Vec<String>>> = sizes.iter().map(|&n| vec![Vec::new(); n]).collect();
    for s in &internal {
        let m = rng.gen_range(0..n_machines);
        let n = rng.gen_range(0..sizes[m]);
        outputs[m][n].push(s.clone());
        for (other, outs) in outputs[m].iter_mut().enumerate() {
            if other != n && rng.gen_bool(0.3) {
                outs.push(s.clone());
            }
        }
    }
    let readable: Vec<String> = internal.iter().chain(&env).cloned().collect();
    let mut machines = Vec::new();
    for m in 0..n_machines {
        let names: Vec<String> = (0..sizes[m]).map(|i| format!("n{i}")).collect();
        let mut edges = Vec::new();
        for src in &names {
            for _ in 0..rng.gen_range(1..=3) {
                let dst = names.choose(rng).unwrap().clone();
                let g = parse_formula(&random_guard(rng, &readable, 2)).unwrap();
                edges.push((src.clone(), dst, g));
            }
        }
        let nodes: Vec<(&str, Vec<&str>)> = names
            .iter()
            .zip(&outputs[m])
            .map(|(n, o)| (n.as_str(), o.iter().map(String::as_str).collect()))
            .collect();
        let node_refs: Vec<(&str, &[&str])> =
            nodes.iter().map(|(n, o)| (*n, o.as_slice())).collect();
        let edge_refs: Vec<(&str, &str, Formula)> = edges
            .iter()
            .map(|(a, b, g)| (a.as_str(), b.as_str(), g.clone()))
            .collect();
        let init = names.choose(rng).unwrap().clone();
        machines.push(Machine::build(&format!("M{m}"), &init, &node_refs, &edge_refs).unwrap());
    }
    System::new(machines).unwrap()
}

fn subsets(env: &[Symbol]) -> Vec<BTreeSet<Symbol>> {
    (0..1usize << env.len())
        .map(|mask| {
            env.iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, s)| s.clone())
                .collect()
        })
        .collect()
}

fn env_of(s: &System) -> Vec<Symbol> {
    let mut read = BTreeSet::new();
    let mut produced = BTreeSet::new();
    for m in s.machines() {
        for e in m.edges() {
            read.extend(e.guard.support());
        }
        for n in m.nodes() {
            produced.extend(n.outputs.iter().cloned());
        }
    }
    read.difference(&produced).cloned().collect()
}

fn emitted(s: &System, g: &GlobalState) -> BTreeSet<Symbol> {
    let mut out = BTreeSet::new();
    for (m, &n) in s.machines().iter().zip(&g.0) {
        out.extend(m.nodes()[n].outputs.iter().cloned());
    }
    out
}

/// Per source state: component choices -> (destination, enabling env subsets).
pub type OracleEdges = BTreeMap<Vec<usize>, (GlobalState, Vec<bool>)>;

/// Brute force: every tuple of component edges under every environment
/// subset, from every reachable state.
pub fn product_oracle(s: &System) -> BTreeMap<GlobalState, OracleEdges> {
    let env = env_of(s);
    let subs = subsets(&env);
    let init = GlobalState(s.machines().iter().map(|m| m.initial()).collect());
    let mut out = BTreeMap::new();
    let mut queue = VecDeque::from([init.clone()]);
    let mut seen = HashSet::from([init]);
    while let Some(g) = queue.pop_front() {
        let internal = emitted(s, &g);
        let mut edges: OracleEdges = BTreeMap::new();
        for (k, e) in subs.iter().enumerate() {
            let received: BTreeSet<Symbol> = internal.union(e).cloned().collect();
            let mut tuples: Vec<Vec<usize>> = vec![Vec::new()];
            for (m, &n) in s.machines().iter().zip(&g.0) {
                let en: Vec<usize> = (0..m.edges().len())
                    .filter(|&i| m.edges()[i].src == n && m.edges()[i].guard.eval(&received))
                    .collect();
                tuples = tuples
                    .into_iter()
                    .flat_map(|t| {
                        en.iter().map(move |&i| {
                            let mut t = t.clone();
                            t.push(i);
                            t
                        })
                    })
                    .collect();
            }
            for t in tuples {
                let dst = GlobalState(
                    t.iter()
                        .zip(s.machines())
                        .map(|(&i, m)| m.edges()[i].dst)
                        .collect(),
                );
                let entry = edges
                    .entry(t)
                    .or_insert_with(|| (dst, vec![false; subs.len()]));
                entry.1[k] = true;
            }
        }
        for (dst, _) in edges.values() {
            if seen.insert(dst.clone()) {
                queue.push_back(dst.clone());
            }
        }
        out.insert(g, edges);
    }
    out
}

/// Compares a product graph with [`product_oracle`], including residuals and
/// fairness-set membership.
pub fn compare_product(s: &System, rg: &ReachabilityGraph) -> Result<(), String> {
    let oracle = product_oracle(s);
    let env = env_of(s);
    let subs = subsets(&env);
    let got_states: BTreeSet<&GlobalState> = rg.states().iter().collect();
    let want_states: BTreeSet<&GlobalState> = oracle.keys().collect();
    if got_states != want_states {
        return Err(format!(
            "state sets differ: {} vs {}",
            got_states.len(),
            want_states.len()
        ));
    }
    for (id, g) in rg.states().iter().enumerate() {
        let mut got: OracleEdges = BTreeMap::new();
        for &e in rg.outgoing(id) {
            let pe = &rg.edges()[e];
            if pe.src != id {
                return Err(format!("edge {e} listed under wrong source"));
            }
            let table: Vec<bool> = subs.iter().map(|e| pe.residual.eval(e)).collect();
            if got
                .insert(pe.choices.clone(), (rg.state(pe.dst).clone(), table))
                .is_some()
            {
                return Err(format!("duplicate choice tuple {:?}", pe.choices));
            }
        }
        if &got != oracle.get(g).unwrap() {
            return Err(format!(
                "edges of {g:?} differ:\n got {got:?}\nwant {:?}",
                oracle[g]
            ));
        }
    }
    let transitions: usize = s
        .machines()
        .iter()
        .map(|m| m.edges().iter().filter(|e| e.src != e.dst).count())
        .sum();
    if rg.fairness().len() != transitions {
        return Err(format!(
            "{} fairness sets, expected {transitions}",
            rg.fairness().len()
        ));
    }
    for set in rg.fairness() {
        let m = &s.machines()[set.machine];
        let t = &m.edges()[set.transition];
        if t.src == t.dst {
            return Err(String::from("fairness set for an ear"));
        }
        for (i, pe) in rg.edges().iter().enumerate() {
            let g = rg.state(pe.src);
            let internal = emitted(s, g);
            let member = pe.choices[set.machine] == set.transition
                || subs.iter().all(|e| {
                    let received: BTreeSet<Symbol> = internal.union(e).cloned().collect();
                    !(pe.residual.eval(e) && g.0[set.machine] == t.src && t.guard.eval(&received))
                });
            if member != set.members.contains(i) {
                return Err(format!(
                    "fairness membership of edge {i} in set {}/{}",
                    set.machine, set.transition
                ));
            }
        }
    }
    Ok(())
}

/// A plain graph with two atomic propositions `p`, `q` and edge-based
/// fairness sets.
#[derive(Debug, Clone)]
pub struct Graph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub fairness: Vec<Vec<usize>>,
    pub p: Vec<bool>,
    pub q: Vec<bool>,
}

impl Graph {
    pub fn random(rng: &mut impl Rng, max_states: usize, max_sets: usize) -> Graph {
        let n = rng.gen_range(1..=max_states);
        let mut edges = Vec::new();
        for s in 0..n {
            for _ in 0..rng.gen_range(1..=3) {
                edges.push((s, rng.gen_range(0..n)));
            }
        }
        let sets = rng.gen_range(0..=max_sets);
        let fairness = (0..sets)
            .map(|_| (0..edges.len()).filter(|_| rng.gen_bool(0.3)).collect())
            .collect();
        let p = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let q = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        Graph {
            n,
            edges,
            fairness,
            p,
            q,
        }
    }

    pub fn kripke(&self) -> Kripke {
        Kripke::new(self.n, 0, self.edges.clone(), self.fairness.clone())
    }

    pub fn labels(&self) -> SymbolLabels {
        let mut l = SymbolLabels::new(self.n);
        l.insert(sym("p"), (0..self.n).filter(|&i| self.p[i]));
        l.insert(sym("q"), (0..self.n).filter(|&i| self.q[i]));
        l
    }

    fn succ(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.0 == s).map(|e| e.1)
    }

    fn ex(&self, t: &[bool]) -> Vec<bool> {
        (0..self.n).map(|s| self.succ(s).any(|d| t[d])).collect()
    }

    /// Whether an infinite path from `s` stays in `hold` and meets every
    /// fairness set infinitely often: some `hold` state `v` reachable from
    /// `s` lies on a cycle inside `hold` that covers every set.
    pub fn fair_lasso_from(&self, s: usize, hold: &[bool]) -> bool {
        if !hold[s] {
            return false;
        }
        let full: u32 = (1u32 << self.fairness.len()) - 1;
        let mask_of = |e: usize| -> u32 {
            self.fairness
                .iter()
                .enumerate()
                .filter(|(_, f)| f.contains(&e))
                .map(|(i, _)| 1u32 << i)
                .fold(0, |a, b| a | b)
        };
        let mut reach = vec![false; self.n];
        let mut stack = vec![s];
        reach[s] = true;
        while let Some(v) = stack.pop() {
            for d in self.succ(v) {
                if hold[d] && !reach[d] {
                    reach[d] = true;
                    stack.push(d);
                }
            }
        }
        (0..self.n).filter(|&v| reach[v]).any(|v| {
            // Search (state, covered mask) pairs after at least one step.
            let mut seen = HashSet::new();
            let mut stack: Vec<(usize, u32)> = Vec::new();
            for (e, &(a, d)) in self.edges.iter().enumerate() {
                if a == v && hold[d] && seen.insert((d, mask_of(e))) {
                    stack.push((d, mask_of(e)));
                }
            }
            while let Some((u, m)) = stack.pop() {
                if u == v && m == full {
                    return true;
                }
                for (e, &(a, d)) in self.edges.iter().enumerate() {
                    if a == u && hold[d] {
                        let nm = m | mask_of(e);
                        if seen.insert((d, nm)) {
                            stack.push((d, nm));
                        }
                    }
                }
            }
            false
        })
    }

    /// Reference semantics: plain fixpoint iteration, or under fairness the
    /// fair-lasso search for `EG` with targets of `EX`/`EU` restricted to
    /// fair states.
    pub fn sat(&self, f: &CtlFormula, fair: bool) -> Vec<bool> {
        let all = vec![true; self.n];
        let fair_states: Vec<bool> = if fair {
            (0..self.n).map(|s| self.fair_lasso_from(s, &all)).collect()
        } else {
            all.clone()
        };
        self.sat_in(f, fair, &fair_states)
    }

    fn sat_in(&self, f: &CtlFormula, fair: bool, fs: &[bool]) -> Vec<bool> {
        let and = |a: &[bool], b: &[bool]| -> Vec<bool> {
            a.iter().zip(b).map(|(x, y)| *x && *y).collect()
        };
        let not = |a: &[bool]| -> Vec<bool> { a.iter().map(|x| !x).collect() };
        let or = |a: &[bool], b: &[bool]| -> Vec<bool> {
            a.iter().zip(b).map(|(x, y)| *x || *y).collect()
        };
        match f {
            CtlFormula::True => vec![true; self.n],
            CtlFormula::False => vec![false; self.n],
            CtlFormula::Emits(s) if s.as_str() == "p" => self.p.clone(),
            CtlFormula::Emits(s) if s.as_str() == "q" => self.q.clone(),
            CtlFormula::Emits(_) => vec![false; self.n],
            CtlFormula::Not(x) => not(&self.sat_in(x, fair, fs)),
            CtlFormula::And(a, b) => and(&self.sat_in(a, fair, fs), &self.sat_in(b, fair, fs)),
            CtlFormula::Or(a, b) => or(&self.sat_in(a, fair, fs), &self.sat_in(b, fair, fs)),
            CtlFormula::EX(x) => self.ex(&and(&self.sat_in(x, fair, fs), fs)),
            CtlFormula::EF(x) => {
                self.sat_in(&CtlFormula::eu(CtlFormula::True, (**x).clone()), fair, fs)
            }
            CtlFormula::EU(a, b) => {
                let hold = self.sat_in(a, fair, fs);
                let goal = and(&self.sat_in(b, fair, fs), fs);
                let mut z = vec![false; self.n];
                loop {
                    let next = or(&goal, &and(&hold, &self.ex(&z)));
                    if next == z {
                        return z;
                    }
                    z = next;
                }
            }
            CtlFormula::EG(x) => {
                let hold = self.sat_in(x, fair, fs);
                if fair {
                    return (0..self.n)
                        .map(|s| self.fair_lasso_from(s, &hold))
                        .collect();
                }
                let mut z = vec![true; self.n];
                loop {
                    let next = and(&hold, &self.ex(&z));
                    if next == z {
                        return z;
                    }
                    z = next;
                }
            }
            CtlFormula::AX(x) => {
                not(&self.sat_in(&CtlFormula::ex(CtlFormula::not((**x).clone())), fair, fs))
            }
            CtlFormula::AG(x) => {
                not(&self.sat_in(&CtlFormula::ef(CtlFormula::not((**x).clone())), fair, fs))
            }
            CtlFormula::AF(x) => {
                not(&self.sat_in(&CtlFormula::eg(CtlFormula::not((**x).clone())), fair, fs))
            }
            CtlFormula::AU(a, b) => {
                let (a, b) = ((**a).clone(), (**b).clone());
                let nb = CtlFormula::not(b.clone());
                let bad = CtlFormula::or(
                    CtlFormula::eu(nb.clone(), CtlFormula::and(CtlFormula::not(a), nb.clone())),
                    CtlFormula::eg(nb),
                );
                not(&self.sat_in(&bad, fair, fs))
            }
            CtlFormula::InState { .. } => panic!("no machines in a plain graph"),
        }
    }
}

/// Random formula over `EX`, `EG`, `EU`, `!`, `&` and the atoms `p`, `q`.
pub fn random_ctl(rng: &mut impl Rng, depth: u32) -> CtlFormula {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..5) {
            0 => CtlFormula::True,
            1 | 2 => CtlFormula::Emits(sym("p")),
            _ => CtlFormula::Emits(sym("q")),
        };
    }
    match rng.gen_range(0..5) {
        0 => CtlFormula::ex(random_ctl(rng, depth - 1)),
        1 => CtlFormula::eg(random_ctl(rng, depth - 1)),
        2 => CtlFormula::eu(random_ctl(rng, depth - 1), random_ctl(rng, depth - 1)),
        3 => CtlFormula::not(random_ctl(rng, depth - 1)),
        _ => CtlFormula::and(random_ctl(rng, depth - 1), random_ctl(rng, depth - 1)),
    }
}
