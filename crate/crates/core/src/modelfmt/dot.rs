use std::fmt::Write as _;

use crate::csm::Machine;
use crate::product::ReachabilityGraph;

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// DOT rendering of one CLG; the initial node is double-circled.
pub fn export_machine_dot(m: &Machine) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", quote(m.name()));
    let _ = writeln!(out, "  node [shape=circle];");
    for (i, n) in m.nodes().iter().enumerate() {
        let mut label = n.name.clone();
        if !n.outputs.is_empty() {
            let outs: Vec<&str> = n.outputs.iter().map(|s| s.as_str()).collect();
            label.push_str(&format!("\n{{{}}}", outs.join(", ")));
        }
        let shape = if i == m.initial() {
            ", shape=doublecircle"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "  {} [label={}{}];",
            quote(&n.name),
            quote(&label),
            shape
        );
    }
    for e in m.edges() {
        let _ = writeln!(
            out,
            "  {} -> {} [label={}];",
            quote(m.node_name(e.src)),
            quote(m.node_name(e.dst)),
            quote(&e.guard.to_string())
        );
    }
    out.push_str("}\n");
    out
}

/// DOT rendering of a reachability graph. Edges carry their residual guard.
pub fn export_graph_dot(rg: &ReachabilityGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph product {{");
    let _ = writeln!(out, "  node [shape=box];");
    for s in 0..rg.states().len() {
        let shape = if s == rg.initial() {
            ", peripheries=2"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "  s{s} [label={}{}];",
            quote(&rg.format_state(s)),
            shape
        );
    }
    for e in rg.edges() {
        let _ = writeln!(
            out,
            "  s{} -> s{} [label={}];",
            e.src,
            e.dst,
            quote(&e.residual.to_string())
        );
    }
    out.push_str("}\n");
    out
}
