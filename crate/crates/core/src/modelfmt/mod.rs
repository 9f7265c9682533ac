//! The `.csm` model language: machines, templates, systems and checks.
//!
//! ```text
//! machine Proc_2 {
//!   init Ni;
//!   node Ni {}
//!   node Take { emit getInpQ_2; }
//!   edge Ni -> Take when "stProc_2";
//!   ...
//! }
//! template Rcv(i) { init Idle; node Ready { emit rdyRcv_$i; } ... }
//! instance Rcv(2);                 # machine Rcv_2
//! instance Trsm(1, 2) as Trsm_1;
//! system Pipeline { use Main_1, Rcv_1; observe Invariant; env go; }
//! check Pipeline fair "AG AF in(Invariant.s0)" expect FALSE;
//! ```
//!
//! Template bodies are kept as raw text; instantiation replaces every
//! `$param` and parses the result as a machine body.

mod dot;

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::boolform::{parse_formula, FormulaError, Symbol};
use crate::csm::{Clg, Machine, ModelError, Node, System};
use crate::ctl::{parse_ctl, CheckError, CtlFormula};
use crate::lex::{self, Cursor, Pos, SyntaxError, Tok};

pub use dot::{export_graph_dot, export_machine_dot};

#[derive(Debug, Clone, Error)]
pub enum ModelFileError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("{line}:{column}: bad guard: {source}")]
    Guard {
        line: usize,
        column: usize,
        source: FormulaError,
    },
    #[error("{line}:{column}: bad formula: {source}")]
    Formula {
        line: usize,
        column: usize,
        source: CheckError,
    },
    #[error("{line}:{column}: {source}")]
    Model {
        line: usize,
        column: usize,
        source: ModelError,
    },
    #[error("{line}:{column}: unresolved {kind} `{name}`")]
    Unresolved {
        kind: &'static str,
        name: String,
        line: usize,
        column: usize,
    },
    #[error("{line}:{column}: duplicate {kind} `{name}`")]
    Duplicate {
        kind: &'static str,
        name: String,
        line: usize,
        column: usize,
    },
    #[error("template `{template}` expects {expected} argument(s), got {got}")]
    Arity {
        template: String,
        expected: usize,
        got: usize,
    },
    #[error("instantiating `{template}`: {message}")]
    Instantiation { template: String, message: String },
    #[error("unknown system `{0}`")]
    UnknownSystem(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub name: String,
    pub params: Vec<String>,
    /// Raw machine body between the braces.
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub template: String,
    pub args: Vec<String>,
    pub alias: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineEntry {
    pub machine: Machine,
    /// Set when the machine came from a template instantiation.
    pub instance: Option<Instance>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemDef {
    pub name: String,
    pub uses: Vec<String>,
    pub observers: Vec<String>,
    pub env: Option<Vec<Symbol>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckDef {
    pub system: String,
    pub formula: CtlFormula,
    pub fair: bool,
    pub expect: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModelFile {
    pub templates: Vec<Template>,
    pub machines: Vec<MachineEntry>,
    pub systems: Vec<SystemDef>,
    pub checks: Vec<CheckDef>,
}

/// Parses a model file, instantiating templates and resolving references.
pub fn parse_model(text: &str) -> Result<ModelFile, ModelFileError> {
    let mut m = ModelFile::default();
    m.extend_from(text)?;
    Ok(m)
}

impl ModelFile {
    /// Parses more definitions (e.g. a separate checks file) that may refer
    /// to everything already defined.
    pub fn extend_from(&mut self, text: &str) -> Result<(), ModelFileError> {
        let toks = lex::tokenize(text, true)?;
        let mut cur = Cursor::new(toks);
        while !cur.at_eof() {
            let (kw, pos) = cur.expect_ident()?;
            match kw.as_str() {
                "machine" => {
                    let (name, npos) = cur.expect_ident()?;
                    let machine = parse_machine_block(&mut cur, &name, npos)?;
                    self.add_machine(MachineEntry { machine, instance: None }, npos)?;
                }
                "template" => self.parse_template(&mut cur, text)?,
                "instance" => {
                    let (template, tpos) = cur.expect_ident()?;
                    cur.expect_punct("(")?;
                    let mut args = Vec::new();
                    while !cur.is_punct(")") {
                        let t = cur.bump();
                        match t.tok {
                            Tok::Ident(s) | Tok::Number(s) => args.push(s),
                            _ => return Err(SyntaxError::new(t.pos, "expected template argument").into()),
                        }
                        if !cur.eat_punct(",") {
                            break;
                        }
                    }
                    cur.expect_punct(")")?;
                    let alias = if cur.eat_word("as") { Some(cur.expect_ident()?.0) } else { None };
                    cur.expect_punct(";")?;
                    let inst = Instance { template, args, alias };
                    let machine = self.instantiate_at(&inst, tpos)?;
                    self.add_machine(MachineEntry { machine, instance: Some(inst) }, tpos)?;
                }
                "system" => self.parse_system(&mut cur)?,
                "check" => self.parse_check(&mut cur)?,
                _ => {
                    return Err(SyntaxError::new(
                        pos,
                        format!("expected `machine`, `template`, `instance`, `system` or `check`, found `{kw}`"),
                    )
                    .into())
                }
            }
        }
        Ok(())
    }

    fn add_machine(&mut self, entry: MachineEntry, pos: Pos) -> Result<(), ModelFileError> {
        let name = entry.machine.name().to_string();
        if self.machine(&name).is_some() {
            return Err(ModelFileError::Duplicate {
                kind: "machine",
                name,
                line: pos.line,
                column: pos.column,
            });
        }
        self.machines.push(entry);
        Ok(())
    }

    fn parse_template(&mut self, cur: &mut Cursor, text: &str) -> Result<(), ModelFileError> {
        let (name, pos) = cur.expect_ident()?;
        cur.expect_punct("(")?;
        let mut params = Vec::new();
        if !cur.is_punct(")") {
            loop {
                params.push(cur.expect_ident()?.0);
                if !cur.eat_punct(",") {
                    break;
                }
            }
        }
        cur.expect_punct(")")?;
        let start = cur.peek().offset + 1;
        cur.expect_punct("{")?;
        let mut depth = 1;
        let end = loop {
            let t = cur.bump();
            match t.tok {
                Tok::Punct("{") => depth += 1,
                Tok::Punct("}") => {
                    depth -= 1;
                    if depth == 0 {
                        break t.offset;
                    }
                }
                Tok::Eof => {
                    return Err(SyntaxError::new(t.pos, "unterminated template body").into())
                }
                _ => {}
            }
        };
        if self.template(&name).is_some() {
            return Err(ModelFileError::Duplicate {
                kind: "template",
                name,
                line: pos.line,
                column: pos.column,
            });
        }
        self.templates.push(Template {
            name,
            params,
            body: dedent(&text[start..end]),
        });
        Ok(())
    }

    fn parse_system(&mut self, cur: &mut Cursor) -> Result<(), ModelFileError> {
        let (name, pos) = cur.expect_ident()?;
        if self.system_def(&name).is_some() {
            return Err(ModelFileError::Duplicate {
                kind: "system",
                name,
                line: pos.line,
                column: pos.column,
            });
        }
        cur.expect_punct("{")?;
        let mut def = SystemDef {
            name,
            uses: Vec::new(),
            observers: Vec::new(),
            env: None,
        };
        while !cur.eat_punct("}") {
            let (kw, kpos) = cur.expect_ident()?;
            let mut names = Vec::new();
            loop {
                names.push(cur.expect_ident()?);
                if !cur.eat_punct(",") {
                    break;
                }
            }
            cur.expect_punct(";")?;
            match kw.as_str() {
                "use" | "observe" => {
                    for (n, npos) in &names {
                        if self.machine(n).is_none() {
                            return Err(ModelFileError::Unresolved {
                                kind: "machine",
                                name: n.clone(),
                                line: npos.line,
                                column: npos.column,
                            });
                        }
                    }
                    let list = if kw == "use" {
                        &mut def.uses
                    } else {
                        &mut def.observers
                    };
                    list.extend(names.into_iter().map(|(n, _)| n));
                }
                "env" => {
                    let env = def.env.get_or_insert_with(Vec::new);
                    for (n, npos) in names {
                        env.push(
                            Symbol::new(&n).map_err(|e| SyntaxError::new(npos, e.to_string()))?,
                        );
                    }
                }
                _ => {
                    return Err(SyntaxError::new(
                        kpos,
                        format!("expected `use`, `observe` or `env`, found `{kw}`"),
                    )
                    .into())
                }
            }
        }
        self.systems.push(def);
        Ok(())
    }

    fn parse_check(&mut self, cur: &mut Cursor) -> Result<(), ModelFileError> {
        let (system, pos) = cur.expect_ident()?;
        if self.system_def(&system).is_none() {
            return Err(ModelFileError::Unresolved {
                kind: "system",
                name: system,
                line: pos.line,
                column: pos.column,
            });
        }
        let fair = cur.eat_word("fair");
        let (text, fpos) = cur.expect_str()?;
        let formula = parse_ctl(&text).map_err(|source| ModelFileError::Formula {
            line: fpos.line,
            column: fpos.column,
            source,
        })?;
        let expect = if cur.eat_word("expect") {
            if cur.eat_word("TRUE") {
                Some(true)
            } else if cur.eat_word("FALSE") {
                Some(false)
            } else {
                return Err(cur.unexpected("`TRUE` or `FALSE`").into());
            }
        } else {
            None
        };
        cur.expect_punct(";")?;
        self.checks.push(CheckDef {
            system,
            formula,
            fair,
            expect,
        });
        Ok(())
    }

    pub fn machine(&self, name: &str) -> Option<&Machine> {
        self.machines
            .iter()
            .map(|e| &e.machine)
            .find(|m| m.name() == name)
    }

    pub fn template(&self, name: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.name == name)
    }

    pub fn system_def(&self, name: &str) -> Option<&SystemDef> {
        self.systems.iter().find(|s| s.name == name)
    }

    /// Assembles a named system: its machines, then its observers.
    pub fn system(&self, name: &str) -> Result<System, ModelFileError> {
        let def = self
            .system_def(name)
            .ok_or_else(|| ModelFileError::UnknownSystem(name.to_string()))?;
        let lookup = |n: &String| {
            self.machine(n)
                .cloned()
                .ok_or_else(|| ModelFileError::Unresolved {
                    kind: "machine",
                    name: n.clone(),
                    line: 0,
                    column: 0,
                })
        };
        let machines = def.uses.iter().map(lookup).collect::<Result<Vec<_>, _>>()?;
        let at = |source| ModelFileError::Model {
            line: 0,
            column: 0,
            source,
        };
        let mut sys = System::new(machines).map_err(at)?;
        if let Some(env) = &def.env {
            sys = sys.with_declared_env(env.iter().cloned().collect::<BTreeSet<_>>());
        }
        for o in &def.observers {
            sys = sys.add_observer(lookup(o)?).map_err(at)?;
        }
        Ok(sys)
    }

    fn instantiate_at(&self, inst: &Instance, pos: Pos) -> Result<Machine, ModelFileError> {
        let t = self
            .template(&inst.template)
            .ok_or_else(|| ModelFileError::Unresolved {
                kind: "template",
                name: inst.template.clone(),
                line: pos.line,
                column: pos.column,
            })?;
        let args: Vec<&str> = inst.args.iter().map(String::as_str).collect();
        let m = instantiate(t, &args)?;
        match &inst.alias {
            Some(a) => m.rename(a).map_err(|source| ModelFileError::Model {
                line: pos.line,
                column: pos.column,
                source,
            }),
            None => Ok(m),
        }
    }
}

/// Replaces each `$param` of the template body by its argument and parses
/// the result. The machine is named `Template_arg1_arg2...`.
pub fn instantiate(t: &Template, args: &[&str]) -> Result<Machine, ModelFileError> {
    if args.len() != t.params.len() {
        return Err(ModelFileError::Arity {
            template: t.name.clone(),
            expected: t.params.len(),
            got: args.len(),
        });
    }
    let mut order: Vec<usize> = (0..args.len()).collect();
    // Longest parameter names first: `$ij` before `$i`.
    order.sort_by_key(|&i| std::cmp::Reverse(t.params[i].len()));
    let mut body = t.body.clone();
    for i in order {
        body = body.replace(&format!("${}", t.params[i]), args[i]);
    }
    let mut name = t.name.clone();
    for a in args {
        name.push('_');
        name.push_str(a);
    }
    let fail = |message: String| ModelFileError::Instantiation {
        template: t.name.clone(),
        message,
    };
    if !lex::is_ident(&name) {
        return Err(fail(format!("`{name}` is not a valid machine name")));
    }
    let toks = lex::tokenize(&body, true).map_err(|e| fail(e.to_string()))?;
    let mut cur = Cursor::new(toks);
    let m = parse_machine_body(&mut cur, &name, Pos::default()).map_err(|e| fail(e.to_string()))?;
    if !cur.at_eof() {
        return Err(fail(cur.unexpected("`init`, `node` or `edge`").to_string()));
    }
    Ok(m)
}

fn parse_machine_block(cur: &mut Cursor, name: &str, pos: Pos) -> Result<Machine, ModelFileError> {
    cur.expect_punct("{")?;
    let m = parse_machine_body(cur, name, pos)?;
    cur.expect_punct("}")?;
    Ok(m)
}

// Parses `init`/`node`/`edge` statements up to a closing brace or EOF.
fn parse_machine_body(cur: &mut Cursor, name: &str, pos: Pos) -> Result<Machine, ModelFileError> {
    let mut init: Option<(String, Pos)> = None;
    let mut nodes: Vec<Node> = Vec::new();
    let mut edges = Vec::new();
    while !cur.is_punct("}") && !cur.at_eof() {
        let (kw, kpos) = cur.expect_ident()?;
        match kw.as_str() {
            "init" => {
                if init.is_some() {
                    return Err(SyntaxError::new(kpos, "duplicate `init`").into());
                }
                init = Some(cur.expect_ident()?);
                cur.expect_punct(";")?;
            }
            "node" => {
                let (n, _) = cur.expect_ident()?;
                cur.expect_punct("{")?;
                let mut outputs = BTreeSet::new();
                while !cur.eat_punct("}") {
                    cur.expect_word("emit")?;
                    loop {
                        let (s, spos) = cur.expect_ident()?;
                        outputs.insert(
                            Symbol::new(&s).map_err(|e| SyntaxError::new(spos, e.to_string()))?,
                        );
                        if !cur.eat_punct(",") {
                            break;
                        }
                    }
                    cur.expect_punct(";")?;
                }
                cur.eat_punct(";");
                nodes.push(Node { name: n, outputs });
            }
            "edge" => {
                let (src, _) = cur.expect_ident()?;
                cur.expect_punct("->")?;
                let (dst, _) = cur.expect_ident()?;
                cur.expect_word("when")?;
                let (g, gpos) = cur.expect_str()?;
                let guard = parse_formula(&g).map_err(|source| ModelFileError::Guard {
                    line: gpos.line,
                    column: gpos.column,
                    source,
                })?;
                cur.expect_punct(";")?;
                edges.push((src, dst, guard));
            }
            _ => {
                return Err(SyntaxError::new(
                    kpos,
                    format!("expected `init`, `node` or `edge`, found `{kw}`"),
                )
                .into())
            }
        }
    }
    let at = |p: Pos| {
        move |source| ModelFileError::Model {
            line: p.line,
            column: p.column,
            source,
        }
    };
    let (init, ipos) =
        init.ok_or_else(|| SyntaxError::new(pos, format!("machine `{name}` has no `init`")))?;
    let clg = Clg::named(name, nodes, edges).map_err(at(pos))?;
    crate::csm::make_machine(name, clg, &init).map_err(at(ipos))
}

fn dedent(body: &str) -> String {
    let lines: Vec<&str> = body.trim_matches('\n').lines().collect();
    let indent = lines
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    let mut out = String::new();
    for l in lines {
        out.push_str(l.get(indent..).unwrap_or("").trim_end());
        out.push('\n');
    }
    out
}

/// Canonical text of one machine body (without the surrounding braces).
pub fn machine_body(m: &Machine) -> String {
    let mut out = String::new();
    let width = m.nodes().iter().map(|n| n.name.len()).max().unwrap_or(0);
    let _ = writeln!(out, "init {};", m.node_name(m.initial()));
    for n in m.nodes() {
        if n.outputs.is_empty() {
            let _ = writeln!(out, "node {} {{}}", n.name);
        } else {
            let emits: String = n.outputs.iter().map(|s| format!("emit {s}; ")).collect();
            let _ = writeln!(out, "node {} {{ {}}}", n.name, emits);
        }
    }
    for e in m.edges() {
        let src = m.node_name(e.src);
        let _ = writeln!(
            out,
            "edge {src:<width$} -> {} when \"{}\";",
            m.node_name(e.dst),
            e.guard
        );
    }
    out
}

fn indent(text: &str, by: &str) -> String {
    text.lines()
        .map(|l| {
            if l.is_empty() {
                String::from("\n")
            } else {
                format!("{by}{l}\n")
            }
        })
        .collect()
}

impl fmt::Display for ModelFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.templates {
            writeln!(f, "template {}({}) {{", t.name, t.params.join(", "))?;
            f.write_str(&indent(&t.body, "  "))?;
            writeln!(f, "}}\n")?;
        }
        for e in &self.machines {
            match &e.instance {
                Some(i) => {
                    write!(f, "instance {}({})", i.template, i.args.join(", "))?;
                    if let Some(a) = &i.alias {
                        write!(f, " as {a}")?;
                    }
                    writeln!(f, ";")?;
                }
                None => {
                    writeln!(f, "machine {} {{", e.machine.name())?;
                    f.write_str(&indent(&machine_body(&e.machine), "  "))?;
                    writeln!(f, "}}\n")?;
                }
            }
        }
        for s in &self.systems {
            writeln!(f, "\nsystem {} {{", s.name)?;
            writeln!(f, "  use {};", s.uses.join(", "))?;
            if !s.observers.is_empty() {
                writeln!(f, "  observe {};", s.observers.join(", "))?;
            }
            if let Some(env) = &s.env {
                let names: Vec<&str> = env.iter().map(|s| s.as_str()).collect();
                writeln!(f, "  env {};", names.join(", "))?;
            }
            writeln!(f, "}}")?;
        }
        if !self.checks.is_empty() {
            writeln!(f)?;
        }
        for c in &self.checks {
            write!(f, "check {}", c.system)?;
            if c.fair {
                write!(f, " fair")?;
            }
            write!(f, " \"{}\"", c.formula)?;
            match c.expect {
                Some(true) => write!(f, " expect TRUE")?,
                Some(false) => write!(f, " expect FALSE")?,
                None => {}
            }
            writeln!(f, ";")?;
        }
        Ok(())
    }
}
