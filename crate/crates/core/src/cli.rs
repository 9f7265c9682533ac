//! Command-line front end: parse, validate, build the product, check and
//! report.
//!
//! Exit codes: 0 ok, 1 validation error or unmet `expect`, 2 I/O, parse or
//! usage error, 3 resource cap, 4 deadlock, 5 internal error.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::csm::{validate_system, Diagnostic, ModelError, System};
use crate::ctl::{
    check_on_the_fly_with, check_with, validate_trace, witness, CheckError, CheckOptions,
    CtlFormula, Kripke, Trace, TraceKind,
};
use crate::modelfmt::{
    export_graph_dot, export_machine_dot, parse_model, CheckDef, ModelFile, ModelFileError,
};
use crate::product::{build_product_with, Limits, ProductError, ReachabilityGraph, Stats};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_CAP: i32 = 3;
pub const EXIT_DEADLOCK: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "cosma",
    version,
    about = "Model checker for concurrent state machines"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report structural diagnostics for the systems of a model file.
    Validate {
        file: PathBuf,
        #[arg(long)]
        system: Option<String>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Build the reachability graph of a system.
    Product {
        file: PathBuf,
        #[arg(long)]
        system: String,
        /// Print every statistic on its own line.
        #[arg(long)]
        stats: bool,
        /// Write the graph in DOT format.
        #[arg(long)]
        dot: Option<PathBuf>,
        #[arg(long)]
        max_states: Option<usize>,
        #[arg(long)]
        max_edges: Option<usize>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Evaluate CTL formulas, given with --formula or as `check` statements
    /// (in the model, in --checks, or in a sibling `.checks` file).
    Check {
        file: PathBuf,
        #[arg(long)]
        checks: Option<PathBuf>,
        #[arg(long)]
        system: Option<String>,
        #[arg(long)]
        formula: Vec<String>,
        /// Evaluate under weak fairness.
        #[arg(long)]
        fair: bool,
        #[arg(long)]
        witness: bool,
        /// Check `AG p` while exploring, stopping at the first violation.
        #[arg(long)]
        on_the_fly: bool,
        #[arg(long)]
        allow_deadlock: bool,
        #[arg(long)]
        max_states: Option<usize>,
        #[arg(long)]
        max_edges: Option<usize>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write one machine in DOT format.
    Dot {
        file: PathBuf,
        #[arg(long)]
        machine: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: ModelFileError,
    },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Check(CheckError),
    #[error("system `{system}` has {} validation error(s)", .diagnostics.iter().filter(|d| d.is_error()).count())]
    Validation {
        system: String,
        diagnostics: Vec<Diagnostic>,
    },
    #[error("system `{system}`: {what} limit of {limit} exceeded (explored {} states, {} edges)", .partial.states, .partial.edges)]
    Cap {
        system: String,
        what: &'static str,
        limit: usize,
        partial: Stats,
    },
    #[error("system `{system}` has {} deadlock state(s):\n{}", .states.len(), .states.join("\n"))]
    Deadlock { system: String, states: Vec<String> },
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. }
            | CliError::Parse { .. }
            | CliError::Usage(_)
            | CliError::Check(_) => EXIT_PARSE,
            CliError::Validation { .. } => EXIT_VALIDATION,
            CliError::Cap { .. } => EXIT_CAP,
            CliError::Deadlock { .. } => EXIT_DEADLOCK,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Evaluate every check under fairness, whatever its own flag says.
    pub fair: bool,
    pub witness: bool,
    pub on_the_fly: bool,
    pub allow_deadlock: bool,
    pub limits: Limits,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub systems: Vec<SystemReport>,
    pub checks: Vec<CheckReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemReport {
    pub name: String,
    pub machines: usize,
    pub stats: Option<Stats>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub system: String,
    pub formula: String,
    pub fair: bool,
    pub method: &'static str,
    pub verdict: bool,
    pub expected: Option<bool>,
    pub time_ms: f64,
    pub states_explored: usize,
    pub witness: Option<WitnessReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessReport {
    pub trace: Trace,
    /// Result of replaying the trace against the graph.
    pub valid: bool,
    pub steps: Vec<Step>,
    /// Index into `steps` where the cycle of a lasso starts.
    pub cycle_start: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Step {
    pub state: String,
    /// Environment condition of the edge leading here (absent for step 0).
    pub residual: Option<String>,
}

impl CheckReport {
    pub fn as_expected(&self) -> bool {
        self.expected.is_none_or(|e| e == self.verdict)
    }
}

impl RunReport {
    pub fn all_as_expected(&self) -> bool {
        self.checks.iter().all(CheckReport::as_expected)
    }

    /// Human-readable report; only the bracketed timings vary between runs.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.systems {
            match &s.stats {
                Some(st) => {
                    let _ = writeln!(
                        out,
                        "system {}: {} machines, {} states, {} edges, {} deadlocks, {} fairness sets, {} environment symbols",
                        s.name, s.machines, st.states, st.edges, st.deadlocks, st.fairness_sets, st.env_alphabet_size
                    );
                }
                None => {
                    let _ = writeln!(out, "system {}: {} machines", s.name, s.machines);
                }
            }
        }
        for c in &self.checks {
            let fair = if c.fair { " fair" } else { "" };
            let _ = write!(
                out,
                "check {}{} \"{}\": {}",
                c.system,
                fair,
                c.formula,
                verdict_word(c.verdict)
            );
            if let Some(e) = c.expected {
                let tag = if e == c.verdict {
                    "as expected"
                } else {
                    "UNEXPECTED"
                };
                let _ = write!(out, " ({tag}, expected {})", verdict_word(e));
            }
            if c.method != "global" {
                let _ = write!(out, " {} after {} states", c.method, c.states_explored);
            }
            let _ = writeln!(out, " [{:.1} ms]", c.time_ms);
            if let Some(w) = &c.witness {
                out.push_str(&render_witness(w));
            }
        }
        if !self.checks.is_empty() {
            let ok = self.checks.iter().filter(|c| c.as_expected()).count();
            let _ = writeln!(out, "{} check(s), {} as expected", self.checks.len(), ok);
        }
        out
    }
}

fn verdict_word(b: bool) -> &'static str {
    if b {
        "TRUE"
    } else {
        "FALSE"
    }
}

fn render_witness(w: &WitnessReport) -> String {
    let mut out = String::new();
    let kind = match w.trace.kind {
        TraceKind::Path => "path",
        TraceKind::Lasso => "lasso",
    };
    let _ = writeln!(
        out,
        "  {kind} witness, {} step(s){}:",
        w.steps.len() - 1,
        if w.valid { "" } else { " (INVALID)" }
    );
    for (i, s) in w.steps.iter().enumerate() {
        if Some(i) == w.cycle_start {
            let _ = writeln!(out, "    -- cycle --");
        }
        match &s.residual {
            Some(r) => {
                let _ = writeln!(out, "  {i:>4}  {}  when {r}", s.state);
            }
            None => {
                let _ = writeln!(out, "  {i:>4}  {}", s.state);
            }
        }
    }
    if let Some(c) = w.cycle_start {
        let _ = writeln!(out, "    -- back to step {c} --");
    }
    out
}

/// Renders `t`, whose edge indices refer to `rg` plus stutter loops.
pub fn render_trace(rg: &ReachabilityGraph, k: &Kripke, t: &Trace, fair: bool) -> WitnessReport {
    let mut steps = vec![Step {
        state: rg.format_state(k.initial()),
        residual: None,
    }];
    for &e in t.prefix.iter().chain(&t.cycle) {
        let (_, dst) = k.edges()[e];
        let residual = match rg.edges().get(e) {
            Some(pe) => pe.residual.to_string(),
            None => String::from("(deadlock stutter)"),
        };
        steps.push(Step {
            state: rg.format_state(dst),
            residual: Some(residual),
        });
    }
    let cycle_start = (t.kind == TraceKind::Lasso).then_some(t.prefix.len());
    WitnessReport {
        trace: t.clone(),
        valid: validate_trace(k, t, fair),
        steps,
        cycle_start,
    }
}

/// Reads a model file and, when given or present next to it, a checks file.
pub fn load_model(file: &Path, checks: Option<&Path>) -> Result<ModelFile, CliError> {
    let read = |p: &Path| {
        fs::read_to_string(p).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    let mut model = parse_model(&read(file)?).map_err(|source| CliError::Parse {
        path: file.to_path_buf(),
        source,
    })?;
    let sibling = file.with_extension("checks");
    let extra = match checks {
        Some(p) => Some(p.to_path_buf()),
        None if sibling != file && sibling.is_file() => Some(sibling),
        None => None,
    };
    if let Some(p) = extra {
        model
            .extend_from(&read(&p)?)
            .map_err(|source| CliError::Parse {
                path: p.clone(),
                source,
            })?;
    }
    Ok(model)
}

/// Assembles and validates a system; errors in the diagnostics abort.
pub fn assemble(model: &ModelFile, name: &str) -> Result<(System, Vec<Diagnostic>), CliError> {
    let sys = model.system(name).map_err(|e| match e {
        ModelFileError::Model { source, .. } => CliError::Validation {
            system: name.to_string(),
            diagnostics: vec![model_error_diagnostic(&source)],
        },
        ModelFileError::UnknownSystem(s) => CliError::Usage(format!("unknown system `{s}`")),
        other => CliError::Usage(other.to_string()),
    })?;
    let diagnostics = validate_system(&sys);
    if diagnostics.iter().any(Diagnostic::is_error) {
        return Err(CliError::Validation {
            system: name.to_string(),
            diagnostics,
        });
    }
    Ok((sys, diagnostics))
}

fn model_error_diagnostic(e: &ModelError) -> Diagnostic {
    Diagnostic {
        severity: crate::csm::Severity::Error,
        message: e.to_string(),
    }
}

fn product_error(system: &str, e: ProductError) -> CliError {
    match e {
        ProductError::Invalid(diagnostics) => CliError::Validation {
            system: system.to_string(),
            diagnostics,
        },
        ProductError::CapExceeded {
            what,
            limit,
            partial,
        } => CliError::Cap {
            system: system.to_string(),
            what,
            limit,
            partial,
        },
    }
}

fn check_error(system: &str, rg: Option<&ReachabilityGraph>, e: CheckError) -> CliError {
    match e {
        CheckError::Deadlock(ids) => CliError::Deadlock {
            system: system.to_string(),
            states: ids
                .iter()
                .map(|&s| match rg {
                    Some(rg) => format!("  s{s} {}", rg.format_state(s)),
                    None => format!("  s{s}"),
                })
                .collect(),
        },
        CheckError::Product(p) => product_error(system, p),
        other => CliError::Check(other),
    }
}

struct Built {
    report: usize,
    system: System,
    graph: Option<(ReachabilityGraph, Kripke)>,
}

/// Runs `checks` against `model`, building each product at most once.
pub fn run_checks(
    model: &ModelFile,
    checks: &[CheckDef],
    opts: &RunOptions,
) -> Result<RunReport, CliError> {
    let mut report = RunReport {
        systems: Vec::new(),
        checks: Vec::new(),
    };
    let mut built: HashMap<String, Built> = HashMap::new();
    for c in checks {
        let fair = c.fair || opts.fair;
        if !built.contains_key(&c.system) {
            let (system, diagnostics) = assemble(model, &c.system)?;
            report.systems.push(SystemReport {
                name: c.system.clone(),
                machines: system.machines().len(),
                stats: None,
                diagnostics,
            });
            built.insert(
                c.system.clone(),
                Built {
                    report: report.systems.len() - 1,
                    system,
                    graph: None,
                },
            );
        }
        let b = built.get_mut(&c.system).expect("inserted above");
        let start = Instant::now();
        let entry = if opts.on_the_fly {
            let p = match &c.formula {
                CtlFormula::AG(p) if p.is_state_predicate() && !fair => p,
                _ => {
                    return Err(CliError::Usage(format!(
                        "--on-the-fly needs a formula `AG p` with a state predicate p and no fairness, got `{}`",
                        c.formula
                    )))
                }
            };
            let otf = check_on_the_fly_with(&b.system, p, opts.limits)
                .map_err(|e| check_error(&c.system, None, e))?;
            let time_ms = start.elapsed().as_secs_f64() * 1e3;
            let witness = match (&otf.counterexample, opts.witness) {
                (Some(t), true) => {
                    let (k, _) = Kripke::from_graph(&otf.graph, true)
                        .map_err(|e| CliError::Internal(e.to_string()))?;
                    Some(render_trace(&otf.graph, &k, t, false))
                }
                _ => None,
            };
            CheckReport {
                system: c.system.clone(),
                formula: c.formula.to_string(),
                fair,
                method: "on-the-fly",
                verdict: otf.result.holds_at_initial,
                expected: c.expect,
                time_ms,
                states_explored: otf.states_explored,
                witness,
            }
        } else {
            if b.graph.is_none() {
                let rg = build_product_with(&b.system, opts.limits)
                    .map_err(|e| product_error(&c.system, e))?;
                report.systems[b.report].stats = Some(rg.stats());
                let (k, _) = Kripke::from_graph(&rg, opts.allow_deadlock)
                    .map_err(|e| check_error(&c.system, Some(&rg), e))?;
                b.graph = Some((rg, k));
            }
            let (rg, k) = b.graph.as_ref().expect("built above");
            let start = Instant::now();
            let res = check_with(
                rg,
                &c.formula,
                CheckOptions {
                    fair,
                    allow_deadlock: opts.allow_deadlock,
                },
            )
            .map_err(|e| check_error(&c.system, Some(rg), e))?;
            let w = if opts.witness {
                match witness(k, rg, &c.formula, &res) {
                    Ok(t) => t.map(|t| render_trace(rg, k, &t, fair)),
                    Err(CheckError::UnsupportedWitness(_)) => None,
                    Err(e) => return Err(check_error(&c.system, Some(rg), e)),
                }
            } else {
                None
            };
            CheckReport {
                system: c.system.clone(),
                formula: c.formula.to_string(),
                fair,
                method: "global",
                verdict: res.holds_at_initial,
                expected: c.expect,
                time_ms: start.elapsed().as_secs_f64() * 1e3,
                states_explored: rg.states().len(),
                witness: w,
            }
        };
        report.checks.push(entry);
    }
    Ok(report)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn limits(max_states: Option<usize>, max_edges: Option<usize>) -> Limits {
    Limits {
        max_states,
        max_edges,
    }
}

/// Runs a parsed command line, returning the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match dispatch(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            if let CliError::Validation { diagnostics, .. } = &e {
                for d in diagnostics {
                    let _ = writeln!(err, "{d}");
                }
            }
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let io = |e: std::io::Error| CliError::Internal(e.to_string());
    match cli.command {
        Command::Validate { file, system, json } => {
            let model = load_model(&file, None)?;
            let names: Vec<String> = match system {
                Some(s) => vec![s],
                None => model.systems.iter().map(|s| s.name.clone()).collect(),
            };
            if names.is_empty() {
                writeln!(out, "no systems defined").map_err(io)?;
            }
            let mut report = RunReport {
                systems: Vec::new(),
                checks: Vec::new(),
            };
            for name in &names {
                let (machines, diagnostics) = match assemble(&model, name) {
                    Ok((sys, d)) => (sys.machines().len(), d),
                    Err(CliError::Validation { diagnostics, .. }) => {
                        let n = model
                            .system_def(name)
                            .map_or(0, |d| d.uses.len() + d.observers.len());
                        (n, diagnostics)
                    }
                    Err(e) => return Err(e),
                };
                for d in &diagnostics {
                    writeln!(err, "{name}: {d}").map_err(io)?;
                }
                report.systems.push(SystemReport {
                    name: name.clone(),
                    machines,
                    stats: None,
                    diagnostics,
                });
            }
            let diags = report.systems.iter().flat_map(|s| &s.diagnostics);
            let errors = diags.clone().filter(|d| d.is_error()).count();
            let warnings = diags.count() - errors;
            writeln!(out, "{errors} errors, {warnings} warnings").map_err(io)?;
            if let Some(p) = json {
                write_json(&p, &report)?;
            }
            Ok(if errors > 0 { EXIT_VALIDATION } else { EXIT_OK })
        }
        Command::Product {
            file,
            system,
            stats,
            dot,
            max_states,
            max_edges,
            json,
        } => {
            let model = load_model(&file, None)?;
            let (sys, diagnostics) = assemble(&model, &system)?;
            let rg = match build_product_with(&sys, limits(max_states, max_edges)) {
                Ok(rg) => rg,
                Err(e) => {
                    let e = product_error(&system, e);
                    if let CliError::Cap { partial, .. } = &e {
                        writeln!(err, "partial: {}", stats_line(partial)).map_err(io)?;
                    }
                    return Err(e);
                }
            };
            let st = rg.stats();
            if stats {
                writeln!(out, "system: {system}").map_err(io)?;
                writeln!(out, "machines: {}", sys.machines().len()).map_err(io)?;
                writeln!(out, "states: {}", st.states).map_err(io)?;
                writeln!(out, "edges: {}", st.edges).map_err(io)?;
                writeln!(out, "deadlocks: {}", st.deadlocks).map_err(io)?;
                writeln!(out, "fairness_sets: {}", st.fairness_sets).map_err(io)?;
                writeln!(out, "env_alphabet_size: {}", st.env_alphabet_size).map_err(io)?;
            } else {
                writeln!(out, "{system}: {}", stats_line(&st)).map_err(io)?;
            }
            if let Some(p) = dot {
                write_file(&p, &export_graph_dot(&rg))?;
            }
            if let Some(p) = json {
                let report = RunReport {
                    systems: vec![SystemReport {
                        name: system,
                        machines: sys.machines().len(),
                        stats: Some(st),
                        diagnostics,
                    }],
                    checks: Vec::new(),
                };
                write_json(&p, &report)?;
            }
            Ok(EXIT_OK)
        }
        Command::Check {
            file,
            checks,
            system,
            formula,
            fair,
            witness,
            on_the_fly,
            allow_deadlock,
            max_states,
            max_edges,
            json,
        } => {
            let model = load_model(&file, checks.as_deref())?;
            let list: Vec<CheckDef> = if formula.is_empty() {
                let list: Vec<CheckDef> = model
                    .checks
                    .iter()
                    .filter(|c| system.as_ref().is_none_or(|s| &c.system == s))
                    .cloned()
                    .collect();
                if list.is_empty() {
                    return Err(CliError::Usage(String::from(
                        "no checks to run; give --formula or `check` statements",
                    )));
                }
                list
            } else {
                let system = match system {
                    Some(s) => s,
                    None if model.systems.len() == 1 => model.systems[0].name.clone(),
                    None => {
                        return Err(CliError::Usage(String::from(
                            "--system is required with --formula",
                        )))
                    }
                };
                formula
                    .iter()
                    .map(|text| {
                        let f = crate::ctl::parse_ctl(text).map_err(CliError::Check)?;
                        Ok(CheckDef {
                            system: system.clone(),
                            formula: f,
                            fair,
                            expect: None,
                        })
                    })
                    .collect::<Result<_, CliError>>()?
            };
            let opts = RunOptions {
                fair,
                witness,
                on_the_fly,
                allow_deadlock,
                limits: limits(max_states, max_edges),
            };
            let report = run_checks(&model, &list, &opts)?;
            for s in &report.systems {
                for d in &s.diagnostics {
                    writeln!(err, "{}: {d}", s.name).map_err(io)?;
                }
            }
            out.write_all(report.render().as_bytes()).map_err(io)?;
            if let Some(p) = json {
                write_json(&p, &report)?;
            }
            Ok(if report.all_as_expected() {
                EXIT_OK
            } else {
                EXIT_VALIDATION
            })
        }
        Command::Dot {
            file,
            machine,
            output,
        } => {
            let model = load_model(&file, None)?;
            let m = model
                .machine(&machine)
                .ok_or_else(|| CliError::Usage(format!("unknown machine `{machine}`")))?;
            let text = export_machine_dot(m);
            match output {
                Some(p) => write_file(&p, &text)?,
                None => out.write_all(text.as_bytes()).map_err(io)?,
            }
            Ok(EXIT_OK)
        }
    }
}

fn stats_line(st: &Stats) -> String {
    format!(
        "{} states, {} edges, {} deadlocks, {} fairness sets, {} environment symbols",
        st.states, st.edges, st.deadlocks, st.fairness_sets, st.env_alphabet_size
    )
}
