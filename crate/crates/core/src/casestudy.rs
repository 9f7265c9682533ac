//! The three-stage pipeline with a shared-resource arbiter and a
//! message-counting observer, shipped as `examples/pipeline.csm` and
//! `examples/pipeline.checks`.

use crate::boolform::parse_formula;
use crate::cli::{run_checks, CliError, RunOptions, RunReport};
use crate::csm::Machine;
use crate::ctl::CtlFormula;
use crate::modelfmt::{parse_model, CheckDef, ModelFile};

pub const PIPELINE_MODEL: &str = include_str!("../examples/pipeline.csm");
pub const PIPELINE_CHECKS: &str = include_str!("../examples/pipeline.checks");

/// The 21 pipeline machines, without the observer.
pub const PIPELINE: &str = "Pipeline";
/// The pipeline with `Invariant` attached.
pub const PIPELINE_OBSERVED: &str = "PipelineObs";

/// The shipped model together with its verification script.
pub fn build_pipeline_model() -> ModelFile {
    let mut m = parse_model(PIPELINE_MODEL).expect("shipped model parses");
    m.extend_from(PIPELINE_CHECKS)
        .expect("shipped checks parse");
    m
}

/// Counts messages between entry (`msg_1`) and exit (`msg_4`) up to 3;
/// a fourth message or an exit from the empty pipeline leads to `Error`.
pub fn build_invariant() -> Machine {
    build_invariant_bounded(3)
}

/// [`build_invariant`] with capacity `k` (states `s0..sk`).
pub fn build_invariant_bounded(k: usize) -> Machine {
    let names: Vec<String> = (0..=k).map(|i| format!("s{i}")).collect();
    let mut nodes: Vec<(&str, &[&str])> = names.iter().map(|n| (n.as_str(), &[][..])).collect();
    nodes.push(("Error", &[]));
    let g = |s: &str| parse_formula(s).expect("guard");
    let mut edges = Vec::new();
    for i in 0..=k {
        let here = names[i].as_str();
        if i == 0 {
            edges.push((here, here, g("!msg_1 * !msg_4")));
        } else {
            edges.push((here, here, g("!msg_1 * !msg_4 + msg_1 * msg_4")));
        }
        let up = if i < k {
            names[i + 1].as_str()
        } else {
            "Error"
        };
        edges.push((here, up, g("msg_1 * !msg_4")));
        if i == 0 {
            edges.push((here, "Error", g("msg_4")));
        } else {
            edges.push((here, names[i - 1].as_str(), g("msg_4 * !msg_1")));
        }
    }
    edges.push(("Error", "Error", g("1")));
    Machine::build("Invariant", "s0", &nodes, &edges).expect("invariant is well formed")
}

/// The three properties of the verification session: no token loss or
/// overflow, and the two fair liveness properties.
pub fn session_checks() -> Vec<CheckDef> {
    let s = |i: usize| CtlFormula::in_state("Invariant", &format!("s{i}"));
    let mk = |formula, fair| CheckDef {
        system: PIPELINE_OBSERVED.to_string(),
        formula,
        fair,
        expect: None,
    };
    vec![
        mk(
            CtlFormula::ag(CtlFormula::not(CtlFormula::in_state("Invariant", "Error"))),
            false,
        ),
        mk(CtlFormula::ag(CtlFormula::af(s(0))), true),
        mk(CtlFormula::ag(CtlFormula::af(s(3))), true),
    ]
}

/// Builds the observed pipeline product and evaluates [`session_checks`],
/// with witnesses for every false verdict.
pub fn run_session() -> Result<RunReport, CliError> {
    let model = build_pipeline_model();
    let opts = RunOptions {
        witness: true,
        ..RunOptions::default()
    };
    run_checks(&model, &session_checks(), &opts)
}
