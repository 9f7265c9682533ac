//! Acceptance criteria. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; exits non-zero if any fails.

mod common;

use std::collections::VecDeque;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use cosma::boolform::parse_formula;
use cosma::casestudy::{
    build_invariant_bounded, build_pipeline_model, run_session, PIPELINE, PIPELINE_OBSERVED,
};
use cosma::csm::{Machine, System};
use cosma::ctl::{
    check, check_kripke, check_on_the_fly, parse_ctl, validate_trace, witness, CtlFormula, Kripke,
    TraceKind,
};
use cosma::modelfmt::parse_model;
use cosma::product::build_product;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{compare_product, random_ctl, random_system, Graph};

const RANDOM_SYSTEMS: usize = 500;
const RANDOM_GRAPHS: usize = 500;
const TIME_LIMIT: Duration = Duration::from_secs(60);
const STATE_BAND: (usize, usize) = (2000, 40000);

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c1_product_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut states = 0;
    for i in 0..RANDOM_SYSTEMS {
        let s = random_system(&mut rng);
        let rg = build_product(&s).map_err(|e| format!("system {i}: {e}"))?;
        compare_product(&s, &rg).map_err(|e| format!("system {i}: {e}"))?;
        states += rg.states().len();
    }
    let t = start.elapsed();
    ensure(t < TIME_LIMIT, || format!("took {t:?}"))?;
    Ok(format!(
        "{RANDOM_SYSTEMS} systems ({states} states) agree with the brute-force oracle in {t:.2?}"
    ))
}

fn c2_ctl_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..RANDOM_GRAPHS {
        let g = Graph::random(&mut rng, 64, 0);
        let (k, labels) = (g.kripke(), g.labels());
        let f = random_ctl(&mut rng, 4);
        let got = check_kripke(&k, &labels, &f, false).map_err(|e| e.to_string())?;
        let want = g.sat(&f, false);
        ensure(
            (0..g.n).all(|s| got.satisfying.contains(s) == want[s]),
            || format!("plain graph {i}, formula {f}"),
        )?;
    }
    for i in 0..RANDOM_GRAPHS {
        let g = Graph::random(&mut rng, 12, 4);
        let (k, labels) = (g.kripke(), g.labels());
        let f = random_ctl(&mut rng, 4);
        let got = check_kripke(&k, &labels, &f, true).map_err(|e| e.to_string())?;
        let want = g.sat(&f, true);
        ensure(
            (0..g.n).all(|s| got.satisfying.contains(s) == want[s]),
            || format!("fair graph {i}, formula {f}"),
        )?;
    }
    Ok(format!(
        "{RANDOM_GRAPHS} plain and {RANDOM_GRAPHS} fair graphs agree with the reference"
    ))
}

fn c3_safety() -> Outcome {
    let start = Instant::now();
    let model = build_pipeline_model();
    let rg = build_product(&model.system(PIPELINE_OBSERVED).unwrap()).map_err(|e| e.to_string())?;
    let f = parse_ctl("AG !in(Invariant.Error)").unwrap();
    let r = check(&rg, &f, false).map_err(|e| e.to_string())?;
    let t = start.elapsed();
    ensure(r.holds_at_initial, || String::from("evaluated FALSE"))?;
    ensure(t < TIME_LIMIT, || format!("took {t:?}"))?;
    Ok(format!(
        "AG !in(Invariant.Error) is TRUE on {} states in {t:.2?}",
        rg.states().len()
    ))
}

fn c4_liveness() -> Outcome {
    let model = build_pipeline_model();
    let plain = build_product(&model.system(PIPELINE).unwrap()).map_err(|e| e.to_string())?;
    let rg = build_product(&model.system(PIPELINE_OBSERVED).unwrap()).map_err(|e| e.to_string())?;
    let (k, _) = Kripke::from_graph(&rg, false).map_err(|e| e.to_string())?;
    for n in [plain.states().len(), rg.states().len()] {
        ensure((STATE_BAND.0..=STATE_BAND.1).contains(&n), || {
            format!("{n} states outside {STATE_BAND:?}")
        })?;
    }
    let mut lens = Vec::new();
    for text in ["AG AF in(Invariant.s0)", "AG AF in(Invariant.s3)"] {
        let f = parse_ctl(text).unwrap();
        let r = check(&rg, &f, true).map_err(|e| e.to_string())?;
        ensure(!r.holds_at_initial, || format!("{text} evaluated TRUE"))?;
        let w = witness(&k, &rg, &f, &r)
            .map_err(|e| e.to_string())?
            .ok_or_else(|| format!("{text}: no witness"))?;
        ensure(w.kind == TraceKind::Lasso, || {
            format!("{text}: witness is not a lasso")
        })?;
        ensure(validate_trace(&k, &w, true), || {
            format!("{text}: witness fails replay")
        })?;
        let target = if text.ends_with("s0)") { "s0" } else { "s3" };
        let inv = rg.system().machine_index("Invariant").unwrap();
        let node = rg.system().machines()[inv].node_index(target).unwrap();
        let cycle_states = w.states(&k);
        let on_cycle = &cycle_states[w.prefix.len()..];
        ensure(on_cycle.iter().all(|&s| rg.state(s).0[inv] != node), || {
            format!("{text}: cycle visits {target}")
        })?;
        lens.push(format!("{}+{}", w.prefix.len(), w.cycle.len()));
    }
    Ok(format!(
        "both FALSE under fairness with valid fair lassos ({}); {} / {} states (without / with observer)",
        lens.join(", "),
        plain.states().len(),
        rg.states().len()
    ))
}

/// BFS depth of the nearest state violating `p` in the full product.
fn shortest_violation(s: &System, p: &CtlFormula) -> Option<usize> {
    let rg = build_product(s).ok()?;
    let mut dist = vec![usize::MAX; rg.states().len()];
    let mut q = VecDeque::from([rg.initial()]);
    dist[rg.initial()] = 0;
    while let Some(v) = q.pop_front() {
        if !cosma::ctl::eval_state(s, p, rg.state(v)).unwrap() {
            return Some(dist[v]);
        }
        for &e in rg.outgoing(v) {
            let d = rg.edges()[e].dst;
            if dist[d] == usize::MAX {
                dist[d] = dist[v] + 1;
                q.push_back(d);
            }
        }
    }
    None
}

fn c5_on_the_fly() -> Outcome {
    let model = build_pipeline_model();
    let base = model.system(PIPELINE).unwrap();
    let sys = base
        .add_observer(build_invariant_bounded(1).rename("Invariant").unwrap())
        .unwrap();
    let p = parse_ctl("!in(Invariant.Error)").unwrap();
    let depth = shortest_violation(&sys, &p).ok_or("no violation in the bounded model")?;
    let full = build_product(&sys).unwrap().states().len();
    let r = check_on_the_fly(&sys, &p).map_err(|e| e.to_string())?;
    ensure(!r.result.holds_at_initial, || {
        String::from("violation not found")
    })?;
    ensure(r.layers <= depth + 1, || {
        format!("{} layers for depth {depth}", r.layers)
    })?;
    let cx = r.counterexample.as_ref().ok_or("no counterexample")?;
    ensure(cx.prefix.len() == depth, || {
        format!(
            "counterexample of length {} for depth {depth}",
            cx.prefix.len()
        )
    })?;
    ensure(r.states_explored < full, || {
        String::from("explored the whole product")
    })?;

    let toy = Machine::build(
        "Chain",
        "a",
        &[("a", &[]), ("b", &[]), ("c", &[]), ("d", &[])],
        &[
            ("a", "b", parse_formula("1").unwrap()),
            ("b", "c", parse_formula("1").unwrap()),
            ("c", "d", parse_formula("1").unwrap()),
            ("d", "d", parse_formula("1").unwrap()),
        ],
    )
    .unwrap();
    let toy = System::new(vec![toy]).unwrap();
    let t =
        check_on_the_fly(&toy, &parse_ctl("!in(Chain.c)").unwrap()).map_err(|e| e.to_string())?;
    ensure(!t.result.holds_at_initial && t.layers <= 3, || {
        format!("toy: {} layers", t.layers)
    })?;
    Ok(format!(
        "bounded pipeline: {} layers for depth {depth}, {} of {full} states explored",
        r.layers, r.states_explored
    ))
}

fn c6_fairness() -> Outcome {
    let model = build_pipeline_model();
    let m = model.machine("Proc_2").unwrap().clone();
    let rg = build_product(&System::new(vec![m]).unwrap()).map_err(|e| e.to_string())?;
    let process = rg.system().machines()[0].node_index("Process").unwrap();
    let entry = (0..rg.states().len())
        .find(|&s| rg.state(s).0[0] == process)
        .ok_or("Process unreachable")?;
    let f = parse_ctl("AF in(Proc_2.Put)").unwrap();
    let unfair = check(&rg, &f, false).map_err(|e| e.to_string())?;
    let fair = check(&rg, &f, true).map_err(|e| e.to_string())?;
    ensure(!unfair.satisfying.contains(entry), || {
        String::from("TRUE without fairness")
    })?;
    ensure(fair.satisfying.contains(entry), || {
        String::from("FALSE with fairness")
    })?;
    Ok(String::from(
        "AF in(Proc_2.Put) from Process: FALSE without fairness, TRUE with fairness",
    ))
}

fn c7_mutex() -> Outcome {
    let model = build_pipeline_model();
    let rg = build_product(&model.system(PIPELINE_OBSERVED).unwrap()).map_err(|e| e.to_string())?;
    let f = parse_ctl("AG !(in(Proc_1.UseRes) & in(Proc_3.UseRes))").unwrap();
    let r = check(&rg, &f, false).map_err(|e| e.to_string())?;
    ensure(r.holds_at_initial, || String::from("evaluated FALSE"))?;
    let both = parse_ctl("EF (in(Proc_1.UseRes) | in(Proc_3.UseRes))").unwrap();
    ensure(check(&rg, &both, false).unwrap().holds_at_initial, || {
        String::from("resource never used")
    })?;
    Ok(String::from(
        "AG !(in(Proc_1.UseRes) & in(Proc_3.UseRes)) is TRUE",
    ))
}

fn c8_determinism() -> Outcome {
    let model = build_pipeline_model();
    let a = build_product(&model.system(PIPELINE_OBSERVED).unwrap()).unwrap();
    let b = build_product(&build_pipeline_model().system(PIPELINE_OBSERVED).unwrap()).unwrap();
    ensure(a.states() == b.states() && a.edges() == b.edges(), || {
        String::from("products differ")
    })?;
    ensure(a.fairness() == b.fairness(), || {
        String::from("fairness sets differ")
    })?;

    let strip = |s: String| {
        s.lines()
            .map(|l| l.split(" [").next().unwrap().to_string())
            .collect::<Vec<_>>()
    };
    let r1 = run_session().map_err(|e| e.to_string())?;
    let r2 = run_session().map_err(|e| e.to_string())?;
    ensure(strip(r1.render()) == strip(r2.render()), || {
        String::from("reports differ")
    })?;
    ensure(
        r1.checks
            .iter()
            .all(|c| c.witness.as_ref().is_none_or(|w| w.valid)),
        || String::from("invalid witness in report"),
    )?;

    let printed = model.to_string();
    let back = parse_model(&printed).map_err(|e| e.to_string())?;
    ensure(back == model, || String::from("model round trip differs"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..500 {
        let f = random_ctl(&mut rng, 5);
        let g = parse_ctl(&f.to_string()).map_err(|e| format!("{f}: {e}"))?;
        ensure(f == g, || format!("formula round trip: {f} -> {g}"))?;
    }
    for c in &model.checks {
        ensure(
            parse_ctl(&c.formula.to_string()).unwrap() == c.formula,
            || format!("{}", c.formula),
        )?;
    }
    Ok(String::from(
        "identical products and reports; model and formula round trips hold",
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 product oracle equivalence", c1_product_oracle),
        ("2 CTL oracle equivalence", c2_ctl_oracle),
        ("3 safety verdict", c3_safety),
        ("4 liveness verdicts and witnesses", c4_liveness),
        ("5 on-the-fly early termination", c5_on_the_fly),
        ("6 fairness discrimination", c6_fairness),
        ("7 mutual exclusion", c7_mutex),
        ("8 determinism and round trips", c8_determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
