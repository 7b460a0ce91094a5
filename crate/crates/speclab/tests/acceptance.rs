//! Acceptance suite. Run with `cargo test -p speclab --test acceptance -- --nocapture`
//! to see one PASS/FAIL line per criterion.

use std::time::{Duration, Instant};

use serde_json::{json, Value};
use speclab::experiments::{run, ReportEnvelope};

const CANTOR_DIM: f64 = 0.630_929_753_571_457_4;

struct Suite {
    id: u32,
    title: &'static str,
    budget: Duration,
    runs: Vec<(&'static str, Value)>,
}

fn suites() -> Vec<Suite> {
    let ninths_dim = 2f64.ln() / 9f64.ln();
    let small = json!([16, 32, 64, 128, 256]);
    let riesz_windows: Vec<u64> = (8..=16).map(|k| 1u64 << k).collect();
    vec![
        Suite {
            id: 1,
            title: "trilinear duality",
            budget: Duration::from_secs(10),
            runs: vec![("dual-check", json!({ "seed": 7, "suite": "trilinear", "degree": 64, "trials": 100, "tolerance": 1e-9 }))],
        },
        Suite {
            id: 2,
            title: "multilinear duality",
            budget: Duration::from_secs(30),
            runs: vec![("dual-check", json!({ "seed": 11, "suite": "multilinear", "multilinear_cases": 20 }))],
        },
        Suite {
            id: 3,
            title: "counting oracle equivalence",
            budget: Duration::from_secs(60),
            runs: vec![(
                "count3ap",
                json!({
                    "seed": 3,
                    "measure": { "kind": "riesz", "frequencies": [4, 16, 64] },
                    "window": 4096,
                    "random_sets": 100,
                    "full_intervals": [1, 2, 64, 512]
                }),
            )],
        },
        Suite {
            id: 4,
            title: "dimension estimators",
            budget: Duration::from_secs(60),
            runs: vec![
                ("dimension", json!({ "seed": 1, "measure": { "kind": "lebesgue" }, "expected": 1.0, "tolerance": 0.03 })),
                ("dimension", json!({ "seed": 2, "measure": { "kind": "dirac" }, "expected": 0.0, "tolerance": 0.01 })),
                ("dimension", json!({ "seed": 3, "measure": { "kind": "cantor" }, "expected": CANTOR_DIM, "tolerance": 0.05 })),
                ("dimension", json!({ "seed": 4, "measure": { "kind": "ninths" }, "expected": ninths_dim, "tolerance": 0.05 })),
            ],
        },
        Suite {
            id: 5,
            title: "corollary consistency on shipped measures",
            budget: Duration::from_secs(300),
            runs: vec![
                ("corollary", json!({ "seed": 5, "measure": { "kind": "lebesgue" }, "windows": small })),
                ("corollary", json!({ "seed": 5, "measure": { "kind": "dirac" }, "windows": small })),
                ("corollary", json!({ "seed": 5, "measure": { "kind": "cantor" }, "windows": small })),
                ("corollary", json!({ "seed": 5, "measure": { "kind": "ninths" }, "windows": small })),
                ("corollary", json!({ "seed": 5, "measure": { "kind": "riesz_geometric", "base": 4, "depth": 6 }, "windows": [256, 512, 1024, 2048, 4096] })),
                ("corollary", json!({ "seed": 5, "measure": { "kind": "riesz_geometric", "base": 4, "depth": 8 }, "windows": riesz_windows })),
            ],
        },
        Suite {
            id: 6,
            title: "scaling mechanics",
            budget: Duration::from_secs(120),
            runs: vec![
                (
                    "scaling",
                    json!({ "seed": 6, "measure": { "kind": "dirac" }, "alpha": 0.0, "radii": [0.1, 0.03, 0.01, 0.003, 0.001], "expected_slope": -1.0 }),
                ),
                ("scaling", json!({ "seed": 6, "measure": { "kind": "cantor" }, "alpha": CANTOR_DIM, "radii": { "triadic": [2, 8] } })),
            ],
        },
        Suite {
            id: 7,
            title: "construction certificate at delta = 0.05",
            budget: Duration::from_secs(600),
            runs: vec![("construction-verify", json!({ "seed": 2024, "delta": 0.05 }))],
        },
        Suite {
            id: 8,
            title: "bundle proximity constant",
            budget: Duration::from_secs(120),
            runs: vec![(
                "construction-verify",
                json!({ "seed": 8, "conditions": false, "proximity_deltas": [0.1, 0.05, 0.025] }),
            )],
        },
    ]
}

struct Outcome {
    pass: bool,
    elapsed: Duration,
    reports: Vec<ReportEnvelope>,
    detail: String,
}

fn execute(s: &Suite) -> Outcome {
    let start = Instant::now();
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (name, cfg) in &s.runs {
        match run(name, cfg, None) {
            Ok(o) => {
                for c in o.report.failed_checks() {
                    failures.push(format!("{name}/{} = {:e} (tol {:e})", c.name, c.value, c.tolerance));
                }
                reports.push(o.report);
            }
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    if elapsed > s.budget {
        failures.push(format!("runtime {:.1}s over {:.0}s", elapsed.as_secs_f64(), s.budget.as_secs_f64()));
    }
    Outcome { pass: failures.is_empty(), elapsed, reports, detail: failures.join("; ") }
}

fn line(id: u32, title: &str, pass: bool, elapsed: Duration, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {id}: {verdict} {title} ({:.1}s){}", elapsed.as_secs_f64(), if detail.is_empty() { String::new() } else { format!(" [{detail}]") });
}

#[test]
fn acceptance_criteria() {
    let suites = suites();
    let mut all = true;
    let mut first = Vec::new();
    for s in &suites {
        let o = execute(s);
        line(s.id, s.title, o.pass, o.elapsed, &o.detail);
        all &= o.pass;
        first.push(o.reports);
    }

    // criterion 9: a second pass must reproduce every report except its timing
    let start = Instant::now();
    let mut mismatches = Vec::new();
    for (s, before) in suites.iter().zip(&first) {
        let again = execute(s);
        let a: Vec<String> = before.iter().map(|r| r.deterministic_json().unwrap()).collect();
        let b: Vec<String> = again.reports.iter().map(|r| r.deterministic_json().unwrap()).collect();
        if a != b {
            mismatches.push(s.id.to_string());
        }
    }
    let det = mismatches.is_empty();
    let detail = if det { String::new() } else { format!("differs in criteria {}", mismatches.join(", ")) };
    line(9, "determinism", det, start.elapsed(), &detail);
    all &= det;
    assert!(all, "some acceptance criteria failed; rerun with --nocapture for details");
}
