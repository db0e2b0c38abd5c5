use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use matchopt::dcda::bound_status;
use matchopt::io::{instance_digest, load_instance, parse_rational, ReportFile};
use matchopt::market::is_stable;
use matchopt::objectives::{builtin, OneToAll, WeightedSum};
use matchopt::oracle::{enumerate_all_stable, optimum_over, Budget, Enumeration, OracleMode};
use matchopt::solver::StudentCosts;
use matchopt::{Instance, Rational};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(format!("{name}.json"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matchopt"))
        .args(args)
        .env_remove("MATCHOPT_ORACLE_BUDGET")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> ReportFile {
    serde_json::from_slice(&out.stdout).expect("stdout is a report")
}

fn oracle(inst: &Instance) -> Enumeration {
    enumerate_all_stable(inst, &Budget::default()).unwrap()
}

/// The report's matching, checked stable against the instance it names.
fn checked_matching(inst: &Instance, r: &ReportFile) -> matchopt::Matching {
    assert_eq!(r.instance_digest, instance_digest(inst));
    let m = r.matching(inst).unwrap().expect("report has a matching");
    assert!(is_stable(inst, &m).unwrap().is_stable());
    m
}

#[test]
fn solve_one2all_on_ex_two() {
    let path = fixture("ex_two");
    let out = run(&["solve", path.to_str().unwrap(), "--objective", "one2all", "--mode", "utilitarian"]);
    assert_eq!(out.status.code(), Some(0));
    let inst = load_instance(&path).unwrap();
    let (best, optima) = optimum_over::<Rational>(&inst, &OneToAll, OracleMode::Utilitarian, &oracle(&inst));
    let r = report(&out);
    let value = &r.objective.as_ref().unwrap().value;
    assert_eq!(parse_rational(value).unwrap(), best);
    assert_eq!(value, "0");
    assert_eq!(vec![checked_matching(&inst, &r)], optima);
}

#[test]
fn dcda_certifies_no_solution_with_exit_2() {
    let path = fixture("ex_two_blocked");
    let inst = load_instance(&path).unwrap();
    let feasible = oracle(&inst).matchings.iter().any(|m| {
        bound_status(&inst, m)
            .iter()
            .all(|b| b.lower_violation + b.upper_violation == 0)
    });
    assert!(!feasible);
    let out = run(&["dcda", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let r = report(&out);
    assert_eq!(r.status, "no_solution");
    assert!(r.extra.unwrap()["witness"]["kind"].is_string());
}

#[test]
fn dcda_and_egal_dcda_succeed_on_ex_two() {
    let path = fixture("ex_two");
    let inst = load_instance(&path).unwrap();
    let out = run(&["dcda", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let m = checked_matching(&inst, &report(&out));
    assert!(bound_status(&inst, &m).iter().all(|b| b.upper_violation == 0));

    let path = fixture("ex_two_four_caps");
    let inst = load_instance(&path).unwrap();
    let (best, _) = optimum_over::<Rational>(&inst, &*builtin("one2all-max").unwrap(), OracleMode::Egalitarian, &oracle(&inst));
    let out = run(&["egal-dcda", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(parse_rational(&r.objective.as_ref().unwrap().value).unwrap(), best);
    checked_matching(&inst, &r);
}

#[test]
fn malformed_files_exit_1_with_messages() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"students":[{"id":"s1","prefs":["i1"]}],"institutions":[{"id":"i1","capacity":0,"prefs":[]}],"counting_rule":"one_to_all"}"#,
    )
    .unwrap();
    let out = run(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("invalid instance"), "{err}");
    assert!(err.lines().count() >= 3, "{err}");

    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(run(&["validate", bad.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(run(&["validate", "/no/such/file.json"]).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let path = fixture("ex_two");
    let out = run(&["solve", path.to_str().unwrap(), "--objective", "nonsense"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("unknown objective"));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn validate_reports_sizes() {
    let out = run(&["validate", fixture("ex_sib").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r.diagnostics["students"], 4);
    assert_eq!(r.diagnostics["families"], 1);
}

#[test]
fn gen_is_deterministic_and_valid() {
    let args = ["gen", "--students", "8", "--institutions", "4", "--seed", "17"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("g.json");
    std::fs::write(&file, &a.stdout).unwrap();
    assert_eq!(run(&["validate", file.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(run(&["gen", "--list-length", "0"]).status.code(), Some(1));
}

#[test]
fn enumerate_matches_the_oracle_and_honors_the_budget() {
    let path = fixture("ex_sib");
    let inst = load_instance(&path).unwrap();
    let out = run(&["enumerate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r.diagnostics["count"], oracle(&inst).len());

    let out = Command::new(env!("CARGO_BIN_EXE_matchopt"))
        .args(["enumerate", path.to_str().unwrap()])
        .env("MATCHOPT_ORACLE_BUDGET", "10,5,1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("budget"));
}

#[test]
fn two_sided_costs_from_a_file() {
    let path = fixture("ex_two");
    let inst = load_instance(&path).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let costs = dir.path().join("h.json");
    std::fs::write(
        &costs,
        r#"{"costs":[{"student":"s1","institution":"i2","cost":"10"}],"unmatched":{"s2":"1/2"}}"#,
    )
    .unwrap();
    let out = run(&["solve", path.to_str().unwrap(), "--two-sided", costs.to_str().unwrap(), "--check"]);
    assert_eq!(out.status.code(), Some(0));
    let mut h = StudentCosts::<Rational>::zero(&inst);
    h.costs.insert((0, 1), Rational::from_integer(10.into()));
    h.unmatched[1] = parse_rational("1/2").unwrap();
    let (best, optima) = optimum_over(&inst, &OneToAll, OracleMode::TwoSided(&h), &oracle(&inst));
    let r = report(&out);
    assert_eq!(parse_rational(&r.objective.as_ref().unwrap().value).unwrap(), best);
    assert_eq!(vec![checked_matching(&inst, &r)], optima);
    assert!(r.diagnostics["oracle_value"].is_string());

    let out = run(&["solve", path.to_str().unwrap(), "--two-sided", costs.to_str().unwrap(), "--mode", "egalitarian"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn mixed_objective_and_weights() {
    let path = fixture("ex_sib");
    let inst = load_instance(&path).unwrap();
    let out = run(&[
        "solve",
        path.to_str().unwrap(),
        "--objective",
        "mix:one2all=1/2,siblings=3",
        "--weights",
        "--student-optimal",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let mix = WeightedSum {
        terms: vec![
            (parse_rational("1/2").unwrap(), builtin("one2all").unwrap()),
            (parse_rational("3").unwrap(), builtin("siblings").unwrap()),
        ],
    };
    let (best, _) = optimum_over(&inst, &mix, OracleMode::Utilitarian, &oracle(&inst));
    let r = report(&out);
    assert_eq!(parse_rational(&r.objective.as_ref().unwrap().value).unwrap(), best);
    checked_matching(&inst, &r);
    let table = &r.extra.as_ref().unwrap()["edge_weights"];
    assert!(table["weights"].is_array());
}

#[test]
fn stable_sets_on_both_sides() {
    let path = fixture("ex_two");
    let out = run(&["stable-sets", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let catalog = report(&out).extra.unwrap()["catalog"].clone();
    let i1 = &catalog[0];
    assert_eq!(i1["agent"], "i1");
    let partners: Vec<&Value> = i1["sets"].as_array().unwrap().iter().map(|s| &s["partners"]).collect();
    assert_eq!(partners, [&serde_json::json!(["s1"]), &serde_json::json!(["s2"])]);

    let out = run(&["stable-sets", path.to_str().unwrap(), "--side", "students"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out).diagnostics["side"], "students");
}

#[test]
fn da_trace_uses_ids() {
    let out = run(&["da", "--trace", fixture("ex_two").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let trace = report(&out).extra.unwrap()["trace"].clone();
    assert_eq!(trace[0]["student"], "s1");
}

#[test]
fn bench_rows_respect_the_work_bound() {
    let out = run(&["bench", "--students", "16", "--institutions", "4", "--max-edges", "800", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert!(rows.len() >= 3);
    for row in rows {
        assert!(row["proposals"].as_u64() <= row["edges"].as_u64());
    }
}
