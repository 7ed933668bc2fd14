use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hjlab_cli::scenario::Scenario;
use serde_json::Value;

const NR: &str = r#"
name = "nr"
[grid]
extents = [[0.0, 1.0]]
counts = [81]
[hamiltonian]
kind = "eikonal"
potential = "abs(x - 0.5)"
[bc]
kind = "neumann"
[initial]
u0 = "0.3*cos(2*pi*x)"
[run]
t_final = 6.0
[check]
samples = 4000
"#;

fn hjlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hjlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario_file(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(cmd: &str, scenario: &Path, out: &Path) -> Output {
    hjlab(&[cmd, "--scenario", scenario.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn invalid_cfl_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario_file(dir.path(), "s.toml", &NR.replace("t_final = 6.0", "t_final = 6.0\ncfl = 1.5"));
    let o = run("evolve", &s, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("run.cfl: CFL factor must be in (0,1]"), "{}", stderr(&o));
}

#[test]
fn non_coercive_hamiltonian_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = NR.replace("kind = \"eikonal\"\npotential = \"abs(x - 0.5)\"", "kind = \"custom\"\nexpression = \"x*p\"");
    let s = scenario_file(dir.path(), "s.toml", &text);
    let o = run("evolve", &s, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("not coercive"));
}

#[test]
fn missing_prerequisites_and_empty_reports_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario_file(dir.path(), "s.toml", NR);
    let out = dir.path().join("out");
    let o = run("profile", &s, &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("run.json"), "{}", stderr(&o));
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let o = hjlab(&["report", "--out", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("scenario.toml"));
}

#[test]
fn echoed_scenario_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario_file(dir.path(), "s.toml", NR);
    let out = dir.path().join("out");
    let o = hjlab(&["check", "--scenario", s.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let echoed = fs::read_to_string(out.join("scenario.toml")).unwrap();
    let parsed = Scenario::parse(&echoed).unwrap();
    assert_eq!(parsed.run.seed, 7);
    assert_eq!(parsed.to_toml(), echoed);
    let mut original = Scenario::parse(NR).unwrap();
    original.run.seed = 7;
    assert_eq!(parsed, original);
}

#[test]
fn eikonal_ray_audit_fails_with_a_replayable_witness() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{NR}assumptions = [\"ray-monotonicity-plus\", \"convexity\"]\n");
    let s = scenario_file(dir.path(), "s.toml", &text);
    let out = dir.path().join("out");
    let o = run("check", &s, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let rep = json(out.join("check_ray-monotonicity-plus.json"));
    assert_eq!(rep["verdict"], "fail");
    let w = &rep["witness"];
    assert_eq!(w["kind"], "ray");
    // |p| - |x - 1/2| along the recorded ray
    let h = |x: f64, p: f64| p.abs() - (x - 0.5).abs();
    let (x, p, q, mu) = (
        w["x"][0].as_f64().unwrap(),
        w["p"][0].as_f64().unwrap(),
        w["q"][0].as_f64().unwrap(),
        w["mu"].as_f64().unwrap(),
    );
    let lhs = mu * h(x, p / mu + q);
    let rhs = h(x, p + q);
    assert!((lhs - w["lhs"].as_f64().unwrap()).abs() <= 1e-12);
    assert!((rhs - w["rhs"].as_f64().unwrap()).abs() <= 1e-12);
    assert_eq!(json(out.join("check_convexity.json"))["verdict"], "pass");
    assert!(!out.join("check_coercivity.json").exists());
}

#[test]
fn full_pipeline_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario_file(dir.path(), "s.toml", NR);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = hjlab(&["all", "--scenario", s.to_str().unwrap(), "--out", a.to_str().unwrap(), "--threads", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = hjlab(&["all", "--scenario", s.to_str().unwrap(), "--out", b.to_str().unwrap(), "--threads", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut names: Vec<String> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    for required in ["run.json", "snapshots.csv", "ergodic.json", "profile.json", "mu_series.csv", "report.json"] {
        assert!(names.iter().any(|n| n == required), "missing {required}");
    }
    for n in &names {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n} differs");
    }
    let report = json(a.join("report.json"));
    let status = |name: &str| {
        report["entries"]
            .as_array()
            .unwrap()
            .iter()
            .find(|e| e["name"] == name)
            .map(|e| e["status"].as_str().unwrap().to_string())
            .unwrap()
    };
    assert_eq!(status("ergodic-constant"), "pass");
    assert_eq!(status("asymptotic-profile"), "pass");
    assert_eq!(status("boundary-bound"), "not-applicable");
    let profile = json(a.join("profile.json"));
    assert!(profile["distance"].as_f64().unwrap() <= 2e-2);
}

#[test]
fn dirichlet_pipeline_brackets_incompatible_data() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
[grid]
extents = [[0.0, 1.0]]
counts = [81]
[hamiltonian]
kind = "eikonal"
potential = "max(abs(x - 0.5) - 0.1, 0)"
[bc]
kind = "dirichlet"
g = "0"
[initial]
u0 = "0.5"
[run]
t_final = 10.0
[check]
assumptions = ["compatibility", "boundary-data-nonnegative"]
"#;
    let s = scenario_file(dir.path(), "s.toml", text);
    let out = dir.path().join("out");
    let o = run("all", &s, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let sandwich = json(out.join("sandwich.json"));
    assert_eq!(sandwich["compatible"], false);
    let stationary = json(out.join("stationary.json"));
    assert_eq!(stationary[1]["outcome"], "solved");
    assert_eq!(stationary[2]["outcome"], "infeasible");
    assert_eq!(json(out.join("check_compatibility.json"))["verdict"], "fail");
    assert_eq!(json(out.join("check_boundary-data-nonnegative.json"))["verdict"], "pass");
    let run_summary = json(out.join("run.json"));
    assert!(run_summary["max_boundary_excess"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn bundled_scenarios_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e:#}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 4);
}
