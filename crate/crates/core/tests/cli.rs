use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

const ABS_ON_INTERVAL: &str = r#"{
  "version": "1",
  "problem": {
    "objective": {"g": {"maxaffine": [[1, 0], [-1, 0]]}, "h": {"maxaffine": [[0, 0]]}},
    "constraint": {"set": {"phi": [{"maxaffine": [[1, 0]]}], "c": {"vrep": [[1], [3]]}, "z0": [2]}}
  },
  "options": {"grid": {"lo": [0], "hi": [4], "points_per_dim": 201}}
}"#;

// the same problem with `x - 1 >= 0` and `3 - x >= 0` on the orthant
const CONE: &str = r#"{
  "version": "1",
  "problem": {
    "objective": {"g": {"maxaffine": [[1, 0], [-1, 0]]}, "h": {"maxaffine": [[0, 0]]}},
    "constraint": {"cone": {
      "phi": [{"maxaffine": [[-1, 1]]}, {"maxaffine": [[1, -3]]}],
      "generators": [[1, 0], [0, 1]]
    }}
  }
}"#;

const SIP: &str = r#"{
  "version": "1",
  "sip": {
    "objective": {"g": {"maxaffine": [[-1, 0]]}, "h": {"maxaffine": [[0, 0]]}},
    "index_points": [1, 2, 3],
    "phi_t": [
      {"g": {"maxaffine": [[1, -1]]}, "h": {"maxaffine": [[0, 0]]}},
      {"g": {"maxaffine": [[1, -2]]}, "h": {"maxaffine": [[0, 0]]}},
      {"g": {"maxaffine": [[1, -3]]}, "h": {"maxaffine": [[0, 0]]}}
    ],
    "region": {"hrep": {"A": [[1], [-1]], "b": [5, 5]}}
  }
}"#;

struct Dir(PathBuf);

impl Dir {
    fn new(tag: &str) -> Dir {
        let d = std::env::temp_dir().join(format!("dccert-cli-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&d).unwrap();
        Dir(d)
    }

    fn file(&self, name: &str, text: &str) -> String {
        let p = self.0.join(name);
        std::fs::write(&p, text).unwrap();
        p.to_string_lossy().into_owned()
    }

    fn path(&self, name: &str) -> String {
        self.0.join(name).to_string_lossy().into_owned()
    }
}

impl Drop for Dir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dccert")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn check_global_holds_at_the_optimum() {
    let d = Dir::new("holds");
    let p = d.file("p.json", ABS_ON_INTERVAL);
    let o = run(&["check-global", &p, "--point", "1.0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict: Holds"));
}

#[test]
fn fails_is_a_verdict_not_an_error() {
    let d = Dir::new("fails");
    let p = d.file("p.json", ABS_ON_INTERVAL);
    let o = run(&["check-global", &p, "--point", "2.0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("verdict: Fails"));
}

#[test]
fn malformed_file_names_the_field() {
    let d = Dir::new("malformed");
    let bad = ABS_ON_INTERVAL.replace(r#""h": {"maxaffine": [[0, 0]]}"#, r#""hh": {"maxaffine": [[0, 0]]}"#);
    let p = d.file("p.json", &bad);
    let o = run(&["check-global", &p, "--point", "1.0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("hh"), "{}", stderr(&o));

    let bad = ABS_ON_INTERVAL.replace("[[1, 0], [-1, 0]]", "[[1, 0], [-1]]");
    let p = d.file("q.json", &bad);
    let o = run(&["check-global", &p, "--point", "1.0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("problem.objective.g"), "{}", stderr(&o));
}

#[test]
fn input_errors_exit_2() {
    let d = Dir::new("input");
    let p = d.file("p.json", ABS_ON_INTERVAL);
    assert_eq!(run(&["check-global", &p, "--point", "1.0,2.0"]).status.code(), Some(2));
    assert_eq!(run(&["check-global", &d.path("missing.json"), "--point", "1"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["sip", &p, "--point", "1"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn infeasible_point_is_an_input_error() {
    let d = Dir::new("infeasible");
    let p = d.file("p.json", ABS_ON_INTERVAL);
    let o = run(&["check-global", &p, "--point", "0.0"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

fn without_timings(text: &str) -> Value {
    let mut v: Value = serde_json::from_str(text).unwrap();
    v.as_object_mut().unwrap().remove("timings");
    v
}

#[test]
fn reports_are_deterministic() {
    let d = Dir::new("determinism");
    let p = d.file("p.json", ABS_ON_INTERVAL);
    for cmd in ["check-global", "check-local", "check-sufficient", "validate"] {
        let (a, b) = (d.path("a.json"), d.path("b.json"));
        assert_eq!(run(&[cmd, &p, "--point", "1", "--out", &a, "--seed", "7"]).status.code(), Some(0));
        assert_eq!(run(&[cmd, &p, "--point", "1", "--out", &b, "--seed", "7", "--threads", "3"]).status.code(), Some(0));
        let (ta, tb) = (std::fs::read_to_string(&a).unwrap(), std::fs::read_to_string(&b).unwrap());
        assert_eq!(without_timings(&ta), without_timings(&tb), "{cmd}");
        let strip = |t: &str| t.lines().filter(|l| !l.contains("total_ms")).collect::<Vec<_>>().join("\n");
        assert_eq!(strip(&ta), strip(&tb), "{cmd}");
    }
}

#[test]
fn report_schema() {
    let d = Dir::new("schema");
    let p = d.file("p.json", ABS_ON_INTERVAL);
    let out = d.path("r.json");
    assert_eq!(run(&["check-global", &p, "--point", "1", "--out", &out]).status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for key in ["tool", "version", "command", "input_sha256", "settings", "verdict", "result", "assumptions", "timings"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["verdict"], "Holds");
    assert_eq!(v["input_sha256"].as_str().unwrap().len(), 64);
    // numbers are written as decimal strings
    assert!(v["settings"]["tol"].is_string());
    let statuses: Vec<&str> = v["assumptions"].as_array().unwrap().iter().map(|a| a["status"].as_str().unwrap()).collect();
    assert!(statuses.iter().all(|s| ["verified", "assumed"].contains(s)), "{statuses:?}");
}

#[test]
fn other_subcommands() {
    let d = Dir::new("others");
    let p = d.file("p.json", ABS_ON_INTERVAL);
    let o = run(&["check-local", &p, "--point", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("verdict: MultipliersFound"));
    let o = run(&["check-sufficient", &p, "--point", "1"]);
    assert!(stdout(&o).contains("verdict: LocalMin"), "{}", stdout(&o));
    let o = run(&["check-cone", &p, "--point", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cone"));
    let c = d.file("cone.json", CONE);
    let o = run(&["check-cone", &c, "--point", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict: Holds") && stdout(&o).contains("local: MultipliersFound"), "{}", stdout(&o));
    let o = run(&["validate", &p, "--point", "1"]);
    assert!(stdout(&o).contains("verdict: Pass"), "{}", stdout(&o));

    let s = d.file("sip.json", SIP);
    let o = run(&["sip", &s, "--point", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict: Multiplier"), "{}", stdout(&o));
}

#[test]
fn csv_outputs_have_headers() {
    let d = Dir::new("csv");
    let p = d.file("p.json", ABS_ON_INTERVAL);
    let t = d.path("trace.csv");
    assert_eq!(run(&["solve", &p, "--point", "3", "--csv", &t]).status.code(), Some(0));
    let text = std::fs::read_to_string(&t).unwrap();
    assert!(text.starts_with("iter,merit,objective,x0\n"));
    assert!(!text.contains("-0,"));
    let last = text.lines().last().unwrap();
    let x: f64 = last.rsplit(',').next().unwrap().parse().unwrap();
    assert!((x - 1.0).abs() < 1e-6);

    let o = d.path("oracle.csv");
    assert_eq!(run(&["oracle", &p, "--csv", &o]).status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&o).unwrap(), "value,x0\n1,1\n");

    // check-global has no CSV output
    assert_eq!(run(&["check-global", &p, "--point", "1", "--csv", &t]).status.code(), Some(2));
}

#[test]
fn oracle_without_grid_needs_a_region() {
    let d = Dir::new("grid");
    let text = ABS_ON_INTERVAL.replace(r#""grid": {"lo": [0], "hi": [4], "points_per_dim": 201}"#, "");
    let p = d.file("p.json", &text);
    assert_eq!(run(&["oracle", &p]).status.code(), Some(2));
}

#[test]
fn thread_count_from_environment() {
    let d = Dir::new("threads");
    let p = d.file("p.json", ABS_ON_INTERVAL);
    let o = Command::new(env!("CARGO_BIN_EXE_dccert"))
        .args(["check-global", &p, "--point", "1"])
        .env("DCCERT_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_dccert"))
        .args(["check-global", &p, "--point", "1"])
        .env("DCCERT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
