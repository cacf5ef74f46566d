mod common;

use std::process::{Command, Output};

use common::{spec_path, CORPUS};
use serde_json::Value;

fn gsos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsos")).args(args).output().expect("binary runs")
}

fn spec(name: &str) -> String {
    spec_path(name).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn exit_codes_on_the_corpus() {
    assert_eq!(gsos(&["check", &spec("sequencing.gsos")]).status.code(), Some(0));
    let refuted = gsos(&["check", &spec("example53.gsos")]);
    assert_eq!(refuted.status.code(), Some(1));
    assert!(stdout(&refuted).contains("caveat: method incomplete; equation may still hold"));
    assert_eq!(gsos(&["check", "no/such/file.gsos"]).status.code(), Some(3));
    let all: Vec<String> = CORPUS.iter().map(|n| spec(n)).collect();
    let args: Vec<&str> = std::iter::once("check").chain(all.iter().map(String::as_str)).collect();
    assert_eq!(gsos(&args).status.code(), Some(1));
}

#[test]
fn inconclusive_when_the_budget_is_tiny() {
    let dir = std::env::temp_dir().join(format!("gsos-budget-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("deep.gsos");
    std::fs::write(&file, "acts a, b;\nprelude bccsp;\ncheck a.(b.(0)) = a.(plus(b.(0), b.(0)));\n").unwrap();
    let file = file.to_str().unwrap();
    assert_eq!(gsos(&["check", file]).status.code(), Some(0));
    let o = gsos(&["check", file, "--budget-pairs", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(stdout(&o).contains("reason:"));
    assert_eq!(gsos(&["check", file, "--budget-pairs", "0"]).status.code(), Some(3));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn parse_and_validation_errors_exit_3() {
    let dir = std::env::temp_dir().join(format!("gsos-e2e-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad_syntax = dir.join("bad.gsos");
    std::fs::write(&bad_syntax, "acts a;\nop f/1;\nrule |- f(x) -a-> ;\n").unwrap();
    let o = gsos(&["check", bad_syntax.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("3:19"));
    let invalid = dir.join("invalid.gsos");
    std::fs::write(&invalid, "acts a;\nop f/1;\nrule |- f(x) -b-> f(x);\ncheck f(x) = f(x);\n").unwrap();
    let o = gsos(&["check", invalid.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rule #1"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn structured_reports_are_deterministic() {
    let args = ["check", &spec("clock.gsos"), &spec("example53.gsos"), "--format", "structured", "--stability"];
    let first = gsos(&args);
    let second = gsos(&args);
    assert_eq!(first.stdout, second.stdout);
    let docs: Vec<Value> = stdout(&first).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(docs.len(), 5);
    for doc in &docs {
        for key in ["verdict", "relation", "evidence", "stability", "caveat"] {
            assert!(doc.get(key).is_some(), "{key} missing from {doc}");
        }
    }
    assert_eq!(docs[0]["verdict"], "proven");
    assert!(docs[0]["relation"]["pairs"].as_array().unwrap().len() >= 3);
    assert_eq!(docs[3]["verdict"], "refuted");
    assert_eq!(docs[3]["caveat"], "method incomplete; equation may still hold");
    assert_eq!(docs[3]["evidence"]["counterexample"]["assignment"].as_object().unwrap().len(), 1);
    assert_eq!(docs[3]["stability"]["stable"], false);
}

#[test]
fn ruloid_listings() {
    let o = gsos(&["ruloids", &spec("sequencing.gsos"), "L"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("6 ruloid(s)"), "{text}");
    assert!(text.contains("{x -a-> x'} |- seq(seq(x,y),z) -a-> seq(seq(x',y),z)"));

    let text = stdout(&gsos(&["ruloids", &spec("junk-context.gsos"), "K"]));
    assert!(text.contains("0 ruloid(s)") && text.contains("1 junk ruloid(s) removed"), "{text}");

    // one axiom and one movement ruloid per action, plus synchronization on c
    let text = stdout(&gsos(&["ruloids", &spec("clock.gsos"), "C"]));
    assert!(text.contains("8 ruloid(s)"), "{text}");

    assert_eq!(gsos(&["ruloids", &spec("clock.gsos"), "E"]).status.code(), Some(3));
}

#[test]
fn junk_reports() {
    let o = gsos(&["junk", &spec("triv.gsos")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("no closed terms exist"));
    let o = gsos(&["junk", &spec("sequencing.gsos")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("no junk rules"));
}

#[test]
fn lts_dumps() {
    let o = gsos(&["lts", &spec("clock.gsos"), "Omega"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("state")).count(), 1);
    let o = gsos(&["lts", &spec("bccsp.gsos"), "a.(b.(0))"]);
    assert_eq!(stdout(&o), "state 0 a.(b.(0))\nstate 1 b.(0)\nstate 2 0\ntrans 0 a 1\ntrans 1 b 2\n");
    assert_eq!(gsos(&["lts", &spec("triv.gsos"), "f(x)"]).status.code(), Some(3));
    let o = gsos(&["lts", &spec("bccsp.gsos"), "a.(b.(0))", "--budget-states", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("exceeded"));
}

#[test]
fn entail_command() {
    let f = spec("fg-extension.gsos");
    assert_eq!(gsos(&["entail", &f, "x -a->", "y -a->"]).status.code(), Some(0));
    let o = gsos(&["entail", &spec("fg-extension-nil.gsos"), "x -a->", "y -a->"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("falsifying assignment"));
    assert_eq!(gsos(&["entail", &f, "x -a", "true"]).status.code(), Some(3));
}

#[test]
fn mode_override() {
    let o = gsos(&["check", &spec("bccsp.gsos"), "--mode", "ruloids"]);
    assert_eq!(o.status.code(), Some(0));
    let o = gsos(&["check", &spec("example53.gsos"), "--mode", "closed"]);
    assert_eq!(o.status.code(), Some(3), "open terms cannot be checked in closed mode");
    let o = gsos(&["check", &spec("sequencing.gsos"), "--mode", "lts"]);
    assert_eq!(o.status.code(), Some(3));
}
