use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use ktest::cli::{run, EXIT_ACCEPTED, EXIT_ACTIVE, EXIT_ERROR, EXIT_REJECTED};

const BINDINGS: &str = r#"{
  "e1": {"kind": "Req", "payload": 1},
  "e2": {"kind": "Resp", "payload": {"id": 1}},
  "e3": {"kind": "Req", "payload": 3},
  "p": "P"
}"#;

struct Files {
    dir: tempfile::TempDir,
}

impl Files {
    fn new() -> Self {
        let f = Files { dir: tempfile::tempdir().unwrap() };
        f.write("bindings.json", BINDINGS);
        f
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn rec(seq: u64, kind: &str, payload: &str, dir: &str) -> String {
    format!(
        r#"{{"seq": {seq}, "event": {{"kind": "{kind}", "payload": {payload}}}, "port": "P", "direction": "{dir}"}}"#
    )
}

fn check(f: &Files, spec: &str, trace: &[String]) -> (i32, String, String) {
    f.write("spec.kt", spec);
    f.write("trace.jsonl", &(trace.join("\n") + "\n"));
    run_args(&["ktest", "check", "--spec", "S", "--bindings", "B", "--trace", "T"], f)
}

fn run_args(args: &[&str], f: &Files) -> (i32, String, String) {
    let map = |a: &&str| -> String {
        match *a {
            "S" => f.path("spec.kt").display().to_string(),
            "B" => f.path("bindings.json").display().to_string(),
            "T" => f.path("trace.jsonl").display().to_string(),
            other => other.to_string(),
        }
    };
    let args: Vec<String> = args.iter().map(map).collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(args, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

const SEQ: &str = "repeat 1 body expect e1@p:in expect e2@p:out end";

#[test]
fn accepts_matching_trace() {
    let f = Files::new();
    let (code, out, _) = check(&f, SEQ, &[rec(1, "Req", "1", "in"), rec(2, "Resp", r#"{"id": 1}"#, "out")]);
    assert_eq!(code, EXIT_ACCEPTED);
    assert_eq!(out.trim(), r#"{"accepted":true}"#);
}

#[test]
fn rejects_reordered_trace_at_offending_seq() {
    let f = Files::new();
    let (code, out, _) = check(&f, SEQ, &[rec(10, "Resp", r#"{"id": 1}"#, "out"), rec(11, "Req", "1", "in")]);
    assert_eq!(code, EXIT_REJECTED);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["accepted"], false);
    assert_eq!(v["failure"]["position"], 10);
    assert_eq!(v["failure"]["reason"], "unexpected");
    assert_eq!(v["failure"]["expected"], serde_json::json!(["Req(1)@P:in"]));
}

#[test]
fn short_trace_is_incomplete() {
    let f = Files::new();
    let (code, out, _) = check(&f, SEQ, &[rec(1, "Req", "1", "in")]);
    assert_eq!(code, EXIT_REJECTED);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["failure"]["position"], serde_json::Value::Null);
    assert_eq!(v["failure"]["reason"], "incomplete");
}

#[test]
fn disallowed_reason() {
    let f = Files::new();
    let spec = "repeat 1 disallow e3@p:in body expect e1@p:in end";
    let (code, out, _) = check(&f, spec, &[rec(4, "Req", "3", "in")]);
    assert_eq!(code, EXIT_REJECTED);
    assert!(out.contains(r#""reason":"disallowed""#), "{out}");
}

#[test]
fn active_constructs_exit_3() {
    let f = Files::new();
    let (code, _, err) = check(&f, "repeat 1 body trigger e1@p:in end", &[]);
    assert_eq!(code, EXIT_ACTIVE);
    assert!(err.contains("trigger"));
    let (code, _, _) = check(&f, "repeat 1 body inspect ok end", &[]);
    assert_eq!(code, EXIT_ACTIVE);
}

#[test]
fn errors_exit_2() {
    let f = Files::new();
    let (code, _, err) = check(&f, "repeat 1 body expect e1@p:sideways end", &[]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains("1:27"), "{err}");
    let (code, _, err) = check(&f, "repeat 1 body expect nope@p:in end", &[]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains("nope"));
    let (code, _, err) = check(&f, SEQ, &[rec(2, "Req", "1", "in"), rec(2, "Resp", "1", "out")]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains("line 2"), "{err}");
    let (code, _, err) = check(&f, SEQ, &["{not json".into()]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains("line 1"), "{err}");
    let (code, _, err) = check(&f, "repeat body end", &[]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains("root/body[0]"), "{err}");
    let (code, _, _) = run_args(&["ktest", "check", "--spec", "/nonexistent", "--bindings", "B", "--trace", "T"], &f);
    assert_eq!(code, EXIT_ERROR);
    let (code, _, _) = run_args(&["ktest", "check", "--spec"], &f);
    assert_eq!(code, EXIT_ERROR);
    let (code, out, _) = run_args(&["ktest", "--help"], &f);
    assert_eq!(code, EXIT_ACCEPTED);
    assert!(out.contains("check"));
}

#[test]
fn dot_is_byte_stable() {
    let f = Files::new();
    f.write("spec.kt", "repeat 1 body repeat body expect e1@p:in e2@p:out end end");
    let (c1, d1, _) = run_args(&["ktest", "dot", "--spec", "S", "--bindings", "B"], &f);
    let (c2, d2, _) = run_args(&["ktest", "dot", "--spec", "S", "--bindings", "B"], &f);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(d1, d2);
    assert!(d1.starts_with("digraph"));
    assert_eq!(d1.matches("ε").count(), 2, "{d1}");
    f.write("spec.kt", "repeat 1 body expect e1@p:in @ end");
    let (c, _, _) = run_args(&["ktest", "dot", "--spec", "S", "--bindings", "B"], &f);
    assert_eq!(c, EXIT_ERROR);
}

fn bin() -> &'static Path {
    Path::new(env!("CARGO_BIN_EXE_ktest"))
}

#[test]
fn binary_exit_codes() {
    let f = Files::new();
    let spec = f.write("spec.kt", SEQ);
    let trace = f.write("trace.jsonl", &[rec(1, "Req", "1", "in"), rec(2, "Resp", r#"{"id":1}"#, "out")].join("\n"));
    let status = |spec: &Path| {
        Command::new(bin())
            .args(["check", "--spec"])
            .arg(spec)
            .arg("--bindings")
            .arg(f.path("bindings.json"))
            .arg("--trace")
            .arg(&trace)
            .output()
            .unwrap()
    };
    let ok = status(&spec);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&ok.stdout).trim(), r#"{"accepted":true}"#);
    let rev = f.write("rev.kt", "repeat 1 body expect e2@p:out expect e1@p:in end");
    assert_eq!(status(&rev).status.code(), Some(1));
    let act = f.write("act.kt", "repeat 1 body trigger e1@p:in end");
    assert_eq!(status(&act).status.code(), Some(3));
    let bad = f.write("bad.kt", "repeat 1 body expect");
    let out = status(&bad);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}
