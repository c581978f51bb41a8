//! The `objsearch` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

fn objsearch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_objsearch"))
        .args(args)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn search_is_deterministic_and_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    let args = ["search", "--scene", "flat", "--target", "orange", "--seed", "7"];
    let a = objsearch(&args);
    let b = objsearch(&[&args[..], &["--out", trace.to_str().unwrap()]].concat());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("found      kitchen.fridge inside"));
    let text = std::fs::read_to_string(&trace).unwrap();
    let parsed = objsearch::search::Trace::read_jsonl(text.as_bytes()).unwrap();
    assert!(parsed.found());
    assert_eq!(parsed.header.config.seed, 7);
}

#[test]
fn failures_map_to_exit_codes() {
    let cases: [(&[&str], i32, &str); 5] = [
        (&["search", "--scene", "flat", "--strategy", "greedy"], 2, ""),
        (&["search", "--scene", "flat", "--weights", "1,1,1", "--target", "orange"], 2, ""),
        (&["validate", "--scene", "no/such/scene.json"], 3, "error[scene]"),
        (&["search", "--scene", "flat", "--target", "orange", "--noise", "1.5"], 4, "error[config]"),
        (&["plan", "--scene", "flat", "--carrier", "kitchen.nothing", "--feature", "top"], 1, "error[error]"),
    ];
    for (args, code, prefix) in cases {
        let o = objsearch(args);
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(o.status.code(), Some(code), "{args:?}: {err}");
        assert!(err.starts_with(prefix), "{args:?}: {err}");
    }
}

#[test]
fn validate_accepts_shipped_and_generated_scenes() {
    for scene in ["flat", "fixtures/flat.json", "gen:3"] {
        let o = objsearch(&["validate", "--scene", scene]);
        assert!(o.status.success(), "{scene}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains(": ok ("), "{scene}: {}", stdout(&o));
    }
}

#[test]
fn plan_prints_a_pose_plan() {
    let o = objsearch(&["plan", "--scene", "flat", "--carrier", "living.coffee_table", "--feature", "top"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let plan: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(plan["carrier"], "living.coffee_table");
    assert!(!plan["plan"]["entries"].as_array().unwrap().is_empty());
}

#[test]
fn bench_smoke_report_verifies_from_both_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = objsearch(&["bench", "--suite", "smoke", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for file in ["report.json", "rows.csv"] {
        let path = Path::new(out).join(file);
        assert!(path.exists());
        let r = objsearch(&["report", path.to_str().unwrap()]);
        assert!(r.status.success(), "{file}: {}", String::from_utf8_lossy(&r.stderr));
        let text = stdout(&r);
        for group in ["godhs", "coverage", "random"] {
            assert!(text.contains(group), "{file}: {text}");
        }
    }
    let report = Path::new(out).join("report.json");
    let mut json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let osr = &mut json["aggregates"][0]["osr"]["mean"];
    *osr = serde_json::json!(osr.as_f64().unwrap() + 1.0);
    std::fs::write(&report, json.to_string()).unwrap();
    let r = objsearch(&["report", report.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(7), "{}", String::from_utf8_lossy(&r.stderr));
}
