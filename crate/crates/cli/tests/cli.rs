use std::path::{Path, PathBuf};
use std::process::Command;

use dualpair_cli::report::{self, Overrides};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dualpair"))
}

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn scenario_names() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(scenario_dir())
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension()? == "json").then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    names.sort();
    names
}

fn report_value(name: &str) -> Value {
    let text = std::fs::read_to_string(scenario_dir().join(format!("{name}.json"))).unwrap();
    let r = report::run_text(&text, &Overrides::default()).unwrap();
    let mut v: Value = serde_json::from_str(&report::to_json(&r)).unwrap();
    v["provenance"].as_object_mut().unwrap().remove("wall_time_seconds");
    v
}

/// Structural equality; numbers agree to a relative 1e-9.
fn compare(path: &str, got: &Value, want: &Value, errors: &mut Vec<String>) {
    match (got, want) {
        (Value::Object(a), Value::Object(b)) => {
            let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
            keys.sort();
            keys.dedup();
            for k in keys {
                match (a.get(k), b.get(k)) {
                    (Some(x), Some(y)) => compare(&format!("{path}.{k}"), x, y, errors),
                    _ => errors.push(format!("{path}.{k}: present on one side only")),
                }
            }
        }
        (Value::Array(a), Value::Array(b)) => {
            if a.len() != b.len() {
                errors.push(format!("{path}: length {} vs {}", a.len(), b.len()));
            } else {
                for (i, (x, y)) in a.iter().zip(b).enumerate() {
                    compare(&format!("{path}[{i}]"), x, y, errors);
                }
            }
        }
        (Value::Number(a), Value::Number(b)) => {
            let (x, y) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            if (x - y).abs() > 1e-9 * x.abs().max(y.abs()).max(1e-300) && x != y {
                errors.push(format!("{path}: {x} vs {y}"));
            }
        }
        _ if got == want => {}
        _ => errors.push(format!("{path}: {got} vs {want}")),
    }
}

#[test]
fn builtin_scenarios_match_their_golden_reports() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let names = scenario_names();
    assert_eq!(names.len(), 6);
    for name in names {
        let got = report_value(&name);
        let path = golden_dir().join(format!("{name}.json"));
        if update {
            std::fs::create_dir_all(golden_dir()).unwrap();
            std::fs::write(&path, serde_json::to_string_pretty(&got).unwrap() + "\n").unwrap();
            continue;
        }
        let want: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let mut errors = Vec::new();
        compare("", &got, &want, &mut errors);
        assert!(errors.is_empty(), "{name}:\n{}", errors.join("\n"));
    }
}

#[test]
fn reruns_are_bitwise_identical() {
    for name in ["t2-rotation", "so3-coadjoint", "t4-example-7-8"] {
        assert_eq!(report_value(name), report_value(name), "{name}");
    }
}

#[test]
fn exit_code_is_two_when_a_verdict_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("run")
        .arg(scenario_dir().join("t4-example-7-8.json"))
        .arg("--out")
        .arg(dir.path().join("t4.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("t4.json")).unwrap()).unwrap();
    assert_eq!(v["exit_code"], 2);
    let vn = v["results"].as_array().unwrap().iter().find(|r| r["command"] == "von-neumann").unwrap();
    assert_eq!(vn["verdict"], "FAIL");
}

#[test]
fn so3_suite_passes_and_conserves_the_casimir() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("so3.json");
    std::fs::write(
        &scenario,
        r#"{"schema": 1, "space": {"builtin": "so3-coadjoint"},
            "commands": [{"kind": "von-neumann"}, {"kind": "leaf"}],
            "numeric": {"samples": 5, "words": {"max_len": 6, "max_duration": 1.0, "words": 100}}}"#,
    )
    .unwrap();
    let out = bin().arg("run").arg(&scenario).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let results = v["results"].as_array().unwrap();
    assert!(results.iter().all(|r| r["verdict"] == "PASS"), "{results:?}");
    let residual = results[1]["result"]["casimirs"][0]["residual"].as_f64().unwrap();
    assert!(residual < 1e-6, "{residual:e}");
}

#[test]
fn malformed_scenarios_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for (i, text) in [
        "{not json",
        r#"{"schema": 1, "space": {"builtin": "nowhere"}, "commands": [{"kind": "howe"}]}"#,
        r#"{"schema": 1, "space": {"builtin": "t2-rotation"}, "commands": [{"kind": "howe", "smaples": 2}]}"#,
    ]
    .iter()
    .enumerate()
    {
        let p = dir.path().join(format!("bad{i}.json"));
        std::fs::write(&p, text).unwrap();
        let out = bin().arg("run").arg(&p).output().unwrap();
        assert_eq!(out.status.code(), Some(1), "{text}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    }
    let out = bin().arg("run").arg(dir.path().join("missing.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_and_degree_overrides_reach_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("nested/report.json");
    let status = bin()
        .arg("run")
        .arg(scenario_dir().join("t2-rotation.json"))
        .args(["--seed", "11", "--degree", "3", "--out"])
        .arg(&out_path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["provenance"]["seed"], 11);
    assert_eq!(v["provenance"]["degree"], 3);
    assert_eq!(v["scenario"]["numeric"]["seed"], 11);
    assert_eq!(v["scenario"]["output"]["report"], out_path.to_string_lossy().as_ref());
    let golden = report_value("t2-rotation");
    assert_ne!(v["results"][0]["result"], golden["results"][0]["result"]);
}

#[test]
fn list_is_alphabetical_and_names_the_forms() {
    let out = bin().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = text.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    for n in ["t2-rotation", "so3-coadjoint", "t4-example-7-8"] {
        assert!(names.contains(&n), "{n}");
    }
    let t4 = text.lines().find(|l| l.starts_with("t4-example-7-8")).unwrap();
    assert!(t4.contains("ω := dθ1 ∧ dθ2 + √2 dψ1 ∧ dψ2"), "{t4}");
}

#[test]
fn leaf_clouds_are_exported_as_csv() {
    let dir = tempfile::tempdir().unwrap();
    let clouds = dir.path().join("clouds");
    let scenario = dir.path().join("leaf.json");
    std::fs::write(
        &scenario,
        format!(
            r#"{{"schema": 1, "space": {{"builtin": "so3-coadjoint"}},
                "commands": [{{"kind": "howe", "samples": 2}}, {{"kind": "leaf"}}],
                "numeric": {{"words": {{"max_len": 3, "max_duration": 0.5, "words": 20}}}},
                "output": {{"clouds": {:?}}}}}"#,
            clouds.to_string_lossy()
        ),
    )
    .unwrap();
    let out = bin().arg("run").arg(&scenario).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(clouds.join("01-leaf.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header.len(), 4);
    assert_eq!(header.last().unwrap(), "word_index");
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert!(rows.len() > 20);
    for r in &rows {
        let mu: Vec<f64> = (0..3).map(|i| r[i].parse().unwrap()).collect();
        let c: f64 = mu.iter().map(|x| x * x).sum();
        let c0: f64 = {
            let first = &rows[0];
            (0..3).map(|i| first[i].parse::<f64>().unwrap().powi(2)).sum()
        };
        assert!((c - c0).abs() < 1e-6);
    }
}
