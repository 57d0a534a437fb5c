use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use toda::job::JobConfig;

const INSERTIONS: &str = r#"[{"z":[0.5,0.0],"alpha":{"basis":"root","coords":[1.2]}},
    {"z":[-0.45,0.4],"alpha":{"basis":"root","coords":[1.2]}},
    {"z":[0.2,-0.6],"alpha":{"basis":"root","coords":[1.2]}}]"#;

fn job(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(format!("{name}.json"));
    std::fs::write(&p, body).unwrap();
    p
}

fn toda(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toda")).args(args).output().unwrap()
}

fn correlate_body(extra: &str) -> String {
    format!(r#"{{"task":"correlate","algebra":"A1","gamma":0.8,"insertions":{INSERTIONS},"grid_n":256,"replicas":200,"seed":4{extra}}}"#)
}

fn without_timing(text: &[u8]) -> Value {
    let mut v: Value = serde_json::from_slice(text).unwrap();
    v.as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = job(dir.path(), "ok", r#"{"task":"algebra-info","algebra":"D4"}"#);
    assert_eq!(toda(&["--config", ok.to_str().unwrap()]).status.code(), Some(0));

    let rejected = job(
        dir.path(),
        "rejected",
        r#"{"task":"seiberg","algebra":"A1","gamma":1.0,
            "insertions":[{"z":[0,0],"alpha":{"basis":"root","coords":[1.0]}},
                          {"z":[1,0],"alpha":{"basis":"root","coords":[1.0]}},
                          {"z":[0,1],"alpha":{"basis":"root","coords":[1.0]}}]}"#,
    );
    let out = toda(&["--config", rejected.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["result"]["seiberg"]["pass"], Value::Bool(false));

    let missing = dir.path().join("missing.json");
    let out = toda(&["--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("io error"));
}

#[test]
fn diagnostics_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("malformed", "{not json".to_string(), "malformed job JSON"),
        ("unknown", r#"{"task":"algebra-info","algebra":"A2","colour":1}"#.to_string(), "unknown field"),
        ("algebra", r#"{"task":"algebra-info","algebra":"B3"}"#.to_string(), "B3"),
        ("range", correlate_body(r#","grid_n":16"#).replacen(r#""grid_n":256,"#, "", 1), "range violation"),
    ];
    let mut seen = Vec::new();
    for (name, body, needle) in cases {
        let p = job(dir.path(), name, &body);
        let out = toda(&["--config", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1), "{name}");
        let err = String::from_utf8_lossy(&out.stderr).into_owned();
        assert!(err.contains(needle), "{name}: {err}");
        assert!(!seen.contains(&err), "{name} repeats an earlier diagnostic");
        seen.push(err);
    }
}

#[test]
fn reruns_agree_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let p = job(dir.path(), "corr", &correlate_body(""));
    let path = p.to_str().unwrap();
    let a = toda(&["--config", path]);
    let b = toda(&["--config", path, "--workers", "3"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(without_timing(&a.stdout), without_timing(&b.stdout));
    let c = without_timing(&toda(&["--config", path, "--seed", "5"]).stdout);
    assert_eq!(c["config"]["seed"], 5);
    assert_ne!(c["result"]["value"], without_timing(&a.stdout)["result"]["value"]);
}

#[test]
fn embedded_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("result.json");
    let p = job(dir.path(), "corr", &correlate_body(""));
    let out = toda(&["--config", p.to_str().unwrap(), "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let embedded = JobConfig::from_json(&doc["config"].to_string()).unwrap();
    let original = JobConfig::from_json(&correlate_body("")).unwrap();
    assert_eq!(embedded, original);
    assert_eq!(doc["task"], "correlate");
    assert!(doc["versions"]["format"].is_number());
}

#[test]
fn trace_csv_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("mass.csv");
    let extra = format!(r#","trace_csv":{}"#, Value::String(csv.display().to_string()));
    let p = job(dir.path(), "traced", &correlate_body(&extra));
    assert!(toda(&["--config", p.to_str().unwrap()]).status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 201);
}

/// Checks required keys, closed objects, local `$ref`, `items` and `anyOf`.
fn conforms(schema: &Value, root: &Value, v: &Value) -> Result<(), String> {
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        return match r.strip_prefix("#/$defs/") {
            Some(name) => conforms(&root["$defs"][name], root, v),
            None => Ok(()),
        };
    }
    if let Some(alts) = schema.get("anyOf").and_then(Value::as_array) {
        return alts.iter().find_map(|s| conforms(s, root, v).ok()).ok_or_else(|| format!("no alternative matches {v}"));
    }
    if let Some(obj) = v.as_object() {
        let props = schema.get("properties").and_then(Value::as_object);
        for key in schema.get("required").and_then(Value::as_array).into_iter().flatten() {
            if !obj.contains_key(key.as_str().unwrap()) {
                return Err(format!("missing {key}"));
            }
        }
        for (k, x) in obj {
            match props.and_then(|p| p.get(k)) {
                Some(s) => conforms(s, root, x).map_err(|e| format!("{k}: {e}"))?,
                None if schema.get("additionalProperties") == Some(&Value::Bool(false)) => {
                    return Err(format!("unexpected key {k}"))
                }
                None => {}
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), v.as_array()) {
        for x in arr {
            conforms(items, root, x)?;
        }
    }
    Ok(())
}

#[test]
fn results_match_the_shipped_schema() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("result.schema.json")).unwrap()).unwrap();
    let job_schema: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("job.schema.json")).unwrap()).unwrap();
    let tasks: Vec<&str> = job_schema["properties"]["task"]["enum"].as_array().unwrap().iter().map(|t| t.as_str().unwrap()).collect();
    let common = format!(r#""algebra":"A1","gamma":0.8,"insertions":{INSERTIONS},"grid_n":256,"replicas":50,"seed":2"#);
    let bodies = [
        r#"{"task":"algebra-info","algebra":"A2"}"#.to_string(),
        format!(r#"{{"task":"seiberg",{common}}}"#),
        correlate_body(""),
        format!(r#"{{"task":"covariance-test",{common},"mobius":"0,1,1,0"}}"#),
        format!(r#"{{"task":"weyl-test",{common},"phi":{{"kind":"constant","c":0.2}}}}"#),
        format!(r#"{{"task":"gmc-stats",{common}}}"#),
        r#"{"task":"verify","algebra":"A1","replicas":100}"#.to_string(),
    ];
    let tmp = tempfile::tempdir().unwrap();
    for (k, body) in bodies.iter().enumerate() {
        let out = toda(&["--config", job(tmp.path(), &format!("j{k}"), body).to_str().unwrap()]);
        let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(doc["task"], tasks[k]);
        let branch = schema["allOf"]
            .as_array()
            .unwrap()
            .iter()
            .find(|b| b["if"]["properties"]["task"]["const"] == tasks[k])
            .unwrap();
        conforms(&schema, &schema, &doc).unwrap();
        conforms(&branch["then"]["properties"]["result"], &schema, &doc["result"]).unwrap_or_else(|e| panic!("{}: {e}", tasks[k]));
    }
}
