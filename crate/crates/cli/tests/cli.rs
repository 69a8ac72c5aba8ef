use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use formatsel_core::fixtures::{expected_cost_choices, expected_rule_choices};
use formatsel_cli::render::sig6;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn workflow() -> String {
    fixtures().join("tpcds_workflow.json").display().to_string()
}

fn catalog() -> String {
    fixtures().join("tpcds_catalog.json").display().to_string()
}

fn formatsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_formatsel"))
        .args(args)
        .env_remove("FORMATSEL_CONFIG")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert_eq!(code(o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn decisions(v: &Value) -> Vec<(String, String, String)> {
    let mut d: Vec<_> = v["decisions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| {
            (
                d["node"].as_str().unwrap().to_string(),
                d["format"].as_str().unwrap().to_string(),
                d["decided_by"].as_str().unwrap().to_string(),
            )
        })
        .collect();
    d.sort();
    d
}

#[test]
fn seqfile_size_matches_reference_writer() {
    let v = json(&formatsel(&[
        "estimate-size", "--format", "seqfile", "--rows", "40", "--cols", "4", "--col-size", "10",
        "--oracle", "-o", "json",
    ]));
    assert_eq!(v["estimated"]["total"], 2046.0);
    assert_eq!(v["oracle"]["reference"]["total"], 2046.0);
    assert_eq!(v["oracle"]["error_pct"], 0.0);
}

#[test]
fn empty_avro_file_is_header_only() {
    let v = json(&formatsel(&[
        "estimate-size", "--format", "avro", "--rows", "0", "--cols", "10", "--col-size", "10", "-o", "json",
    ]));
    assert_eq!(v["estimated"]["total"], 325.0);
    assert_eq!(v["estimated"]["body"], 0.0);
}

#[test]
fn oracle_dump_writes_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("dump");
    let v = json(&formatsel(&[
        "estimate-size", "--format", "parquet", "--rows", "500", "--cols", "3", "--col-size", "6",
        "--varlen-cols", "1", "--dump", d.to_str().unwrap(), "-o", "json",
    ]));
    let reference = v["oracle"]["reference"]["total"].as_f64().unwrap();
    let on_disk: u64 = std::fs::read_dir(&d)
        .unwrap()
        .map(|e| e.unwrap().metadata().unwrap().len())
        .sum();
    assert_eq!(on_disk as f64, reference);
    assert!(v["oracle"]["error_pct"].as_f64().unwrap().abs() <= 5.0);
}

#[test]
fn size_input_errors() {
    let unknown = formatsel(&["estimate-size", "--format", "orc", "--rows", "1", "--cols", "1", "--col-size", "1"]);
    assert_eq!(code(&unknown), 3);
    let bad = formatsel(&["estimate-size", "--format", "avro", "--rows", "1", "--cols", "0", "--col-size", "1"]);
    assert_eq!(code(&bad), 2);
    let missing = formatsel(&["estimate-size", "--format", "avro"]);
    assert_eq!(code(&missing), 2);
    let partial = formatsel(&["estimate-size", "--format", "avro", "--rows", "10"]);
    assert_eq!(code(&partial), 2);
    let fractional = formatsel(&[
        "estimate-size", "--format", "avro", "--rows", "10", "--cols", "2", "--col-size", "2.5", "--oracle",
    ]);
    assert_eq!(code(&fractional), 2);
    let usage = formatsel(&["estimate-size"]);
    assert_eq!(code(&usage), 2);
}

#[test]
fn choose_with_statistics_gives_cost_decisions() {
    let v = json(&formatsel(&["choose", "--workflow", &workflow(), "--catalog", &catalog(), "-o", "json"]));
    let got = decisions(&v);
    let want: Vec<_> = expected_cost_choices()
        .iter()
        .map(|(n, f)| (n.to_string(), f.to_string(), "cost".to_string()))
        .collect();
    assert_eq!(got, want);
    let avro = got.iter().filter(|d| d.1 == "avro").count();
    assert_eq!((avro, got.len() - avro), (7, 2));
}

#[test]
fn choose_without_statistics_gives_rule_decisions() {
    let v = json(&formatsel(&["choose", "--workflow", &workflow(), "-o", "json"]));
    let want: Vec<_> = expected_rule_choices()
        .iter()
        .map(|(n, f)| (n.to_string(), f.to_string(), "rule".to_string()))
        .collect();
    assert_eq!(decisions(&v), want);

    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, r#"{"schema_version": 1, "version": 0, "entries": {}}"#).unwrap();
    let v = json(&formatsel(&["choose", "--workflow", &workflow(), "--catalog", empty.to_str().unwrap(), "-o", "json"]));
    assert_eq!(decisions(&v), want);
}

#[test]
fn candidates_restrict_decisions() {
    let v = json(&formatsel(&[
        "choose", "--workflow", &workflow(), "--catalog", &catalog(), "--candidates", "seqfile,avro", "-o", "json",
    ]));
    for d in decisions(&v) {
        assert!(d.1 == "seqfile" || d.1 == "avro", "{d:?}");
    }
    for d in v["decisions"].as_array().unwrap() {
        assert_eq!(d["candidates"].as_array().unwrap().len(), 2);
    }
    let unknown = formatsel(&["choose", "--workflow", &workflow(), "--candidates", "orc"]);
    assert_eq!(code(&unknown), 3);
}

#[test]
fn forced_modes() {
    let v = json(&formatsel(&[
        "choose", "--workflow", &workflow(), "--catalog", &catalog(), "--mode", "rule", "-o", "json",
    ]));
    assert!(decisions(&v).iter().all(|d| d.2 == "rule"));
    let cold = formatsel(&["choose", "--workflow", &workflow(), "--mode", "cost"]);
    assert_eq!(code(&cold), 2);
    let conservative = json(&formatsel(&[
        "choose", "--workflow", &workflow(), "--restore", "conservative", "-o", "json",
    ]));
    let nodes: Vec<_> = decisions(&conservative).into_iter().map(|d| d.0).collect();
    assert_eq!(nodes, ["N4", "N6", "N7"]);
}

#[test]
fn choose_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let newer = dir.path().join("newer.json");
    std::fs::write(&newer, r#"{"schema_version": 99, "version": 0, "entries": {}}"#).unwrap();
    let o = formatsel(&["choose", "--workflow", &workflow(), "--catalog", newer.to_str().unwrap()]);
    assert_eq!(code(&o), 4);

    let cyclic = dir.path().join("cyclic.json");
    std::fs::write(
        &cyclic,
        r#"{"nodes": [{"id": "a", "kind": "LOAD"}, {"id": "b", "kind": "JOIN"}, {"id": "c", "kind": "FILTER", "sf": 0.1}],
            "edges": [{"from": "a", "to": "b"}, {"from": "b", "to": "c"}, {"from": "c", "to": "b"}]}"#,
    )
    .unwrap();
    assert_eq!(code(&formatsel(&["choose", "--workflow", cyclic.to_str().unwrap()])), 2);

    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(code(&formatsel(&["choose", "--workflow", garbage.to_str().unwrap()])), 2);
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&formatsel(&["choose", "--workflow", missing.to_str().unwrap()])), 2);
}

const SMALL_WORKFLOW: &str = r#"{
  "nodes": [
    {"id": "src", "kind": "LOAD", "source": "orders"},
    {"id": "j", "kind": "FILTER", "sf": 0.2,
     "stats": {"row_count": 5000000, "avg_row_size": 120.0, "avg_col_size": 10.0, "col_count": 12, "varlen_col_count": 4}},
    {"id": "p", "kind": "FOREACH", "ref_cols": 2},
    {"id": "q", "kind": "FOREACH", "ref_cols": 3},
    {"id": "out1", "kind": "STORE"},
    {"id": "out2", "kind": "STORE"}
  ],
  "edges": [
    {"from": "src", "to": "j"}, {"from": "j", "to": "p"}, {"from": "j", "to": "q"},
    {"from": "p", "to": "out1"}, {"from": "q", "to": "out2"}
  ]
}"#;

#[test]
fn record_then_reuse_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let wf = dir.path().join("wf.json");
    std::fs::write(&wf, SMALL_WORKFLOW).unwrap();
    let cat = dir.path().join("cat.json");
    let (wf, cat) = (wf.to_str().unwrap(), cat.to_str().unwrap());

    let first = json(&formatsel(&["choose", "--workflow", wf, "--catalog", cat, "--record", "-o", "json"]));
    assert_eq!(first["recorded"], 1);
    let loaded = json(&formatsel(&["catalog", "load", "--catalog", cat, "-o", "json"]));
    assert_eq!((loaded["entries"].as_u64(), loaded["complete"].as_u64()), (Some(1), Some(1)));

    let entries = json(&formatsel(&["catalog", "inspect", "--catalog", cat, "--workflow", wf, "-o", "json"]));
    assert_eq!(entries[0]["node"], "j");
    assert_eq!(entries[0]["operations"], serde_json::json!(["project(2)", "project(3)"]));
    let by_node = json(&formatsel(&[
        "catalog", "inspect", "--catalog", cat, "--workflow", wf, "--node", "j", "-o", "json",
    ]));
    assert_eq!(by_node, entries);
    let fp = entries[0]["fingerprint"].as_str().unwrap();
    let by_prefix = json(&formatsel(&["catalog", "inspect", "--catalog", cat, "--fingerprint", &fp[..10], "-o", "json"]));
    assert_eq!(by_prefix[0]["fingerprint"], fp);

    let unknown = formatsel(&["catalog", "inspect", "--catalog", cat, "--fingerprint", "ffff0000"]);
    assert_eq!(code(&unknown), 3);
    let unknown_node = formatsel(&["catalog", "inspect", "--catalog", cat, "--workflow", wf, "--node", "zz"]);
    assert_eq!(code(&unknown_node), 3);

    let again = json(&formatsel(&["catalog", "save", "--workflow", wf, "--catalog", cat, "-o", "json"]));
    assert_eq!((again["version"].as_u64(), again["entries"].as_u64()), (Some(2), Some(1)));
}

#[test]
fn catalog_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(code(&formatsel(&["catalog", "load", "--catalog", missing.to_str().unwrap()])), 2);
    let old = dir.path().join("old.json");
    std::fs::write(&old, r#"{"version": 3, "entries": {}}"#).unwrap();
    assert_eq!(code(&formatsel(&["catalog", "load", "--catalog", old.to_str().unwrap()])), 4);
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"schema_version": 1, "version": 1, "entries": {"abc": {"data": {"row_count": 10, "avg_row_size": 8.0, "avg_col_size": 4.0, "col_count": 2, "varlen_col_count": 5}, "operations": []}}}"#,
    )
    .unwrap();
    assert_eq!(code(&formatsel(&["catalog", "load", "--catalog", bad.to_str().unwrap()])), 2);
}

#[test]
fn crossover_on_bundled_stats() {
    let v = json(&formatsel(&["crossover", "-o", "json"]));
    let xs = v["crossovers"].as_array().unwrap();
    assert_eq!(xs.len(), 1);
    let x = xs[0].as_f64().unwrap();
    assert!(x > 0.0 && x < 1.0);
    let pts = v["points"].as_array().unwrap();
    let first = &pts[0];
    let last = &pts[pts.len() - 1];
    assert!(first["hybrid_cost"].as_f64() < first["horizontal_cost"].as_f64());
    assert!(last["horizontal_cost"].as_f64() <= last["hybrid_cost"].as_f64());

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("curve.csv");
    let o = formatsel(&["crossover", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains(&format!("crossover {}", sig6(x))));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("ref_cols,fraction,hybrid_bytes_fraction,horizontal_cost,hybrid_cost")
    );
    assert_eq!(lines.count(), pts.len());

    let wrong = formatsel(&["crossover", "--horizontal", "parquet"]);
    assert_eq!(code(&wrong), 2);
}

#[test]
fn validate_subset_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("points.csv");
    let args = ["validate", "--quick", "--suite", "size,projection", "--seed", "7", "-o", "json"];
    let a = formatsel(&args);
    let b = formatsel(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["seed"], 7);
    let names: Vec<_> = v["suites"].as_array().unwrap().iter().map(|s| s["name"].clone()).collect();
    assert_eq!(names, ["size", "projection"]);

    let o = formatsel(&["validate", "--quick", "--suite", "size", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("overall PASS"), "{text}");
    let points = std::fs::read_to_string(&csv).unwrap();
    assert!(points.starts_with("suite,parameter,estimated,actual,error,passed"));

    assert_eq!(code(&formatsel(&["validate", "--suite", "speed"])), 3);
}

#[test]
fn config_file_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let toml_cfg = dir.path().join("run.toml");
    std::fs::write(
        &toml_cfg,
        "candidates = [\"seqfile\", \"avro\"]\noutput = \"json\"\n\n[system]\nseek_time = 0.01\n",
    )
    .unwrap();
    let toml_cfg = toml_cfg.to_str().unwrap();
    let v = json(&formatsel(&["--config", toml_cfg, "choose", "--workflow", &workflow(), "--catalog", &catalog()]));
    assert_eq!(v["candidates"], serde_json::json!(["seqfile", "avro"]));

    let flagged = json(&formatsel(&[
        "--config", toml_cfg, "choose", "--workflow", &workflow(), "--catalog", &catalog(), "--candidates", "parquet",
    ]));
    assert_eq!(flagged["candidates"], serde_json::json!(["parquet"]));

    let from_env = Command::new(env!("CARGO_BIN_EXE_formatsel"))
        .args(["crossover"])
        .env("FORMATSEL_CONFIG", toml_cfg)
        .output()
        .unwrap();
    assert!(serde_json::from_slice::<Value>(&from_env.stdout).is_ok());
    let overridden = Command::new(env!("CARGO_BIN_EXE_formatsel"))
        .args(["crossover", "-o", "csv"])
        .env("FORMATSEL_CONFIG", toml_cfg)
        .output()
        .unwrap();
    assert!(String::from_utf8(overridden.stdout).unwrap().starts_with("ref_cols,"));

    let json_cfg = dir.path().join("run.json");
    std::fs::write(&json_cfg, r#"{"formats": {"parquet": {"row_group": 64000000}}, "output": "json"}"#).unwrap();
    let small_groups = json(&formatsel(&[
        "--config", json_cfg.to_str().unwrap(), "estimate-size", "--format", "parquet",
        "--rows", "1000000", "--cols", "10", "--col-size", "20",
    ]));
    let default_groups = json(&formatsel(&[
        "estimate-size", "--format", "parquet", "--rows", "1000000", "--cols", "10", "--col-size", "20", "-o", "json",
    ]));
    assert_ne!(small_groups["estimated"], default_groups["estimated"]);

    let unknown_key = dir.path().join("typo.toml");
    std::fs::write(&unknown_key, "candidate = [\"avro\"]\n").unwrap();
    assert_eq!(code(&formatsel(&["--config", unknown_key.to_str().unwrap(), "crossover"])), 2);
    let bad_profile = dir.path().join("profile.toml");
    std::fs::write(&bad_profile, "[system]\nlocality_probability = 1.5\n").unwrap();
    assert_eq!(code(&formatsel(&["--config", bad_profile.to_str().unwrap(), "crossover"])), 2);
    let missing = dir.path().join("absent.toml");
    assert_eq!(code(&formatsel(&["--config", missing.to_str().unwrap(), "crossover"])), 2);
}

#[test]
fn text_and_json_carry_the_same_numbers() {
    let v = json(&formatsel(&["choose", "--workflow", &workflow(), "--catalog", &catalog(), "-o", "json"]));
    let text = stdout(&formatsel(&["choose", "--workflow", &workflow(), "--catalog", &catalog()]));
    for d in v["decisions"].as_array().unwrap() {
        let node = d["node"].as_str().unwrap();
        let total = sig6(d["total_cost"].as_f64().unwrap());
        let line = text
            .lines()
            .find(|l| l.split_whitespace().next() == Some(node))
            .unwrap();
        assert!(line.split_whitespace().any(|c| c == total), "{line} lacks {total}");
    }

    let csv = stdout(&formatsel(&["choose", "--workflow", &workflow(), "--catalog", &catalog(), "-o", "csv"]));
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let totals: Vec<(String, String, f64)> = rdr
        .records()
        .map(|r| r.unwrap())
        .filter(|r| &r[5] == "total")
        .map(|r| (r[0].to_string(), r[4].to_string(), r[11].parse().unwrap()))
        .collect();
    for d in v["decisions"].as_array().unwrap() {
        let node = d["node"].as_str().unwrap();
        let chosen = d["format"].as_str().unwrap();
        let t = totals.iter().find(|(n, f, _)| n == node && f == chosen).unwrap();
        assert_eq!(t.2, d["total_cost"].as_f64().unwrap());
    }
}

#[test]
fn machine_output_is_reproducible() {
    for args in [
        vec!["choose", "--workflow", workflow().leak(), "--catalog", catalog().leak(), "-o", "json"],
        vec!["crossover", "-o", "csv"],
        vec!["estimate-size", "--format", "avro", "--rows", "3000", "--cols", "6", "--col-size", "9", "--varlen-cols", "3", "--oracle", "-o", "json"],
    ] {
        assert_eq!(formatsel(&args).stdout, formatsel(&args).stdout);
    }
}

#[test]
fn help_and_version() {
    let o = formatsel(&["--help"]);
    assert_eq!(code(&o), 0);
    for verb in ["estimate-size", "choose", "validate", "crossover", "catalog"] {
        assert!(stdout(&o).contains(verb));
    }
    assert_eq!(code(&formatsel(&["--version"])), 0);
    assert_eq!(code(&formatsel(&["frobnicate"])), 2);
}
