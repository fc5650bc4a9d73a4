use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tdflow_cli::pvcurve::read_csv;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn tdflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn keys(v: &Value) -> Vec<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

fn out_dir(dir: &tempfile::TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

#[test]
fn two_bus_solve_has_no_poi_and_small_residual() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_dir(&dir, "o");
    let o = tdflow(&["solve", "--case", &data("case2.m"), "--out", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(dir.path().join("o/summary.txt")).unwrap();
    assert!(summary.contains("no coupling ports"));
    let report = json(&dir.path().join("o/report.json"));
    assert!(report["mismatch"].as_f64().unwrap() <= 1e-6);
    assert_eq!(report["summary"]["ports"], 0);
}

#[test]
fn solution_and_report_schemas_are_pinned() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_dir(&dir, "o");
    let o = tdflow(&["solve", "--case", &data("case9.m"), "--map", &data("case9_small.json"), "--out", &out]);
    assert_eq!(code(&o), 0);
    let sol = json(&dir.path().join("o/solution.json"));
    assert_eq!(keys(&sol), ["buses", "network", "schema", "solver"]);
    assert_eq!(sol["schema"], 1);
    assert_eq!(keys(&sol["buses"][0]), ["id", "kind", "name", "phases"]);
    assert_eq!(keys(&sol["buses"][0]["phases"][0]), ["angle_deg", "magnitude", "phase"]);
    let report = json(&dir.path().join("o/report.json"));
    assert_eq!(keys(&report), ["converged", "direct", "mismatch", "schema", "solver", "summary"]);
    assert_eq!(
        keys(&report["summary"]),
        ["mismatch", "network", "node_max", "node_min", "poi_max", "poi_min", "ports", "solver"]
    );
    assert_eq!(keys(&report["summary"]["poi_max"]), ["name", "node", "phase", "voltage"]);
}

#[test]
fn gsn_and_direct_summaries_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut summaries = vec![];
    for solver in ["direct", "gsn"] {
        let out = out_dir(&dir, solver);
        let o = tdflow(&[
            "solve",
            "--case",
            &data("case9.m"),
            "--map",
            &data("case9_one_feeder.json"),
            "--solver",
            solver,
            "--out",
            &out,
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        summaries.push(json(&dir.path().join(solver).join("report.json"))["summary"].clone());
    }
    for field in ["poi_max", "poi_min", "node_max", "node_min"] {
        let a = summaries[0][field]["voltage"].as_f64().unwrap();
        let b = summaries[1][field]["voltage"].as_f64().unwrap();
        assert!((a - b).abs() <= 1e-3, "{field}: {a} vs {b}");
    }
}

#[test]
fn gsn_report_is_deterministic_with_one_worker() {
    let dir = tempfile::tempdir().unwrap();
    for run in ["a", "b"] {
        let out = out_dir(&dir, run);
        let o = tdflow(&[
            "solve",
            "--case",
            &data("case9.m"),
            "--map",
            &data("case9_small.json"),
            "--solver",
            "gsn",
            "--workers",
            "1",
            "--out",
            &out,
        ]);
        assert_eq!(code(&o), 0);
    }
    for file in ["report.json", "solution.json", "summary.txt"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between runs");
    }
}

#[test]
fn missing_input_exits_with_code_two_and_a_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_dir(&dir, "o");
    let o = tdflow(&["solve", "--case", "/nonexistent/case.m", "--out", &out]);
    assert_eq!(code(&o), 2);
    let stderr = String::from_utf8_lossy(&o.stderr);
    let record: Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(record["kind"], "input");
    assert_eq!(record["exit_code"], 2);
}

#[test]
fn bad_flag_values_are_input_errors() {
    let o = tdflow(&["solve", "--case", &data("case2.m"), "--tol", "-1"]);
    assert_eq!(code(&o), 2);
    let o = tdflow(&["solve", "--case", &data("case2.m"), "--solver", "spice"]);
    assert_eq!(code(&o), 2);
    let o = tdflow(&["pvcurve", "--case", &data("case2.m"), "--lf-start", "2", "--lf-stop", "1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn plain_newton_failure_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let opts = dir.path().join("plain.json");
    std::fs::write(
        &opts,
        r#"{"direct": {"limiting": false, "homotopy": "off", "max_iterations": 100}}"#,
    )
    .unwrap();
    let out = out_dir(&dir, "o");
    let o = tdflow(&[
        "solve",
        "--case",
        &data("radial_stress.m"),
        "--flat-start",
        "--options",
        opts.to_str().unwrap(),
        "--out",
        &out,
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let record = json(&dir.path().join("o/error.json"));
    assert_eq!(record["kind"], "not_converged");
    assert_eq!(record["status"], "error");
}

#[test]
fn unknown_options_file_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let opts = dir.path().join("bad.json");
    std::fs::write(&opts, r#"{"direkt": {}}"#).unwrap();
    let o = tdflow(&["solve", "--case", &data("case2.m"), "--options", opts.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn single_point_curve_matches_solve() {
    let dir = tempfile::tempdir().unwrap();
    let pv = out_dir(&dir, "pv");
    let o = tdflow(&[
        "pvcurve",
        "--case",
        &data("case9.m"),
        "--map",
        &data("case9_small.json"),
        "--lf-start",
        "1",
        "--lf-stop",
        "1",
        "--out",
        &pv,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let solve = out_dir(&dir, "solve");
    let o = tdflow(&["solve", "--case", &data("case9.m"), "--map", &data("case9_small.json"), "--out", &solve]);
    assert_eq!(code(&o), 0);

    let (header, rows) = read_csv(&dir.path().join("pv/pvcurve.csv")).unwrap();
    assert_eq!(header, ["lf", "base"]);
    assert_eq!(rows.len(), 1);
    let poi = json(&dir.path().join("solve/report.json"))["summary"]["poi_max"]["voltage"].as_f64().unwrap();
    assert!((rows[0][1].unwrap() - poi).abs() < 1e-6);

    let text = std::fs::read_to_string(dir.path().join("pv/pvcurve.csv")).unwrap();
    assert!(text.starts_with("# schema: 1\nlf,base\n"));
    let j = json(&dir.path().join("pv/pvcurve.json"));
    assert_eq!(keys(&j), ["curves", "loading_factors", "poi", "schema"]);
    assert_eq!(keys(&j["curves"][0]), ["der_scale", "name", "points", "reason", "stopped_at"]);
    assert!(std::fs::read_to_string(dir.path().join("pv/pvcurve.svg")).unwrap().contains("<polyline"));
}

#[test]
fn pvcurve_without_ports_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_dir(&dir, "o");
    let o = tdflow(&["pvcurve", "--case", &data("case9.m"), "--out", &out]);
    assert_eq!(code(&o), 2);
}

#[test]
fn generate_counts_ports_and_bundle_solves_like_the_sources() {
    let dir = tempfile::tempdir().unwrap();
    let one = out_dir(&dir, "one");
    let o = tdflow(&["generate", "--case", &data("case9.m"), "--map", &data("case9_one_feeder.json"), "--out", &one]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&dir.path().join("one/manifest.json"));
    assert_eq!(m["counts"]["ports"], 1);
    assert_eq!(
        keys(&m),
        ["counts", "coupling", "feeders", "network", "ports", "schema", "transmission"]
    );
    assert!(m["feeders"][0]["der_nodes"].as_u64().unwrap() > 0);

    let four = out_dir(&dir, "four");
    let o = tdflow(&["generate", "--case", &data("case9.m"), "--map", &data("case9_four_feeders.json"), "--out", &four]);
    assert_eq!(code(&o), 0);
    let m = json(&dir.path().join("four/manifest.json"));
    assert_eq!(m["counts"]["ports"], 4);
    assert_eq!(m["feeders"].as_array().unwrap().len(), 1);

    let from_bundle = out_dir(&dir, "sb");
    let o = tdflow(&["solve", "--bundle", &one, "--out", &from_bundle]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let from_sources = out_dir(&dir, "ss");
    let o = tdflow(&["solve", "--case", &data("case9.m"), "--map", &data("case9_one_feeder.json"), "--out", &from_sources]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        json(&dir.path().join("sb/solution.json")),
        json(&dir.path().join("ss/solution.json"))
    );

    // A modified bundle file fails its checksum.
    let case = dir.path().join("one/case9.m");
    let mut text = std::fs::read_to_string(&case).unwrap();
    text.push_str("\n% edited\n");
    std::fs::write(&case, text).unwrap();
    let o = tdflow(&["solve", "--bundle", &one, "--out", &from_bundle]);
    assert_eq!(code(&o), 2);
}

#[test]
fn generate_rejects_a_bus_coupled_twice() {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("dup.json");
    let feeder = data("feeders/small.json");
    std::fs::write(
        &map,
        format!(r#"{{"schema": 1, "pairs": [{{"feeder": "{feeder}", "bus": 5}}, {{"feeder": "{feeder}", "bus": 5}}]}}"#),
    )
    .unwrap();
    let out = out_dir(&dir, "o");
    let o = tdflow(&["generate", "--case", &data("case9.m"), "--map", map.to_str().unwrap(), "--out", &out]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains('5'));
    assert!(!dir.path().join("o/manifest.json").exists());
}

#[test]
fn bench_writes_one_row_per_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_dir(&dir, "b");
    let o = tdflow(&[
        "bench",
        "--case",
        &data("case9.m"),
        "--feeder",
        &data("feeders/small.json"),
        "--k",
        "1,4",
        "--out",
        &out,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("b/bench.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# schema: 1"));
    assert_eq!(lines.next(), Some("k,unknowns,wall_seconds,epochs,mean_inner_iterations,status"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("1,") && rows[0].ends_with(",ok"));
    assert!(rows[1].starts_with("4,") && rows[1].ends_with(",ok"));
    let r = json(&dir.path().join("b/bench.json"));
    assert_eq!(keys(&r), ["exponent", "feeder", "rows", "schema", "solver"]);
    let epochs = r["rows"][0]["epochs"].as_u64().unwrap();
    assert!((1..=tdflow::gsn::GsnOptions::default().max_epochs as u64).contains(&epochs));
}

#[test]
fn bench_records_a_failed_point_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_dir(&dir, "b");
    // case2 has a single PQ bus, so k = 2 cannot be placed.
    let o = tdflow(&[
        "bench",
        "--case",
        &data("case2.m"),
        "--feeder",
        &data("feeders/small.json"),
        "--k",
        "2,1",
        "--out",
        &out,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&dir.path().join("b/bench.json"));
    let rows = r["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0]["status"].as_str().unwrap().contains("PQ"));
    assert_eq!(rows[1]["status"], "ok");
    assert!(r["exponent"].is_null());
}
