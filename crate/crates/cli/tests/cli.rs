use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sympcast"));
    c.env("RUST_LOG", "error");
    c
}

fn run(out: &Path, args: &[&str]) -> Output {
    bin().arg("--out").arg(out).args(args).output().expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> Output {
    let o = run(out, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn schemas_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas")
}

/// Validates every JSON report in `dir` against the schema its envelope
/// names.
fn validate_dir(dir: &Path) -> usize {
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let doc = read_json(&path);
            let kind = doc["schema"].as_str().unwrap_or_else(|| panic!("{} lacks schema", path.display()));
            let schema = read_json(&schemas_dir().join(format!("{kind}.v1.schema.json")));
            let v = jsonschema::validator_for(&schema).unwrap();
            let errors: Vec<String> = v.iter_errors(&doc).map(|e| format!("{e} at {}", e.instance_path())).collect();
            assert!(errors.is_empty(), "{}: {errors:#?}", path.display());
            n += 1;
        }
    }
    n
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

fn write_panel(path: &Path, header: &str, rows: impl Iterator<Item = String>) {
    let mut text = format!("{header}\n");
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

/// Day offset from 2021-01-01, printed as an ISO date.
struct Day(usize);

impl std::fmt::Display for Day {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let lens = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];
        let (mut m, mut d) = (0, self.0);
        while d >= lens[m] {
            d -= lens[m];
            m += 1;
        }
        write!(f, "2021-{:02}-{:02}", m + 1, d + 1)
    }
}

#[test]
fn synth_shape_determinism_and_validation() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["synth", "--regions", "5", "--days", "120", "--signals", "10", "--seed", "7"];
    let o = ok(a.path(), &args);
    ok(b.path(), &args);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.lines().all(|l| Path::new(l).exists()), "stdout lists paths only: {stdout}");
    assert_eq!(csv_rows(&a.path().join("synthetic.csv")).len(), 5 * 120);
    for f in ["synthetic.csv", "synthetic_spec.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    validate_dir(a.path());

    let bad = run(a.path(), &["synth", "--signals", "0"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(!bad.stderr.is_empty());
}

#[test]
fn rank_on_planted_panel() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["rank"]);
    let rows = csv_rows(&d.path().join("ranking.csv"));
    assert_eq!(rows.len(), 10);
    assert_eq!(rows[0][1], "signal_00_weighted");
    let json = read_json(&d.path().join("ranking.json"));
    assert_eq!(json["entries"][0]["name"], "signal_00_weighted");
    validate_dir(d.path());
}

#[test]
fn rank_with_everything_pruned() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("p.csv");
    write_panel(&data, "region,date,age,sex,y", (0..10).map(|i| format!("R0,{},{i},{},{}", Day(i), i % 2, i * 3)));
    let schema = d.path().join("schema.json");
    std::fs::write(&schema, r#"{"target": "y", "demographic": ["age", "sex"]}"#).unwrap();
    let o = run(d.path(), &["rank", "--data", data.to_str().unwrap(), "--schema", schema.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no features"));
}

#[test]
fn predict_single_and_bad_model() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["--runs", "3", "predict", "--top-n", "1"]);
    let j = read_json(&d.path().join("evaluation.json"));
    assert_eq!(j["n_features"], 1);
    assert_eq!(j["eval"]["runs"].as_array().unwrap().len(), 3);
    assert!(!d.path().join("sweep.json").exists());

    let o = run(d.path(), &["predict", "--model", "forest", "--top-n", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("linear") && err.contains("tree") && err.contains("gbt"), "{err}");
    validate_dir(d.path());
}

#[test]
fn predict_sweep_has_ci_per_n() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["--runs", "2", "predict", "--model", "linear", "--sweep", "--max-n", "4", "--plot-data"]);
    let j = read_json(&d.path().join("sweep.json"));
    let per_n = j["per_n"].as_array().unwrap();
    assert_eq!(per_n.len(), 4);
    let best = j["best_n"].as_u64().unwrap() as usize;
    let best_mre = per_n[best - 1]["eval"]["mean_mre"].as_f64().unwrap();
    assert!(per_n.iter().all(|p| p["eval"]["mean_mre"].as_f64().unwrap() >= best_mre));
    assert!(per_n.iter().all(|p| p["eval"]["mre_ci_95"].as_array().unwrap().len() == 2));
    assert_eq!(csv_rows(&d.path().join("fig_error_vs_top_n.csv")).len(), 4);
    validate_dir(d.path());
}

#[test]
fn forecast_rows_and_unknown_region() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["forecast", "--model", "var", "--horizon", "30", "--region", "R0"]);
    ok(d.path(), &["forecast", "--model", "lstm", "--region", "R0", "--epochs", "20", "--hidden", "8"]);
    for m in ["var", "lstm"] {
        let rows = csv_rows(&d.path().join(format!("forecast_R0_{m}.csv")));
        assert_eq!(rows.len(), 30, "{m}");
        let j = read_json(&d.path().join(format!("forecast_R0_{m}.json")));
        assert_eq!(j["per_step"].as_array().unwrap().len(), 30);
    }
    let mut r = csv::Reader::from_path(d.path().join("forecast_R0_var.csv")).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), ["date", "actual", "forecast"]);
    validate_dir(d.path());

    let o = run(d.path(), &["forecast", "--region", "Atlantis"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown region"));
}

#[test]
fn ablate_step_counts() {
    let d = tempfile::tempdir().unwrap();
    let common = ["--runs", "2", "ablate", "--model", "linear", "--top", "10", "--plot-data", "--mode"];
    ok(d.path(), &[&common[..], &["all-but-one"]].concat());
    ok(d.path(), &[&common[..], &["cumulative"]].concat());
    let abo = read_json(&d.path().join("ablation_all_but_one.json"));
    let cum = read_json(&d.path().join("ablation_cumulative.json"));
    assert_eq!(abo["steps"].as_array().unwrap().len(), 10);
    assert_eq!(cum["steps"].as_array().unwrap().len(), 9);
    // step 0 is the baseline
    assert_eq!(csv_rows(&d.path().join("fig_all_but_one_mre.csv")).len(), 11);
    assert_eq!(csv_rows(&d.path().join("fig_cumulative_drop_mre.csv")).len(), 10);
    validate_dir(d.path());
}

#[test]
fn correlate_identical_columns() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("p.csv");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    write_panel(
        &data,
        "region,date,a_weighted,b_weighted,y",
        (0..40).map(|i| {
            let v: f64 = rng.random::<f64>() * 50.0;
            format!("R0,{},{v},{v},{}", Day(i), rng.random::<f64>() * 10.0)
        }),
    );
    ok(d.path(), &["correlate", "--data", data.to_str().unwrap(), "--target", "y"]);
    let j = read_json(&d.path().join("correlation.json"));
    let pair = j["pairs"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["col_a"] == "a_weighted" && p["col_b"] == "b_weighted")
        .unwrap()
        .clone();
    assert_eq!(pair["r"].as_f64().unwrap(), 1.0);
    assert_eq!(pair["flagged"], true);
    let flagged = csv_rows(&d.path().join("correlation_flagged.csv"));
    assert!(flagged.iter().any(|r| r.contains(&"a_weighted".to_string()) && r.contains(&"b_weighted".to_string())));
    validate_dir(d.path());
}

#[test]
fn dtw_of_file_with_itself() {
    let d = tempfile::tempdir().unwrap();
    let f = d.path().join("s.csv");
    std::fs::write(&f, "t,v\n0,1.5\n1,2\n2,7.25\n3,3\n").unwrap();
    ok(d.path(), &["dtw", f.to_str().unwrap(), f.to_str().unwrap()]);
    let j = read_json(&d.path().join("dtw.json"));
    assert_eq!(j["distance"].as_f64().unwrap(), 0.0);
    assert_eq!(j["len_a"], 4);
    validate_dir(d.path());
}

#[test]
fn adf_on_random_walk_and_cluster() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("rw.csv");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut level = 50.0;
    write_panel(
        &data,
        "region,date,x_weighted,y",
        (0..300).map(|i| {
            level += rng.random::<f64>() - 0.5;
            format!("R0,{},{},{level}", Day(i), rng.random::<f64>())
        }),
    );
    ok(d.path(), &["adf", "--data", data.to_str().unwrap(), "--target", "y"]);
    let j = read_json(&d.path().join("adf.json"));
    assert_eq!(j["regions"]["R0"]["reject_at_5pct"], false);

    ok(d.path(), &["cluster", "--k", "3", "--sample", "3"]);
    let c = read_json(&d.path().join("cluster.json"));
    assert_eq!(c["assignment"].as_object().unwrap().len(), 10);
    assert_eq!(c["sample"].as_array().unwrap().len(), 3);
    assert_eq!(c["trace"].as_array().unwrap().len(), 7);
    validate_dir(d.path());
}

#[test]
fn ingest_and_prune_reports() {
    let d = tempfile::tempdir().unwrap();
    let inputs = tempfile::tempdir().unwrap();
    let data = inputs.path().join("p.csv");
    write_panel(
        &data,
        "region,date,cough_weighted,cough_unweighted,age,y",
        (0..12).map(|i| format!("R{},{},{},{},{},{}", i % 2, Day(i / 2), i, i + 1, 30 + i, i * 2)),
    );
    let schema = inputs.path().join("s.json");
    std::fs::write(&schema, r#"{"target": "y", "demographic": ["age"]}"#).unwrap();
    let flags = ["--data", data.to_str().unwrap(), "--schema", schema.to_str().unwrap()];
    ok(d.path(), &[&["ingest"][..], &flags].concat());
    ok(d.path(), &[&["prune"][..], &flags].concat());
    let p = read_json(&d.path().join("prune.json"));
    assert_eq!(p["kept"], serde_json::json!(["cough_weighted"]));
    assert_eq!(p["dropped"].as_array().unwrap().len(), 2);
    assert_eq!(read_json(&d.path().join("ingest.json"))["rows"], 12);
    validate_dir(d.path());

    let missing = run(d.path(), &["ingest", "--data", "/nonexistent.csv", "--target", "y"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn config_precedence() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"runs": 4, "seed": 11, "top_n": 2, "model": {"kind": "linear"}}"#).unwrap();
    let c = cfg.to_str().unwrap();
    ok(d.path(), &["--config", c, "predict"]);
    let j = read_json(&d.path().join("evaluation.json"));
    assert_eq!(j["eval"]["runs"].as_array().unwrap().len(), 4);
    assert_eq!(j["eval"]["seeds"][0], 11);
    assert_eq!(j["n_features"], 2);
    assert_eq!(j["model"]["kind"], "linear");

    ok(d.path(), &["--config", c, "--runs", "2", "--seed", "5", "predict", "--top-n", "1"]);
    let j = read_json(&d.path().join("evaluation.json"));
    assert_eq!(j["eval"]["runs"].as_array().unwrap().len(), 2);
    assert_eq!(j["eval"]["seeds"][0], 5);
    assert_eq!(j["n_features"], 1);

    std::fs::write(&cfg, r#"{"data": "x.csv", "synthetic": {}}"#).unwrap();
    assert_eq!(run(d.path(), &["--config", c, "rank"]).status.code(), Some(2));
    std::fs::write(&cfg, r#"{"bogus": 1}"#).unwrap();
    assert_eq!(run(d.path(), &["--config", c, "rank"]).status.code(), Some(2));
    assert_eq!(run(d.path(), &["--runs", "0", "rank"]).status.code(), Some(2));
}
