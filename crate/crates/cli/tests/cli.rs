use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn triage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_triage"))
        .args(args)
        .env_remove("TRIAGE_K")
        .env_remove("TRIAGE_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = triage(args);
    assert!(
        out.status.success(),
        "triage {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn small_corpus(dir: &Path) -> String {
    let corpus = dir.join("corpus");
    let corpus_s = corpus.to_str().unwrap().to_string();
    ok(&[
        "generate", "--out", &corpus_s, "--seed", "5", "--bundles-per-class", "4",
        "--noise-min", "10", "--noise-max", "15", "--quiet",
    ]);
    corpus_s
}

fn without_timing(report: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn generate_ingest_preprocess() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let manifest = fs::read_to_string(Path::new(&corpus).join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 20);

    let dump = format!("{corpus}/dump-0000");
    let ingest: Value = serde_json::from_str(&ok(&["ingest", "--dump", &dump])).unwrap();
    let files = ingest["files"].as_array().unwrap();
    assert!(!files.is_empty());
    assert!(files.iter().all(|f| f["path"].as_str().unwrap().contains("pods/")));
    assert!(ingest["reduction"].as_f64().unwrap() > 0.0);

    let tokens = ok(&["preprocess", "--dump", &dump]);
    assert!(!tokens.trim().is_empty());
    assert!(tokens.trim().split(' ').all(|t| t.len() >= 2));

    // A second generate into the same directory is refused.
    let again = triage(&["generate", "--out", &corpus, "--quiet"]);
    assert_eq!(again.status.code(), Some(2));
}

#[test]
fn train_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let model = dir.path().join("svm.model");
    let model_s = model.to_str().unwrap();
    let trained: Value =
        serde_json::from_str(&ok(&["train", "--root", &corpus, "--algo", "svm", "--model-out", model_s, "-q"]))
            .unwrap();
    assert_eq!(trained["algorithm"], "svm");
    assert!(Path::new(&format!("{model_s}.vocab")).exists());

    let out = ok(&["predict", "--model", model_s, "--dump", &format!("{corpus}/dump-0000")]);
    let line: Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(line["class"], "artifactory");

    // Corrupting the model is a data error.
    let mut bytes = fs::read(&model).unwrap();
    let last = bytes.len() - 2;
    bytes[last] ^= 1;
    fs::write(&model, bytes).unwrap();
    let broken = triage(&["predict", "--model", model_s, "--dump", &format!("{corpus}/dump-0000")]);
    assert_eq!(broken.status.code(), Some(2), "{}", String::from_utf8_lossy(&broken.stderr));
}

#[test]
fn evaluate_is_reproducible_and_renders() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let config = dir.path().join("config.json");
    fs::write(&config, r#"{"k": 3, "trees": 5, "algos": "svm,knn"}"#).unwrap();
    let config_s = config.to_str().unwrap();
    let run = |out: &str, extra: &[&str]| {
        let mut args = vec!["evaluate", "--root", &corpus, "--report-out", out, "--config", config_s, "-q"];
        args.extend_from_slice(extra);
        ok(&args);
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(a.to_str().unwrap(), &["--algos", "svm,knn,rf", "--k", "2"]);
    run(b.to_str().unwrap(), &["--algos", "svm,knn,rf", "--k", "2"]);
    for file in ["report.json", "folds.csv", "tables.txt"] {
        assert!(a.join(file).exists(), "{file} missing");
    }
    let report = without_timing(&a.join("report.json"));
    assert_eq!(report, without_timing(&b.join("report.json")));
    // Flags beat the config file, the config file beats the defaults.
    assert_eq!(report["k"], 2);
    assert_eq!(report["config"]["trees"], 5);
    assert_eq!(report["algorithms"].as_array().unwrap().len(), 3);

    let csv = fs::read_to_string(a.join("folds.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "fold,algorithm,accuracy,weighted_f1,train_seconds,predict_seconds");
    assert_eq!(csv.lines().count(), 1 + 2 * 3);

    let report_path = a.join("report.json");
    let tables = ok(&["report", "--report", report_path.to_str().unwrap()]);
    assert!(tables.contains("Table 4."));
    let json = ok(&["report", "--report", report_path.to_str().unwrap(), "--style", "json"]);
    let reparsed: Value = serde_json::from_str(&json).unwrap();
    assert_eq!(reparsed["accuracy"], report["accuracy"]);

    // Without the flag, the config file's k applies.
    let c = dir.path().join("c");
    run(c.to_str().unwrap(), &[]);
    let report = without_timing(&c.join("report.json"));
    assert_eq!(report["k"], 3);
    assert_eq!(report["algorithms"], serde_json::json!(["SVM", "KNN"]));
}

#[test]
fn environment_variables_sit_below_flags() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let out = dir.path().join("r");
    let status = Command::new(env!("CARGO_BIN_EXE_triage"))
        .args(["evaluate", "--root", &corpus, "--algos", "knn", "--report-out", out.to_str().unwrap(), "-q"])
        .env("TRIAGE_K", "4")
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(without_timing(&out.join("report.json"))["k"], 4);
}

#[test]
fn stats_command() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.csv");
    fs::write(&scores, "a,b,c\n0.9,0.8,0.7\n0.6,0.5,0.4\n0.95,0.7,0.1\n").unwrap();
    let out: Value = serde_json::from_str(&ok(&["stats", "--scores", scores.to_str().unwrap()])).unwrap();
    assert!((out["friedman"]["q_statistic"].as_f64().unwrap() - 6.0).abs() < 1e-9);
    assert_eq!(out["nemenyi"]["p_matrix"][1][1], 1.0);
    let table = ok(&["stats", "--scores", scores.to_str().unwrap(), "--format", "table"]);
    assert!(table.contains("Friedman Q = 6.0000"));
}

#[test]
fn exit_codes() {
    assert_eq!(triage(&[]).status.code(), Some(1));
    assert_eq!(triage(&["evaluate", "--bogus"]).status.code(), Some(1));
    assert_eq!(triage(&["--help"]).status.code(), Some(0));
    assert_eq!(triage(&["ingest", "--dump", "/definitely/not/here"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "a,b\n1,x\n").unwrap();
    assert_eq!(triage(&["stats", "--scores", bad.to_str().unwrap()]).status.code(), Some(2));
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(triage(&["ingest", "--dump", empty.to_str().unwrap()]).status.code(), Some(2));
}
