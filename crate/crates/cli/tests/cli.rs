use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use entropywalks::SubsetDensity;
use serde_json::Value;

fn run(dir: &Path, kind: &str, config: &str, extra: &[&str], threads: Option<&str>) -> Output {
    let path = dir.join(format!("{kind}.json"));
    fs::write(&path, config).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_entropywalks"));
    cmd.arg(kind)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra);
    if let Some(t) = threads {
        cmd.env("ENTROPYWALKS_THREADS", t);
    }
    cmd.output().unwrap()
}

fn run_dir(out: &Output) -> PathBuf {
    let stdout = String::from_utf8(out.stdout.clone()).unwrap();
    let (_, dir) = stdout.trim().split_once(' ').expect("status and directory");
    PathBuf::from(dir)
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn uniform_certify_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        tmp.path(),
        "certify",
        r#"{"input": {"generator": "uniform", "n": 3, "k": 2}, "params": {"alpha": 1.0}, "seed": 1}"#,
        &[],
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = run_dir(&out);
    let s = summary(&dir);
    assert_eq!(s["verdict"], "certified-exact");
    assert_eq!(s["status"], "verified");
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 1);
    assert_eq!(manifest["input_sha256"].as_str().unwrap().len(), 64);
    assert!(!dir.join("witness.json").exists());
}

#[test]
fn falsified_certificate_exits_one_with_witness() {
    let tmp = tempfile::tempdir().unwrap();
    let mu = SubsetDensity::uniform(4, 2).unwrap().r_fold(2).unwrap();
    fs::write(tmp.path().join("fold.json"), serde_json::to_string(&mu.to_file()).unwrap()).unwrap();
    let out = run(
        tmp.path(),
        "certify",
        r#"{"input": {"generator": "file", "path": "fold.json"}, "params": {"alpha": 1.0}, "seed": 2}"#,
        &[],
        None,
    );
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = run_dir(&out);
    assert_eq!(summary(&dir)["verdict"], "falsified");
    let witness: Value = serde_json::from_str(&fs::read_to_string(dir.join("witness.json")).unwrap()).unwrap();
    assert!(witness["certificate"]["witness"].is_object());
}

#[test]
fn malformed_config_reports_position() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), "mix", "{\"seed\": 1,\n  \"params\": {\"epsilon\": }\n}", &[], None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 2, column 25"), "{err}");
}

#[test]
fn missing_seed_and_input_are_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        tmp.path(),
        "mix",
        r#"{"input": {"generator": "uniform", "n": 3, "k": 2}}"#,
        &[],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    let out = run(
        tmp.path(),
        "mix",
        r#"{"input": {"generator": "file", "path": "nope.json"}, "seed": 1}"#,
        &[],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("input not found"));
}

#[test]
fn csv_outputs_are_deterministic_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let configs = [
        (
            "contraction",
            r#"{"input": {"generator": "uniform", "n": 5, "k": 3}, "params": {"alpha": 1.0, "trials": 64}, "seed": 9}"#,
            "contraction.csv",
        ),
        (
            "scale",
            r#"{"params": {"sizes": [4, 6], "delta": 0.5, "runs": 300}, "seed": 9}"#,
            "scale.csv",
        ),
        (
            "walk",
            r#"{"input": {"generator": "curie_weiss", "n": 6, "delta": 0.5}, "params": {"steps": 200}, "seed": 9}"#,
            "trajectory.csv",
        ),
    ];
    for (kind, config, table) in configs {
        let a = run(tmp.path(), kind, config, &["--emit-csv"], Some("1"));
        let b = run(tmp.path(), kind, config, &["--emit-csv"], Some("3"));
        assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
        let (da, db) = (run_dir(&a), run_dir(&b));
        assert_ne!(da, db);
        let (ca, cb) = (fs::read(da.join(table)).unwrap(), fs::read(db.join(table)).unwrap());
        assert!(ca.starts_with(b"# "));
        assert_eq!(ca, cb, "{kind}");
        assert_eq!(
            fs::read(da.join("summary.json")).unwrap(),
            fs::read(db.join("summary.json")).unwrap()
        );
    }
}

#[test]
fn scale_columns_and_empty_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        tmp.path(),
        "scale",
        r#"{"params": {"sizes": [8], "delta": 1.0, "runs": 200}, "seed": 4}"#,
        &["--emit-csv"],
        None,
    );
    let text = fs::read_to_string(run_dir(&out).join("scale.csv")).unwrap();
    let mut lines = text.lines().skip(1);
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    for col in ["n", "delta", "gap", "tmix", "bound", "tmix_exact", "mlsi_lower"] {
        assert!(header.contains(&col), "{col}");
    }
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let gap: f64 = row[header.iter().position(|c| *c == "gap").unwrap()].parse().unwrap();
    assert!((gap - 0.125).abs() < 1e-10);

    let out = run(
        tmp.path(),
        "scale",
        r#"{"params": {"sizes": [], "delta": 0.5}, "seed": 4}"#,
        &["--emit-csv"],
        None,
    );
    let text = fs::read_to_string(run_dir(&out).join("scale.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn unknown_parameter_and_kind_mismatch_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        tmp.path(),
        "mix",
        r#"{"input": {"generator": "uniform", "n": 3, "k": 2}, "params": {"epsilom": 0.1}, "seed": 1}"#,
        &[],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("epsilom"));
    let out = run(
        tmp.path(),
        "mix",
        r#"{"kind": "walk", "input": {"generator": "uniform", "n": 3, "k": 2}, "seed": 1}"#,
        &[],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exchange_and_mlsi_on_rank_one() {
    let tmp = tempfile::tempdir().unwrap();
    let input = r#"{"generator": "rank_one", "u": [0.3, 0.4, 0.2], "h": [0.1, 0.0, -0.2]}"#;
    let out = run(tmp.path(), "exchange", &format!(r#"{{"input": {input}, "seed": 1}}"#), &[], None);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(summary(&run_dir(&out))["report"]["holds"], true);
    let out = run(tmp.path(), "mlsi", &format!(r#"{{"input": {input}, "seed": 1}}"#), &[], None);
    let s = summary(&run_dir(&out));
    assert!(s["lower"].as_f64().unwrap() <= s["upper"].as_f64().unwrap());
}
