//! Drives the `dnrisk` binary on a reduced configuration.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;
use sha2::{Digest, Sha256};

const SMALL_CONFIG: &str = r#"
seed = 7

[input]
synthetic = "default"

[lasso]
k = 5
n_lambdas = 30

[grid]
k = 5

[grid.gbdt]
learning_rate = [0.1]
n_estimators = [60]
max_depth = [3]
subsample = [0.8]
colsample_bytree = [0.8]
gamma = [0.0]
reg_lambda = [1.0]
scale_pos_weight = [1.0]

[grid.random_forest]
n_estimators = [30]
max_depth = [5]
min_samples_split = [2]
min_samples_leaf = [1, 2]

[grid.decision_tree]
max_depth = [3]
min_samples_split = [2]
min_samples_leaf = [1]

[grid.logistic]
c = [1.0]
tol = [0.0001]

[evaluation]
n_bootstrap = 200
"#;

fn dnrisk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnrisk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path) -> PathBuf {
    let p = dir.join("small.toml");
    std::fs::write(&p, SMALL_CONFIG).unwrap();
    p
}

/// One shared report, produced on first use.
fn report() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let root = tempfile::tempdir().unwrap().keep();
        let cfg = write_config(&root);
        let out = root.join("report");
        let o = dnrisk(&["run", "--config", path_str(&cfg), "--out", path_str(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    })
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().display().to_string(),
                    std::fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn run_writes_a_complete_report() {
    let dir = report();
    let m = manifest(dir);
    assert_eq!(m["status"], "ok");
    assert_eq!(m["seed"], 7);
    for name in [
        "cohort.csv",
        "schema.toml",
        "synth_marginals.csv",
        "preprocessing.json",
        "baseline_table.csv",
        "split.csv",
        "scaler.json",
        "lasso_path.csv",
        "cv_curve.csv",
        "lasso.json",
        "grid_results.csv",
        "roc_gbdt.csv",
        "roc_random_forest.csv",
        "roc_decision_tree.csv",
        "roc_logistic.csv",
        "dca.csv",
        "calibration.csv",
        "delong.json",
        "best_model.json",
        "shap_values.csv",
        "shap_summary.csv",
        "shap_interactions/mean_abs.csv",
        "eval_summary.json",
        "config.toml",
    ] {
        assert!(dir.join(name).is_file(), "missing {name}");
    }
    for entry in m["outputs"].as_array().unwrap() {
        let bytes = std::fs::read(dir.join(entry["file"].as_str().unwrap())).unwrap();
        assert_eq!(
            entry["sha256"].as_str().unwrap(),
            format!("{:x}", Sha256::digest(&bytes))
        );
    }
}

#[test]
fn sequential_and_parallel_reports_match() {
    let root = tempfile::tempdir().unwrap();
    let cfg = write_config(root.path());
    let out = root.path().join("seq");
    let o = dnrisk(&[
        "run",
        "--sequential",
        "--config",
        path_str(&cfg),
        "--out",
        path_str(&out),
    ]);
    assert!(o.status.success());
    // other tests add figures/ to the shared report concurrently
    let core = |d: &Path| -> Vec<_> { tree(d).into_iter().filter(|(n, _)| !n.starts_with("figures")).collect() };
    assert!(core(&out) == core(report()));
}

#[test]
fn missing_schema_fails_at_load() {
    let root = tempfile::tempdir().unwrap();
    std::fs::write(root.path().join("data.csv"), "a,DN\n1,0\n2,1\n").unwrap();
    let cfg = SMALL_CONFIG.replace(r#"synthetic = "default""#, r#"csv = "data.csv""#);
    std::fs::write(root.path().join("c.toml"), cfg).unwrap();
    let out = root.path().join("report");
    let o = dnrisk(&[
        "run",
        "--config",
        path_str(&root.path().join("c.toml")),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let m = manifest(&out);
    assert_eq!(m["status"], "failed");
    assert_eq!(m["stage"], "load");
}

#[test]
fn invalid_config_exits_2() {
    let root = tempfile::tempdir().unwrap();
    let p = root.path().join("bad.toml");
    std::fs::write(&p, "seed = 1\n[input]\n").unwrap();
    let o = dnrisk(&[
        "run",
        "--config",
        path_str(&p),
        "--out",
        path_str(&root.path().join("r")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn figure_data_from_report() {
    let dir = report();
    for fig in ["roc", "dca", "calibration", "shap-summary"] {
        let o = dnrisk(&["figures", "--report", path_str(dir), "--figure", fig]);
        assert!(o.status.success(), "{fig}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let roc = std::fs::read_to_string(dir.join("figures/roc.csv")).unwrap();
    assert!(roc.starts_with("model,fpr,tpr"));
    assert!(roc.contains("gbdt,") && roc.contains("logistic,"));

    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("shap_summary.json")).unwrap()).unwrap();
    let top = summary["features"][0]["feature"].as_str().unwrap();
    let second = summary["features"][1]["feature"].as_str().unwrap();
    let o = dnrisk(&[
        "figures",
        "--report",
        path_str(dir),
        "--figure",
        "shap-dependence",
        "--feature",
        top,
        "--color",
        second,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn explain_recomputes_saved_attributions() {
    let dir = report();
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("explain");
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("shap_summary.json")).unwrap()).unwrap();
    let pair = format!(
        "{},{}",
        summary["features"][0]["feature"].as_str().unwrap(),
        summary["features"][1]["feature"].as_str().unwrap()
    );
    let o = dnrisk(&[
        "explain",
        "--report",
        path_str(dir),
        "--out",
        path_str(&out),
        "--pair",
        &pair,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(
        std::fs::read(out.join("shap_values.csv")).unwrap() == std::fs::read(dir.join("shap_values.csv")).unwrap(),
        "reloaded model gives different attributions"
    );
    assert!(out.join("pair_interactions.csv").is_file());
}

#[test]
fn missing_artifact_is_reported() {
    let root = tempfile::tempdir().unwrap();
    let o = dnrisk(&["figures", "--report", path_str(root.path()), "--figure", "dca"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing report artifact `dca.csv`"));
}

#[test]
fn synth_is_seeded() {
    let root = tempfile::tempdir().unwrap();
    let (a, b, c) = (root.path().join("a"), root.path().join("b"), root.path().join("c"));
    for (dir, seed) in [(&a, "3"), (&b, "3"), (&c, "4")] {
        let o = dnrisk(&["synth", "--seed", seed, "--out", path_str(dir)]);
        assert!(o.status.success());
    }
    let read = |d: &Path| std::fs::read(d.join("cohort.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    let schema = std::fs::read_to_string(a.join("schema.toml")).unwrap();
    assert!(schema.contains("DN"));
}
