//! Subcommands run end to end on a small fixture.

use std::path::{Path, PathBuf};
use std::process::Command;

use hlab::cli::read_hardness_csv;
use hlab::dynamics::Estimator;
use hlab::resampling::ResamplingPlan;

fn hlab(args: &[&str]) -> i32 {
    let mut full = vec!["hlab"];
    full.extend_from_slice(args);
    hlab::cli::run(full)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(p).unwrap();
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

fn manifest(dir: &Path, cmd: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{cmd}.manifest.json"))).unwrap()).unwrap()
}

/// Synthesised blobs and two short training runs.
struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let d = s(dir.path());
        assert_eq!(hlab(&["synth", "--per-class", "60", "--seed", "3", "--out-dir", d]), 0);
        let train = dir.path().join("train.hfea");
        let test = dir.path().join("test.hfea");
        let code = hlab(&[
            "train-ref", "--train", s(&train), "--eval", s(&test), "--models", "2", "--epochs", "12",
            "--decay-epochs", "4,8", "--out-dir", d,
        ]);
        assert_eq!(code, 0);
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn out(&self) -> &str {
        s(self.dir.path())
    }
}

#[test]
fn pipeline_through_the_subcommands() {
    let fx = Fixture::new();
    let d = fx.out();
    let (m0, m1) = (fx.path("model_0.hdyn"), fx.path("model_1.hdyn"));
    let train = fx.path("train.hfea");
    for name in ["blob_spec.json", "features.hfea", "test.hfea", "split.csv", "eval_metrics.csv", "class_recall.csv"] {
        assert!(fx.path(name).exists(), "{name}");
    }
    assert_eq!(csv_rows(&fx.path("split.csv")).len(), 240);

    assert_eq!(hlab(&["estimate", "--estimator", "aum", "--dynamics", s(&m0), s(&m1), "--out-dir", d]), 0);
    let h = read_hardness_csv(&fx.path("hardness_aum.csv")).unwrap();
    assert_eq!((h.estimator, h.ensemble_size, h.values.len()), (Estimator::Aum, 2, 192));
    let m = manifest(fx.dir.path(), "estimate");
    assert_eq!(m["status"], "ok");
    assert_eq!(m["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(m["outputs"], serde_json::json!(["hardness_aum.csv"]));
    assert_eq!(m["parameters"]["probe_epoch"], 20);

    let hard = fx.path("hardness_aum.csv");
    assert_eq!(hlab(&["ratios", "--hardness", s(&hard), "--features", s(&train), "--alpha", "0", "--out-dir", d]), 0);
    for row in csv_rows(&fx.path("ratios.csv")) {
        assert_eq!(row[1], row[5], "alpha 0 keeps class sizes: {row:?}");
    }

    assert_eq!(
        hlab(&["resample", "--hardness", s(&hard), "--features", s(&train), "--strategy", "smote", "--materialize", "--out-dir", d]),
        0
    );
    let plan = ResamplingPlan::from_json(&std::fs::read_to_string(fx.path("resample_plan.json")).unwrap()).unwrap();
    assert_eq!(plan.total(), 192);
    let resampled = hlab::geometry::FeatureSet::load(fx.path("resampled.hfea")).unwrap();
    assert_eq!(resampled.n_samples(), 192);

    for mode in ["dlp", "clp"] {
        assert_eq!(
            hlab(&["prune", "--hardness", s(&hard), "--features", s(&train), "--mode", mode, "--rate", "0.25,0.5", "--out-dir", d]),
            0
        );
    }
    let half = fx.path("prune_clp_0.5.json");
    let plan: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&half).unwrap()).unwrap();
    assert_eq!(plan["pruned_ids"].as_array().unwrap().len(), 96);
    assert_eq!(
        hlab(&["overlap", "--a", s(&fx.path("prune_dlp_0.5.json")), "--b", s(&half), "--out-dir", d]),
        0
    );
    let o: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(fx.path("overlap.json")).unwrap()).unwrap();
    assert!(o["intersection"].as_u64().unwrap() <= 96);

    assert_eq!(
        hlab(&["stability", "--task", "pruning", "--dynamics", s(&m0), s(&m1), "--features", s(&train), "--threshold", "100", "--out-dir", d]),
        0
    );
    let rows = csv_rows(&fx.path("stability.csv"));
    assert!(rows.iter().all(|r| r[0] == "1"), "one transition, 1 -> 2");
    assert_eq!(rows.len(), 3);
    assert_eq!(
        hlab(&[
            "stability", "--task", "class-accuracy", "--dynamics", s(&m0), s(&m1), "--features", s(&train),
            "--eval-metrics", s(&fx.path("eval_metrics.csv")), "--out-dir", d,
        ]),
        0
    );

    assert_eq!(
        hlab(&["denoise", "--hardness", s(&hard), "--features", s(&train), "--mode", "fraction", "--fraction", "0.1", "--out-dir", d]),
        0
    );
    let p: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(fx.path("denoise_plan.json")).unwrap()).unwrap();
    assert_eq!(p["removed_ids"].as_array().unwrap().len(), 19);

    assert_eq!(hlab(&["metrics", "--features", s(&train), "--k", "10", "--out-dir", d]), 0);
    let rows = csv_rows(&fx.path("metrics.csv"));
    assert_eq!(rows.len(), 192 * 12);
    assert_eq!(csv_rows(&fx.path("class_metrics.csv")).len(), 4 * 3);

    assert_eq!(
        hlab(&["correlate", "--hardness", s(&hard), "--features", s(&train), "--recall", s(&fx.path("class_recall.csv")), "--out-dir", d]),
        0
    );
    let c: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(fx.path("spearman.json")).unwrap()).unwrap();
    assert_eq!(c["exact"], true);
}

#[test]
fn module_errors_exit_one_and_still_write_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.hdyn");
    let code = hlab(&["estimate", "--estimator", "el2n", "--dynamics", s(&missing), "--out-dir", s(dir.path())]);
    assert_eq!(code, 1);
    let m = manifest(dir.path(), "estimate");
    assert_eq!(m["status"], "error");
    assert!(m["error"].as_str().unwrap().contains("nope.hdyn"));
}

#[test]
fn usage_errors_exit_two() {
    let bin = env!("CARGO_BIN_EXE_hlab");
    let out = Command::new(bin).args(["prune", "--mode", "dlp"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(bin).args(["estimate", "--estimator", "bogus", "--dynamics", "x"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("report"));
}

#[test]
fn binary_honours_thread_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_hlab"))
        .args(["synth", "--per-class", "10", "--out-dir", s(dir.path())])
        .env("HLAB_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(manifest(dir.path(), "synth")["threads"], 1);
}

#[test]
fn alpha_above_safe_range_is_reported() {
    let fx = Fixture::new();
    let hard = fx.path("hardness_aum.csv");
    let (m0, m1) = (fx.path("model_0.hdyn"), fx.path("model_1.hdyn"));
    assert_eq!(hlab(&["estimate", "--estimator", "aum", "--dynamics", s(&m0), s(&m1), "--out-dir", fx.out()]), 0);
    let code = hlab(&["ratios", "--hardness", s(&hard), "--features", s(&fx.path("train.hfea")), "--alpha", "1000", "--out-dir", fx.out()]);
    assert_eq!(code, 1);
    let m = manifest(fx.dir.path(), "ratios");
    assert!(m["error"].as_str().unwrap().contains("alpha"), "{m}");
}
