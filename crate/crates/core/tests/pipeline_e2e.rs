//! End-to-end pipeline runs at small scale, plus CLI exit-code behavior.

use std::fs;
use std::path::Path;
use std::process::Command;

use cfgadv_core::corpus::{ClassProfile, CorpusSpec};
use cfgadv_core::pipeline::{Pipeline, Settings};

fn small_settings(seed: u64) -> Settings {
    let mut s = Settings::defaults(seed);
    s.corpus = CorpusSpec {
        benign: ClassProfile {
            count: 30,
            median_nodes: 30.0,
            sigma: 0.5,
            p_branch: 0.15,
            p_back: 0.02,
        },
        malicious: ClassProfile {
            count: 46,
            median_nodes: 10.0,
            sigma: 0.5,
            p_branch: 0.6,
            p_back: 0.25,
        },
        seed,
    };
    s.train.epochs = 60;
    s.attack.cw_binary_search_steps = 4;
    s.attack.cw_inner_iterations = 60;
    s.density_levels = vec![0, 5, 20];
    s
}

#[test]
fn full_pipeline_produces_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::new(dir.path(), 11, small_settings(11));

    assert_eq!(p.gen_corpus().unwrap(), 76);
    assert_eq!(p.extract().unwrap(), 76);
    let metrics = p.train().unwrap();
    assert!(metrics.accuracy > 0.5, "sanity: better than chance");
    let rows = p.attack_osaa().unwrap();
    assert_eq!(rows.len(), 6);
    let gea = p.attack_gea().unwrap();
    assert_eq!(gea.len(), 6, "two directions x three strategies");
    let density = p.density_sweep().unwrap();
    assert_eq!(density.len(), 3);
    let report = p.report().unwrap();
    assert!(report.contains("Attack Method"));
    assert!(report.contains("Mal2Ben"));

    for artifact in [
        "corpus/manifest.json",
        "features.csv",
        "split.json",
        "normalizer.json",
        "model.json",
        "train_log.csv",
        "metrics.json",
        "osaa_suite.csv",
        "osaa_outcomes.jsonl",
        "gea_results.csv",
        "gea_outcomes.jsonl",
        "density_sweep.csv",
        "report.txt",
        "manifests/gen-corpus.json",
        "manifests/report.json",
    ] {
        assert!(dir.path().join(artifact).exists(), "missing {artifact}");
    }

    // Every manifest carries the run id its artifacts reference.
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("manifests/attack-osaa.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["run_id"], "attack-osaa-seed11");
    let jsonl = fs::read_to_string(dir.path().join("osaa_outcomes.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
    assert_eq!(first["run_id"], "attack-osaa-seed11");
    assert_eq!(first["functionality_preserving"], false);

    let gea_jsonl = fs::read_to_string(dir.path().join("gea_outcomes.jsonl")).unwrap();
    let first: serde_json::Value =
        serde_json::from_str(gea_jsonl.lines().next().unwrap()).unwrap();
    assert_eq!(first["functionality_preserving"], true);
}

#[test]
fn train_rerun_yields_identical_model_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::new(dir.path(), 5, small_settings(5));
    p.gen_corpus().unwrap();
    p.extract().unwrap();
    p.train().unwrap();
    let first = fs::read(dir.path().join("model.json")).unwrap();
    p.train().unwrap();
    let second = fs::read(dir.path().join("model.json")).unwrap();
    assert_eq!(first, second);
}

fn cfgadv(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_cfgadv"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

#[test]
fn cli_report_on_empty_directory_names_attack_osaa() {
    let dir = tempfile::tempdir().unwrap();
    let output = cfgadv(&["report"], dir.path());
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("attack-osaa"), "stderr: {stderr}");
}

#[test]
fn cli_rejects_bad_config_with_usage_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.ini");
    fs::write(&config, "[train]\nepochs soon\n").unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_cfgadv"))
        .args(["gen-corpus", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("line 2"), "stderr: {stderr}");
}

#[test]
fn cli_unknown_config_key_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("typo.ini");
    fs::write(&config, "[train]\nepochz = 9\n").unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_cfgadv"))
        .args(["gen-corpus", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("epochz"));
}

#[test]
fn cli_small_smoke_run_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.ini");
    fs::write(
        &config,
        "[corpus]\nbenign_count = 20\nmalicious_count = 30\n\
         benign_median_nodes = 30\nmalicious_median_nodes = 10\n\
         benign_sigma = 0.5\nmalicious_sigma = 0.5\n\
         [train]\nepochs = 40\n\
         [attack]\nmethods = pgd,jsma\n\
         [density]\nlevels = 0,5\n",
    )
    .unwrap();
    let out = dir.path().join("run");
    for sub in [
        "gen-corpus",
        "extract",
        "train",
        "attack-osaa",
        "attack-gea",
        "density-sweep",
        "report",
    ] {
        let output = Command::new(env!("CARGO_BIN_EXE_cfgadv"))
            .args([sub, "--seed", "3", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert_eq!(
            output.status.code(),
            Some(0),
            "{sub} failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    }
    assert!(out.join("report.txt").exists());
}
