use std::fs;

use coarselab::pipeline::{load_family, run_all, stage_gen, ExperimentConfig, Overrides};
use coarselab::Error;

fn cfg(text: &str, out: &std::path::Path) -> coarselab::Result<ExperimentConfig> {
    let o = Overrides { seed: Some(5), out: Some(out.to_path_buf()), ..Default::default() };
    ExperimentConfig::resolve(Some(text), &o, None)
}

#[test]
fn invalid_configs_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    for text in [
        "family = []",
        "family = [32, 16]",
        "family = [16, 16]",
        "trials = 0",
        "embedding_dim = 0",
        "scales = [-1.0]",
        "family = [5]\ndegree = 3",
        "family = [4]\ndegree = 4",
        "family = \"16\"",
    ] {
        let e = cfg(text, tmp.path()).expect_err(text);
        assert_eq!(e.exit_code(), 2, "{text}: {e}");
    }
}

#[test]
fn cli_overrides_beat_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Overrides { seed: Some(9), trials: Some(7), max_exact_n: Some(10), out: None };
    let c = ExperimentConfig::resolve(Some("seed = 1\ntrials = 3\nmax_exact_n = 20"), &o, Some(tmp.path().into()))
        .unwrap();
    assert_eq!((c.seed, c.trials, c.max_exact_n), (9, 7, 10));
    assert_eq!(c.out, tmp.path());
}

#[test]
fn stored_family_is_reloaded() {
    let tmp = tempfile::tempdir().unwrap();
    let c = cfg("family = [16, 32]\ndegree = 3", tmp.path()).unwrap();
    let (graphs, out) = stage_gen(&c).unwrap();
    assert!(out.passed());
    let loaded = load_family(&c).unwrap();
    assert_eq!(graphs.len(), loaded.len());
    for (a, b) in graphs.iter().zip(&loaded) {
        assert_eq!(a.edges(), b.edges());
    }
    fs::write(tmp.path().join("graphs/n0016.json"), "{").unwrap();
    assert!(matches!(load_family(&c), Err(Error::Parse { .. })));
}

#[test]
fn different_seeds_give_different_families() {
    let tmp = tempfile::tempdir().unwrap();
    let a = stage_gen(&cfg("family = [32]", &tmp.path().join("a")).unwrap()).unwrap().0;
    let o = Overrides { seed: Some(6), out: Some(tmp.path().join("b")), ..Default::default() };
    let b = stage_gen(&ExperimentConfig::resolve(Some("family = [32]"), &o, None).unwrap()).unwrap().0;
    assert_ne!(a[0].edges(), b[0].edges());
}

#[test]
fn small_run_passes_every_check() {
    let tmp = tempfile::tempdir().unwrap();
    let c = cfg("family = [16, 32, 64]\ntrials = 20\nscales = [2.0, 4.0]", tmp.path()).unwrap();
    let report = run_all(&c).unwrap();
    assert!(report.passed(), "{:?}", report.failed);
    assert!(report.checks > 20);
    let text = fs::read_to_string(tmp.path().join("report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["config"]["seed"], 5);
}
