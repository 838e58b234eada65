use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use coarselab::embed::spectral_embedding;
use coarselab::spectral::random_regular;
use coarselab::{EmbeddedCloud, Graph};
use serde_json::Value;
use tempfile::TempDir;

fn coarselab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coarselab"))
        .args(args)
        .current_dir(dir)
        .env_remove("COARSELAB_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn small_config(dir: &Path) -> String {
    write(dir, "small.toml", "family = [16]\ndegree = 3\n").display().to_string()
}

#[test]
fn gen_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    for out in ["a", "b"] {
        let o = coarselab(&["gen", "--config", &cfg, "--seed", "7", "--out", out], tmp.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = fs::read(tmp.path().join("a/graphs/n0016.json")).unwrap();
    let b = fs::read(tmp.path().join("b/graphs/n0016.json")).unwrap();
    assert_eq!(a, b);
    let g = Graph::from_json(&String::from_utf8(a).unwrap()).unwrap();
    assert_eq!((g.n(), g.edges().len()), (16, 24));
    assert!(g.is_regular() && g.is_connected());
}

#[test]
fn odd_degree_sum_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "family = [5]\ndegree = 3\n");
    let o = coarselab(&["gen", "--config", cfg.to_str().unwrap(), "--seed", "1"], tmp.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn missing_seed_and_unknown_keys_are_config_errors() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&coarselab(&["gen"], tmp.path())), 2);
    let cfg = write(tmp.path(), "typo.toml", "seed = 1\nfamliy = [16]\n");
    assert_eq!(code(&coarselab(&["gen", "--config", cfg.to_str().unwrap()], tmp.path())), 2);
}

#[test]
fn spectra_of_named_graphs() {
    let tmp = TempDir::new().unwrap();
    let c6 = write(tmp.path(), "c6.json", &Graph::cycle(6).to_json());
    let k4 = write(tmp.path(), "k4.json", &Graph::complete(4).to_json());
    let big = write(tmp.path(), "rr30.json", &random_regular(30, 3, 5).unwrap().to_json());
    let o = coarselab(
        &[
            "spectra", "--seed", "1", "--out", "out", "--max-exact-n", "24",
            "--graph", c6.to_str().unwrap(), "--graph", k4.to_str().unwrap(), "--graph", big.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let c6 = json(&tmp.path().join("out/spectra/c6.json"));
    assert!((c6["lambda1"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let k4 = json(&tmp.path().join("out/spectra/k4.json"));
    assert_eq!(k4["cheeger"]["method"], "exact");
    assert!((k4["cheeger"]["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let rr = json(&tmp.path().join("out/spectra/rr30.json"));
    assert_eq!(rr["cheeger"]["method"], "spectral");
}

#[test]
fn disconnected_graph_exits_3() {
    let tmp = TempDir::new().unwrap();
    let g = write(tmp.path(), "split.json", r#"{"n":4,"degree":1,"edges":[[0,1],[2,3]]}"#);
    let o = coarselab(&["spectra", "--seed", "1", "--graph", g.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 3);
}

#[test]
fn corrupt_graph_exits_4_with_location() {
    let tmp = TempDir::new().unwrap();
    let g = write(tmp.path(), "broken.json", "{\"n\": 4,\n");
    let o = coarselab(&["spectra", "--seed", "1", "--graph", g.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 4);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("broken.json") && err.contains("line 2"), "{err}");
}

const TRIANGLE: &str = r#"{"metric":"uniform","lambda":1.0,"simplices":[[0,1,2]]}"#;
const PATH: &str = r#"{"metric":"uniform","lambda":1.0,"simplices":[[0,1],[1,2]]}"#;

/// Vertex map restricted to the vertices of the original domain.
fn base_vertex_map(approx: &Value) -> Vec<(u64, u64)> {
    let mut out: Vec<(u64, u64)> = approx["carriers"]
        .as_array()
        .unwrap()
        .iter()
        .zip(approx["vertex_map"].as_array().unwrap())
        .filter_map(|(c, g)| {
            let c = c.as_array().unwrap();
            (c.len() == 1).then(|| (c[0][0].as_u64().unwrap(), g.as_u64().unwrap()))
        })
        .collect();
    out.sort_unstable();
    out
}

#[test]
fn approx_of_identity_is_identity() {
    let tmp = TempDir::new().unwrap();
    let map = format!(r#"{{"domain":{TRIANGLE},"codomain":{TRIANGLE},"images":[[[0,1.0]],[[1,1.0]],[[2,1.0]]]}}"#);
    let p = write(tmp.path(), "id.json", &map);
    let o = coarselab(&["approx", "--seed", "1", "--out", "out", "--map", p.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a = json(&tmp.path().join("out/approx/approximation.json"));
    assert_eq!(base_vertex_map(&a), vec![(0, 0), (1, 1), (2, 2)]);
    let map = a["vertex_map"].as_array().unwrap();
    let carriers = a["carriers"].as_array().unwrap();
    for (g, c) in map.iter().zip(carriers) {
        let support: Vec<u64> = c.as_array().unwrap().iter().map(|w| w[0].as_u64().unwrap()).collect();
        assert!(support.contains(&g.as_u64().unwrap()));
    }
}

#[test]
fn approx_recovers_a_perturbed_simplicial_map() {
    let tmp = TempDir::new().unwrap();
    let map = format!(
        r#"{{"domain":{PATH},"codomain":{PATH},"images":[[[0,0.9],[1,0.1]],[[1,1.0]],[[1,0.1],[2,0.9]]]}}"#
    );
    let p = write(tmp.path(), "perturbed.json", &map);
    let o = coarselab(&["approx", "--seed", "1", "--out", "out", "--map", p.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a = json(&tmp.path().join("out/approx/approximation.json"));
    assert_eq!(base_vertex_map(&a), vec![(0, 0), (1, 1), (2, 2)]);

    let o = coarselab(
        &["approx", "--seed", "1", "--out", "out", "--map", p.to_str().unwrap(), "--depth", "1"],
        tmp.path(),
    );
    assert_eq!(code(&o), 5);
}

#[test]
fn audit_is_scale_invariant() {
    let tmp = TempDir::new().unwrap();
    let g = random_regular(64, 4, 3).unwrap();
    let graph = write(tmp.path(), "g.json", &g.to_json());
    let vectors = spectral_embedding(&g, 3);
    let mut verdicts = Vec::new();
    for scale in [1.0, 10.0] {
        let cloud = EmbeddedCloud {
            provenance: "spectral".into(),
            labels: (0..g.n()).map(|i| i.to_string()).collect(),
            vectors: vectors.iter().map(|v| v.iter().map(|x| x * scale).collect()).collect(),
        };
        let path = write(tmp.path(), &format!("cloud{scale}.json"), &cloud.to_json());
        let out = format!("out{scale}");
        let o = coarselab(
            &["audit", "--seed", "1", "--out", &out, "--graph", graph.to_str().unwrap(), "--cloud", path.to_str().unwrap()],
            tmp.path(),
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let csv = fs::read_to_string(tmp.path().join(&out).join("audit/verdict.csv")).unwrap();
        let row: Vec<String> = csv.lines().nth(1).unwrap().split(',').map(String::from).collect();
        verdicts.push(row);
    }
    // source, n, lambda1, c0, threshold, min_far_sq, bound_4c0, pass
    for col in [0, 1, 7] {
        assert_eq!(verdicts[0][col], verdicts[1][col]);
    }
    let (a, b): (f64, f64) = (verdicts[0][5].parse().unwrap(), verdicts[1][5].parse().unwrap());
    assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    assert_eq!(verdicts[0][7], "true");
}

#[test]
fn audit_flags_require_each_other() {
    let tmp = TempDir::new().unwrap();
    let o = coarselab(&["audit", "--seed", "1", "--graph", "g.json"], tmp.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn report_with_defaults_passes() {
    let tmp = TempDir::new().unwrap();
    let o = coarselab(&["report", "--seed", "3", "--out", "out"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&tmp.path().join("out/report.json"));
    assert_eq!(report["schema"], "coarselab.report/1");
    assert_eq!(report["failed"].as_array().unwrap().len(), 0);
    for stage in ["gen", "spectra", "poincare", "cover", "nerve", "embed", "audit", "approx"] {
        assert!(report["stages"][stage].is_object(), "{stage}");
    }
    for file in ["audit/verdict.csv", "audit/census.csv", "spectra/family.csv", "nerve/n0016_s0.off"] {
        assert!(tmp.path().join("out").join(file).exists(), "{file}");
    }
}

#[test]
fn out_dir_from_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let o = Command::new(env!("CARGO_BIN_EXE_coarselab"))
        .args(["gen", "--config", &cfg, "--seed", "2"])
        .current_dir(tmp.path())
        .env("COARSELAB_OUT", "from-env")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(tmp.path().join("from-env/graphs/n0016.json").exists());
}
