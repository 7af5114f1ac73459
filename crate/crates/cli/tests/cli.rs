use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gbsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gbsim")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = gbsim(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn matrix_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split_whitespace().map(|t| t.parse().unwrap()).collect())
        .collect()
}

#[test]
fn stepwise_commands_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-circuit", "--modes", "3", "--r", "0.8", "--eta", "0.5", "--seed", "0", "--out", "circ"]);
    let stats = ok(d, &["decompose", "--cov", "circ/cov.txt", "--out", "vp.txt,w.txt"]);
    let stats: serde_json::Value = serde_json::from_str(stats.trim()).unwrap();
    assert!(stats["stats"]["reconstruction"].as_f64().unwrap() < 1e-8);
    ok(d, &["build-mps", "--vp", "vp.txt", "--out", "mps", "--chi", "16", "--d", "5"]);
    for name in ["a.txt", "b.txt"] {
        ok(d, &["sample", "--mps", "mps", "--w", "w.txt", "--shots", "500", "--seed", "9", "--out", name]);
    }
    let single = ok(d, &["--threads", "1", "sample", "--mps", "mps", "--w", "w.txt", "--shots", "500", "--seed", "9"]);
    let a = fs::read(d.join("a.txt")).unwrap();
    assert_eq!(a, fs::read(d.join("b.txt")).unwrap());
    assert_eq!(a, single.into_bytes());
    assert!(String::from_utf8(a).unwrap().starts_with("# modes=3 shots=500 seed=9 detector=pnr\n"));

    let tvd = ok(d, &["benchmark", "tvd", "--samples", "a.txt", "--samples-b", "b.txt", "--csv", "tvd.csv"]);
    assert!(tvd.contains("0e0"), "{tvd}");
    let csv = fs::read_to_string(d.join("tvd.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("samples,reference,tvd"));
    let xeb = ok(d, &["benchmark", "xeb", "--samples", "a.txt", "--cov", "circ/cov.txt"]);
    assert!(xeb.lines().last().unwrap().trim_start().starts_with("all"));
}

#[test]
fn threshold_samples_are_clicks() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-circuit", "--modes", "2", "--r", "1.0", "--eta", "0.8", "--out", "c"]);
    ok(d, &["decompose", "--cov", "c/cov.txt", "--out", "vp.txt,w.txt"]);
    ok(d, &["build-mps", "--vp", "vp.txt", "--out", "mps", "--chi", "8", "--d", "5"]);
    let text = ok(d, &["sample", "--mps", "mps", "--w", "w.txt", "--shots", "200", "--threshold"]);
    assert!(text.starts_with("# modes=2 shots=200 seed=0 detector=threshold"));
    assert!(text.lines().skip(1).flat_map(|l| l.split_whitespace()).all(|t| t == "0" || t == "1"));
}

#[test]
fn generated_circuits() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-circuit", "--modes", "3", "--r", "0.4", "--eta", "0.9", "--ensemble", "brickwork", "--depth", "0", "--out", "bw"]);
    let u = matrix_rows(&fs::read_to_string(d.join("bw/unitary.txt")).unwrap());
    for (i, row) in u.iter().enumerate() {
        for (j, pair) in row.chunks(2).enumerate() {
            assert_eq!(pair, [if i == j { 1.0 } else { 0.0 }, 0.0]);
        }
    }

    // One TMSV pair without loss: the central block is a two-mode squeezed vacuum.
    ok(d, &["gen-circuit", "--modes", "2", "--r", "0.5", "--eta", "1", "--ensemble", "tmsv-worst-case", "--k", "1", "--out", "tm"]);
    let v = matrix_rows(&fs::read_to_string(d.join("tm/cov.txt")).unwrap());
    let (c, s) = (1.0f64.cosh(), 1.0f64.sinh());
    let expect = [[c, s, 0.0, 0.0], [s, c, 0.0, 0.0], [0.0, 0.0, c, -s], [0.0, 0.0, -s, c]];
    for i in 0..4 {
        for j in 0..4 {
            assert!((v[i][j] - expect[i][j]).abs() < 1e-12, "({i},{j}): {}", v[i][j]);
        }
    }

    let first = ok(d, &["gen-circuit", "--modes", "4", "--r", "0.7", "--eta", "0.6", "--seed", "5", "--out", "h1"]);
    let second = ok(d, &["gen-circuit", "--modes", "4", "--r", "0.7", "--eta", "0.6", "--seed", "5", "--out", "h2"]);
    let hash = |s: &str| serde_json::from_str::<serde_json::Value>(s.trim()).unwrap()["cov_sha256"].clone();
    assert_eq!(hash(&first), hash(&second));
}

#[test]
fn estimate_emits_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["estimate", "--mode", "worst-case", "--k", "1,2", "--r", "1.0", "--eta", "0.5", "--eps", "0.01"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("k,r,eta,eps,s,"));
    assert!(lines[1].starts_with("1,1,0.5,0.01,"));
}

#[test]
fn hafnian_of_a_perfect_matching() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("x.txt"), "2\n0 0 2 0.5\n2 0.5 0 0\n").unwrap();
    assert_eq!(ok(dir.path(), &["hafnian", "--matrix", "x.txt"]).trim(), "2e0 5e-1");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // Not a physical covariance matrix.
    fs::write(d.join("bad.txt"), "1\n0.5 0\n0 0.5\n").unwrap();
    assert_eq!(gbsim(d, &["decompose", "--cov", "bad.txt"]).status.code(), Some(2));
    fs::write(d.join("garbled.txt"), "1\n1 x\n0 1\n").unwrap();
    assert_eq!(gbsim(d, &["decompose", "--cov", "garbled.txt"]).status.code(), Some(2));
    fs::write(d.join("x.txt"), "2\n0 0 1 0\n1 0 0 0\n").unwrap();
    assert_eq!(gbsim(d, &["hafnian", "--matrix", "x.txt", "--max", "0"]).status.code(), Some(4));
    assert_eq!(gbsim(d, &["estimate", "--mode", "fancy"]).status.code(), Some(2));
    let missing = gbsim(d, &["sample", "--mps", "nope", "--w", "w.txt", "--shots", "1"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope"));
}

#[test]
fn run_uses_scratch_directory() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = r#"{
        "out_dir": "run1",
        "circuit": {"modes": 3, "r": [0.8], "eta": [0.5], "ensemble": {"kind": "global-haar"}},
        "seed": 4, "chi": 8, "d_build": 5, "d_sample": 8, "shots": 300, "oracle_cutoff": 4
    }"#;
    fs::write(d.join("run.json"), config).unwrap();
    let scratch = d.join("scratch");
    let out = Command::new(env!("CARGO_BIN_EXE_gbsim"))
        .current_dir(d)
        .env("GBSIM_SCRATCH", &scratch)
        .env("GBSIM_THREADS", "2")
        .args(["run", "--config", "run.json"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["circuit/cov.txt", "decompose/vp.txt", "mps/manifest.json", "sample/samples.txt", "benchmark/report.json"] {
        assert!(scratch.join("run1").join(f).is_file(), "{f} missing");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(scratch.join("run1/sample/stage.json")).unwrap()).unwrap();
    assert_eq!(manifest["global_seed"], 4);
    assert!(manifest["inputs"]["decompose/w.txt"].is_string());
}
