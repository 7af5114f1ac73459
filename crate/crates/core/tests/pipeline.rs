use lossy_gbs::io::read_samples;
use lossy_gbs::pipeline::{reference_circuit, run_pipeline, CircuitConfig, Ensemble, RunConfig, Stage, StageManifest};
use lossy_gbs::Error;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

fn small_config(dir: &Path, circuit: CircuitConfig) -> RunConfig {
    let mut cfg = RunConfig::new(dir);
    cfg.circuit = Some(circuit);
    cfg.seed = 11;
    cfg.chi = 16;
    cfg.d_build = 5;
    cfg.d_sample = 8;
    cfg.shots = 2000;
    cfg.oracle_cutoff = 5;
    cfg
}

/// Every file under `root`, with `wall_time_s` removed from stage manifests.
fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
                continue;
            }
            let mut bytes = fs::read(&p).unwrap();
            if p.file_name().unwrap() == "stage.json" {
                let mut m: StageManifest = serde_json::from_slice(&bytes).unwrap();
                m.wall_time_s = 0.0;
                bytes = serde_json::to_vec(&m).unwrap();
            }
            out.insert(p.strip_prefix(root).unwrap().display().to_string(), bytes);
        }
    }
    out
}

#[test]
fn reference_run_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run_pipeline(&small_config(a.path(), reference_circuit())).unwrap();
    run_pipeline(&small_config(b.path(), reference_circuit())).unwrap();
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    for (k, v) in &sa {
        assert!(v == &sb[k], "{k} differs between runs");
    }
    assert_eq!(ra.manifests.len(), 5);
    let report = ra.report.unwrap();
    assert!((report.mean.observed - report.mean.expected).abs() < 4.0 * report.mean.stderr);
    assert!(report.oracle.unwrap().tvd < 0.1);
}

#[test]
fn resume_skips_mps_construction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), reference_circuit());
    let first = run_pipeline(&cfg).unwrap();
    assert!(!first.manifests.iter().any(|m| m.resumed));
    let mut again = cfg.clone();
    again.stages = vec![Stage::BuildMps, Stage::Sample];
    let second = run_pipeline(&again).unwrap();
    let mps = second.manifests.iter().find(|m| m.stage == "build-mps").unwrap();
    assert!(mps.resumed);
    let samples = dir.path().join("sample/samples.txt");
    assert_eq!(read_samples(&samples).unwrap().shots, 2000);

    // A different bond dimension invalidates the persisted state.
    again.chi = 8;
    let third = run_pipeline(&again).unwrap();
    assert!(!third.manifests.iter().find(|m| m.stage == "build-mps").unwrap().resumed);
}

#[test]
fn vacuum_run_is_trivial() {
    let dir = tempfile::tempdir().unwrap();
    let circuit = CircuitConfig { modes: 3, r: vec![0.0], eta: vec![0.7], ensemble: Ensemble::GlobalHaar };
    let out = run_pipeline(&small_config(dir.path(), circuit)).unwrap();
    let batch = read_samples(&dir.path().join("sample/samples.txt")).unwrap();
    assert!(batch.patterns.iter().all(|p| p.total() == 0));
    let report = out.report.unwrap();
    assert_eq!(report.mean.observed, 0.0);
    assert!(report.mean.expected.abs() < 1e-12);
    assert!(report.two_point.is_none());
    let oracle = report.oracle.unwrap();
    assert!(oracle.tvd < 1e-12);
    assert_eq!(oracle.xeb.unwrap().xe, 0.0);
}

#[test]
fn stage_failure_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), reference_circuit());
    cfg.max_hafnian = 2;
    match run_pipeline(&cfg) {
        Err(Error::Stage { stage, source }) => {
            assert_eq!(stage, "build-mps");
            assert!(matches!(*source, Error::HafnianTooLarge { .. }));
            assert_eq!(source.exit_code(), 4);
        }
        other => panic!("expected a build-mps failure, got {other:?}"),
    }
}
