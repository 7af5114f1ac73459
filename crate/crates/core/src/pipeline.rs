//! End-to-end runs: circuit generation, decomposition, MPS construction,
//! sampling and benchmarking, each stage leaving its artifacts and a
//! manifest under one output directory.
//!
//! Layout of `out_dir`:
//!
//! ```text
//! circuit/   cov.txt input.txt unitary.txt eta.txt stage.json
//! decompose/ vp.txt w.txt stats.json stage.json
//! mps/       mode_*.bin bond_*.bin patterns.json manifest.json stage.json
//! sample/    samples.txt stage.json
//! benchmark/ report.json stage.json
//! ```
//!
//! Stage seeds come from [`derive_seed`] applied to the global seed and the
//! stage name.

use crate::benchmark::{
    ground_truth_two_point, mode_pairs, sample_two_point, tvd_empirical, two_point_stats, xeb_all_sectors,
    Distribution, GaussianTruth, PooledXeb, TwoPointStats,
};
use crate::decompose::{decompose_sdp, williamson_split, Decomposition, Method, SdpOptions, SolverStats};
use crate::error::{Error, Result};
use crate::gaussian::{build_circuit, mean_photon, Circuit, CircuitSpec, CovMatrix, Interferometer};
use crate::io;
use crate::mps::{build_mps, load_mps, read_manifest, save_mps, MpsConfig, MpsState};
use crate::sampler::{derive_seed, sample_batch, Detector, SampleBatch, ORACLE_MAX_CUTOFF, ORACLE_MAX_MODES};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const STAGE_MANIFEST: &str = "stage.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Decompose,
    BuildMps,
    Sample,
    Benchmark,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Decompose, Stage::BuildMps, Stage::Sample, Stage::Benchmark];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Decompose => "decompose",
            Stage::BuildMps => "build-mps",
            Stage::Sample => "sample",
            Stage::Benchmark => "benchmark",
        }
    }

    fn dir(self) -> &'static str {
        match self {
            Stage::Decompose => "decompose",
            Stage::BuildMps => "mps",
            Stage::Sample => "sample",
            Stage::Benchmark => "benchmark",
        }
    }
}

/// Interferometer ensemble for generated circuits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Ensemble {
    GlobalHaar,
    Brickwork { depth: usize },
    TmsvWorstCase { k: usize },
    /// Unitary read from a complex matrix file.
    Explicit { unitary: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitConfig {
    pub modes: usize,
    /// Input squeezing, one value for all modes or one per mode.
    pub r: Vec<f64>,
    /// Transmission, one value for all modes or one per mode.
    pub eta: Vec<f64>,
    pub ensemble: Ensemble,
}

impl CircuitConfig {
    pub fn to_spec(&self) -> Result<CircuitSpec> {
        let interferometer = match &self.ensemble {
            Ensemble::GlobalHaar => Interferometer::GlobalHaar,
            Ensemble::Brickwork { depth } => Interferometer::Brickwork { depth: *depth },
            Ensemble::TmsvWorstCase { k } => Interferometer::TmsvWorstCase { k: *k },
            Ensemble::Explicit { unitary } => Interferometer::Explicit(io::read_complex_matrix(unitary)?),
        };
        Ok(CircuitSpec { modes: self.modes, r_in: self.r.clone(), eta: self.eta.clone(), interferometer })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub sdp_gap: f64,
    pub feasibility: f64,
    pub purity: f64,
    pub max_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        let d = SdpOptions::default();
        Self { sdp_gap: d.tol, feasibility: d.feasibility, purity: d.purity, max_iterations: d.max_iterations }
    }
}

impl Tolerances {
    pub fn sdp_options(&self) -> SdpOptions {
        SdpOptions { tol: self.sdp_gap, feasibility: self.feasibility, purity: self.purity, max_iterations: self.max_iterations }
    }
}

/// Configuration of a pipeline run, usually read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    /// Input covariance file. Exactly one of `cov` and `circuit` is set.
    #[serde(default)]
    pub cov: Option<PathBuf>,
    #[serde(default)]
    pub circuit: Option<CircuitConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::chi")]
    pub chi: usize,
    #[serde(default = "defaults::d_build")]
    pub d_build: usize,
    #[serde(default = "defaults::d_sample")]
    pub d_sample: usize,
    #[serde(default = "defaults::shots")]
    pub shots: usize,
    #[serde(default)]
    pub detector: Detector,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "defaults::max_hafnian")]
    pub max_hafnian: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Per-mode cutoff of the exact reference distribution in the benchmark
    /// stage; the comparison runs only when the system is small enough.
    #[serde(default = "defaults::oracle_cutoff")]
    pub oracle_cutoff: usize,
    #[serde(default = "defaults::stages")]
    pub stages: Vec<Stage>,
}

mod defaults {
    use super::Stage;
    pub fn chi() -> usize {
        100
    }
    pub fn d_build() -> usize {
        4
    }
    pub fn d_sample() -> usize {
        10
    }
    pub fn shots() -> usize {
        1000
    }
    pub fn max_hafnian() -> usize {
        crate::hafnian::DEFAULT_MAX_HAFNIAN
    }
    pub fn oracle_cutoff() -> usize {
        6
    }
    pub fn stages() -> Vec<Stage> {
        Stage::ALL.to_vec()
    }
}

impl RunConfig {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            cov: None,
            circuit: None,
            seed: 0,
            chi: defaults::chi(),
            d_build: defaults::d_build(),
            d_sample: defaults::d_sample(),
            shots: defaults::shots(),
            detector: Detector::Pnr,
            method: Method::Sdp,
            max_hafnian: defaults::max_hafnian(),
            tolerances: Tolerances::default(),
            oracle_cutoff: defaults::oracle_cutoff(),
            stages: defaults::stages(),
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn mps_config(&self) -> MpsConfig {
        MpsConfig { chi: self.chi, d: self.d_build, max_hafnian: self.max_hafnian, purity_tol: self.tolerances.purity }
    }

    fn wants(&self, stage: Stage) -> bool {
        self.stages.contains(&stage)
    }

    /// Checks the configuration and that every file it refers to exists.
    pub fn validate(&self) -> Result<()> {
        match (&self.cov, &self.circuit) {
            (Some(_), Some(_)) => return Err(Error::OutOfRange("set either 'cov' or 'circuit', not both".into())),
            (None, None) if self.wants(Stage::Decompose) || self.wants(Stage::Benchmark) => {
                return Err(Error::OutOfRange("one of 'cov' or 'circuit' is required".into()))
            }
            _ => {}
        }
        if let Some(c) = &self.cov {
            require_file(c)?;
        }
        if let Some(CircuitConfig { ensemble: Ensemble::Explicit { unitary }, .. }) = &self.circuit {
            require_file(unitary)?;
        }
        if self.chi == 0 || self.d_build < 2 || self.d_sample < 2 {
            return Err(Error::OutOfRange("chi must be >= 1 and local dimensions >= 2".into()));
        }
        // Inputs of the first requested stage must already be on disk.
        let first = self.stages.iter().min().copied();
        let needs: &[&str] = match first {
            Some(Stage::BuildMps) => &["decompose/vp.txt"],
            Some(Stage::Sample) => &["decompose/w.txt", "mps/manifest.json"],
            Some(Stage::Benchmark) => &["sample/samples.txt"],
            _ => &[],
        };
        for rel in needs {
            require_file(&self.out_dir.join(rel))?;
        }
        Ok(())
    }
}

fn require_file(p: &Path) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, format!("{} does not exist", p.display()))))
    }
}

/// Manifest written next to the artifacts of every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub version: String,
    pub global_seed: u64,
    pub stage_seed: u64,
    pub config_hash: String,
    pub config: serde_json::Value,
    /// SHA-256 of every input file, keyed by path relative to the run.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub resumed: bool,
    pub wall_time_s: f64,
}

struct StageRun<'a> {
    root: &'a Path,
    name: &'static str,
    dir: PathBuf,
    global_seed: u64,
    seed: u64,
    config: serde_json::Value,
    inputs: BTreeMap<String, String>,
    started: Instant,
}

impl<'a> StageRun<'a> {
    fn new(root: &'a Path, name: &'static str, dir: &str, global_seed: u64, config: serde_json::Value) -> Result<Self> {
        let dir = root.join(dir);
        fs::create_dir_all(&dir)?;
        Ok(Self {
            root,
            name,
            dir,
            global_seed,
            seed: derive_seed(global_seed, name),
            config,
            inputs: BTreeMap::new(),
            started: Instant::now(),
        })
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        let key = self.relative(path);
        self.inputs.insert(key, io::sha256_file(path)?);
        Ok(())
    }

    fn relative(&self, path: &Path) -> String {
        path.strip_prefix(self.root).unwrap_or(path).to_string_lossy().replace('\\', "/")
    }

    fn config_hash(&self) -> String {
        let key = serde_json::json!({
            "stage": self.name,
            "version": VERSION,
            "seed": self.seed,
            "config": self.config,
            "inputs": self.inputs,
        });
        io::sha256_hex(key.to_string().as_bytes())
    }

    fn finish(self, outputs: &[PathBuf], resumed: bool) -> Result<StageManifest> {
        let mut out = BTreeMap::new();
        for p in outputs {
            out.insert(self.relative(p), io::sha256_file(p)?);
        }
        let manifest = StageManifest {
            stage: self.name.to_string(),
            version: VERSION.to_string(),
            global_seed: self.global_seed,
            stage_seed: self.seed,
            config_hash: self.config_hash(),
            config: self.config.clone(),
            inputs: self.inputs.clone(),
            outputs: out,
            resumed,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        fs::write(self.dir.join(STAGE_MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;
        log::info!("stage {} done in {:.2} s", self.name, manifest.wall_time_s);
        Ok(manifest)
    }
}

fn provenance(hash: &str) -> String {
    format!("# config={hash}\n")
}

/// Files produced by [`gen_circuit`].
#[derive(Debug, Clone)]
pub struct CircuitFiles {
    pub cov: PathBuf,
    pub input: PathBuf,
    pub unitary: PathBuf,
    pub eta: PathBuf,
}

/// Builds the circuit and writes `cov.txt` (output V), `input.txt` (V0),
/// `unitary.txt` and `eta.txt` to `dir`.
pub fn gen_circuit(cfg: &CircuitConfig, seed: u64, dir: &Path) -> Result<(Circuit, CircuitFiles)> {
    let circuit = build_circuit(&cfg.to_spec()?, seed)?;
    fs::create_dir_all(dir)?;
    let hash = io::sha256_hex(serde_json::json!({ "circuit": cfg, "seed": seed }).to_string().as_bytes());
    let files = CircuitFiles {
        cov: dir.join("cov.txt"),
        input: dir.join("input.txt"),
        unitary: dir.join("unitary.txt"),
        eta: dir.join("eta.txt"),
    };
    let tag = provenance(&hash);
    fs::write(&files.cov, tag.clone() + &io::format_real_matrix(circuit.output.data()))?;
    fs::write(&files.input, tag.clone() + &io::format_real_matrix(circuit.input.data()))?;
    fs::write(&files.unitary, tag.clone() + &io::format_complex_matrix(&circuit.unitary))?;
    fs::write(&files.eta, tag + &io::format_values(&circuit.eta))?;
    Ok((circuit, files))
}

pub fn decompose(v: &CovMatrix, method: Method, tol: &Tolerances) -> Result<Decomposition> {
    match method {
        Method::Sdp => decompose_sdp(v, &tol.sdp_options()),
        Method::Williamson => williamson_split(v),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecomposeSummary {
    pub config_hash: String,
    pub objective: f64,
    pub photons: f64,
    pub stats: SolverStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCheck {
    pub expected: f64,
    pub observed: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub cutoff: usize,
    /// Probability mass of the exact distribution inside the cutoff.
    pub truth_mass: f64,
    pub tvd: f64,
    pub xeb: Option<PooledXeb>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config_hash: String,
    pub modes: usize,
    pub shots: usize,
    pub detector: Detector,
    /// Mean total photon number (or clicks) per shot.
    pub mean: MeanCheck,
    /// Two-point correlations against the exact values; absent when the
    /// exact correlations all vanish.
    pub two_point: Option<TwoPointStats>,
    pub oracle: Option<OracleComparison>,
}

/// Compares a sample batch with exact statistics of `v`.
pub fn benchmark_batch(batch: &SampleBatch, v: &CovMatrix, oracle_cutoff: usize, config_hash: &str) -> Result<BenchmarkReport> {
    if batch.modes != v.modes() {
        return Err(Error::Dimension(format!("samples on {} modes, covariance on {}", batch.modes, v.modes())));
    }
    let truth = GaussianTruth::new(v)?;
    let expected = match batch.detector {
        Detector::Pnr => mean_photon(v),
        Detector::Threshold => (0..v.modes()).map(|i| 1.0 - truth.vacuum_probability(&[i])).sum(),
    };
    let totals: Vec<f64> = batch.patterns.iter().map(|p| p.total() as f64).collect();
    let (observed, stderr) = crate::benchmark::mean_stderr(&totals);
    let mean = MeanCheck { expected, observed, stderr };

    let empirical = Distribution::from_batch(batch)?;
    let two_point = if v.modes() >= 2 {
        let truth2 = ground_truth_two_point(v, batch.detector)?;
        let sample2 = sample_two_point(&empirical, &mode_pairs(v.modes()))?;
        match two_point_stats(&sample2, &truth2) {
            Ok(s) => Some(s),
            Err(Error::Degenerate(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };

    let cutoff = oracle_cutoff.min(ORACLE_MAX_CUTOFF);
    let oracle = if v.modes() <= ORACLE_MAX_MODES && cutoff >= 2 {
        let exact = truth.distribution(cutoff, batch.detector)?;
        let xeb = match xeb_all_sectors(batch, &exact) {
            Ok(x) => Some(x),
            Err(Error::Degenerate(_)) => None,
            Err(e) => return Err(e),
        };
        Some(OracleComparison { cutoff, truth_mass: exact.total(), tvd: tvd_empirical(&empirical, &exact), xeb })
    } else {
        None
    };
    Ok(BenchmarkReport {
        config_hash: config_hash.to_string(),
        modes: batch.modes,
        shots: batch.shots,
        detector: batch.detector,
        mean,
        two_point,
        oracle,
    })
}

/// What a run produced.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub manifests: Vec<StageManifest>,
    pub report: Option<BenchmarkReport>,
}

fn in_stage<T>(stage: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Stage { .. } => e,
        other => Error::Stage { stage: stage.to_string(), source: Box::new(other) },
    })
}

/// Runs the requested stages in order.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let root = cfg.out_dir.as_path();
    fs::create_dir_all(root)?;
    let mut summary = RunSummary::default();

    let cov_path = match (&cfg.cov, &cfg.circuit) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(c)) => Some(in_stage("circuit", run_circuit(cfg, c, &mut summary))?),
        (None, None) => None,
    };

    let vp_path = root.join("decompose/vp.txt");
    let w_path = root.join("decompose/w.txt");
    if cfg.wants(Stage::Decompose) {
        let cov = cov_path.as_deref().expect("validated");
        in_stage("decompose", run_decompose(cfg, cov, &mut summary))?;
    }
    let mps_dir = root.join("mps");
    if cfg.wants(Stage::BuildMps) {
        in_stage("build-mps", run_build_mps(cfg, &vp_path, &mut summary))?;
    }
    let samples_path = root.join("sample/samples.txt");
    if cfg.wants(Stage::Sample) {
        in_stage("sample", run_sample(cfg, &mps_dir, &w_path, &mut summary))?;
    }
    if cfg.wants(Stage::Benchmark) {
        let cov = cov_path.as_deref().expect("validated");
        in_stage("benchmark", run_benchmark(cfg, cov, &samples_path, &mut summary))?;
    }
    Ok(summary)
}

fn run_circuit(cfg: &RunConfig, c: &CircuitConfig, summary: &mut RunSummary) -> Result<PathBuf> {
    let mut st = StageRun::new(&cfg.out_dir, "circuit", "circuit", cfg.seed, serde_json::to_value(c)?)?;
    if let Ensemble::Explicit { unitary } = &c.ensemble {
        st.input(unitary)?;
    }
    let (_, files) = gen_circuit(c, st.seed, &st.dir)?;
    let outputs = vec![files.cov.clone(), files.input, files.unitary, files.eta];
    summary.manifests.push(st.finish(&outputs, false)?);
    Ok(files.cov)
}

fn run_decompose(cfg: &RunConfig, cov: &Path, summary: &mut RunSummary) -> Result<()> {
    let config = serde_json::json!({ "method": cfg.method, "tolerances": cfg.tolerances });
    let mut st = StageRun::new(&cfg.out_dir, "decompose", Stage::Decompose.dir(), cfg.seed, config)?;
    st.input(cov)?;
    let v = io::read_covariance(cov)?;
    let dec = decompose(&v, cfg.method, &cfg.tolerances)?;
    let hash = st.config_hash();
    let (vp, w, stats) = (st.dir.join("vp.txt"), st.dir.join("w.txt"), st.dir.join("stats.json"));
    fs::write(&vp, provenance(&hash) + &io::format_real_matrix(dec.vp.data()))?;
    fs::write(&w, provenance(&hash) + &io::format_real_matrix(&dec.w))?;
    let s = DecomposeSummary { config_hash: hash, objective: dec.objective, photons: dec.photons(), stats: dec.stats.clone() };
    fs::write(&stats, serde_json::to_string_pretty(&s)? + "\n")?;
    summary.manifests.push(st.finish(&[vp, w, stats], false)?);
    Ok(())
}

fn mps_outputs(dir: &Path, mps: &MpsState) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = (0..mps.modes).map(|k| dir.join(format!("mode_{k:04}.bin"))).collect();
    out.extend((0..mps.modes.saturating_sub(1)).map(|k| dir.join(format!("bond_{k:04}.bin"))));
    out.push(dir.join("patterns.json"));
    out.push(dir.join("manifest.json"));
    out
}

fn run_build_mps(cfg: &RunConfig, vp_path: &Path, summary: &mut RunSummary) -> Result<()> {
    let mut st = StageRun::new(&cfg.out_dir, "build-mps", Stage::BuildMps.dir(), cfg.seed, serde_json::to_value(cfg.mps_config())?)?;
    st.input(vp_path)?;
    let hash = st.config_hash();
    if let Ok(m) = read_manifest(&st.dir) {
        if m.config_hash == hash {
            if let Ok((mps, _)) = load_mps(&st.dir) {
                log::info!("resuming from persisted MPS in {}", st.dir.display());
                let outputs = mps_outputs(&st.dir, &mps);
                summary.manifests.push(st.finish(&outputs, true)?);
                return Ok(());
            }
        }
    }
    let vp = CovMatrix::new(io::read_real_matrix(vp_path)?)?;
    let mps = build_mps(&vp, &cfg.mps_config())?;
    clear_mps_files(&st.dir)?;
    save_mps(&mps, &st.dir, &hash)?;
    let outputs = mps_outputs(&st.dir, &mps);
    summary.manifests.push(st.finish(&outputs, false)?);
    Ok(())
}

fn clear_mps_files(dir: &Path) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.ends_with(".bin") || name == "manifest.json" || name == "patterns.json" {
            fs::remove_file(&p)?;
        }
    }
    Ok(())
}

fn run_sample(cfg: &RunConfig, mps_dir: &Path, w_path: &Path, summary: &mut RunSummary) -> Result<()> {
    let config = serde_json::json!({ "shots": cfg.shots, "d_sample": cfg.d_sample, "detector": cfg.detector });
    let mut st = StageRun::new(&cfg.out_dir, "sample", Stage::Sample.dir(), cfg.seed, config)?;
    st.input(w_path)?;
    st.input(&mps_dir.join("manifest.json"))?;
    let (mps, _) = load_mps(mps_dir)?;
    let w = io::read_real_matrix(w_path)?;
    let batch = sample_batch(&mps, &w, cfg.shots, st.seed, cfg.detector, cfg.d_sample)?;
    let text = io::format_samples(&batch);
    let (header, body) = text.split_once('\n').expect("sample text has a header line");
    let path = st.dir.join("samples.txt");
    fs::write(&path, format!("{header}\n{}{body}", provenance(&st.config_hash())))?;
    summary.manifests.push(st.finish(&[path], false)?);
    Ok(())
}

fn run_benchmark(cfg: &RunConfig, cov: &Path, samples: &Path, summary: &mut RunSummary) -> Result<()> {
    let config = serde_json::json!({ "oracle_cutoff": cfg.oracle_cutoff });
    let mut st = StageRun::new(&cfg.out_dir, "benchmark", Stage::Benchmark.dir(), cfg.seed, config)?;
    st.input(cov)?;
    st.input(samples)?;
    let v = io::read_covariance(cov)?;
    let batch = io::read_samples(samples)?;
    let report = benchmark_batch(&batch, &v, cfg.oracle_cutoff, &st.config_hash())?;
    let path = st.dir.join("report.json");
    fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
    summary.manifests.push(st.finish(&[path], false)?);
    summary.report = Some(report);
    Ok(())
}

/// Reference circuit used by the examples and tests: three modes, input
/// squeezing 0.8, transmission 0.5, global Haar interferometer with seed 0.
pub fn reference_circuit() -> CircuitConfig {
    CircuitConfig { modes: 3, r: vec![0.8], eta: vec![0.5], ensemble: Ensemble::GlobalHaar }
}
