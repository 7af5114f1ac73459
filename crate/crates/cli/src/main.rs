mod table;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lossy_gbs::benchmark::{
    bayesian_score, ground_truth_two_point, mode_pairs, sample_two_point, spearman_by_order, tvd_empirical,
    two_point_stats, xeb, xeb_all_sectors, Distribution, GaussianTruth, SpearmanOptions,
};
use lossy_gbs::decompose::Method;
use lossy_gbs::estimate::{circuit_bond, ensemble_bond, max_hafnian_size, memory_estimate, time_estimate, worst_case_bond, ENSEMBLE_CIRCUITS};
use lossy_gbs::hafnian::hafnian_with_max;
use lossy_gbs::io;
use lossy_gbs::mps::{build_mps, center_bond, load_mps, save_mps, MpsConfig};
use lossy_gbs::pipeline::{decompose, gen_circuit, run_pipeline, CircuitConfig, DecomposeSummary, Ensemble, RunConfig, Tolerances};
use lossy_gbs::sampler::{sample_batch, Detector, SampleBatch};
use lossy_gbs::gaussian::CovMatrix;
use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use table::Table;

/// Classical simulation of lossy Gaussian boson sampling.
#[derive(Parser, Debug)]
#[command(name = "gbsim", version, about)]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true, env = "GBSIM_THREADS")]
    threads: Option<usize>,
    /// Base directory for relative output paths of `run`.
    #[arg(long, global = true, env = "GBSIM_SCRATCH")]
    scratch: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split a covariance matrix into a pure part and displacement noise.
    Decompose(DecomposeArgs),
    /// Build the matrix product state of a pure covariance matrix.
    BuildMps(BuildMpsArgs),
    /// Draw photon patterns from a persisted MPS and a noise matrix.
    Sample(SampleArgs),
    /// Compare samples with exact statistics.
    #[command(subcommand)]
    Benchmark(BenchmarkCommand),
    /// Bond-dimension and cost estimates as CSV.
    Estimate(EstimateArgs),
    /// Generate a lossy circuit and write its matrices.
    GenCircuit(GenCircuitArgs),
    /// Hafnian of a complex symmetric matrix.
    Hafnian(HafnianArgs),
    /// Run the full pipeline from a JSON configuration.
    Run(RunArgs),
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[arg(long)]
    cov: PathBuf,
    /// Output files for V_p and W, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1, default_value = "vp.txt,w.txt")]
    out: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = MethodArg::Sdp)]
    method: MethodArg,
    /// Relative duality gap.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    feasibility: Option<f64>,
    #[arg(long)]
    purity: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodArg {
    Sdp,
    Williamson,
}

#[derive(Args, Debug)]
struct BuildMpsArgs {
    #[arg(long)]
    vp: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    chi: usize,
    #[arg(long, default_value_t = 4)]
    d: usize,
    #[arg(long, default_value_t = 40)]
    max_hafnian: usize,
    #[arg(long, default_value_t = 1e-5)]
    purity: f64,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    mps: PathBuf,
    #[arg(long)]
    w: PathBuf,
    #[arg(long)]
    shots: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report clicks instead of photon numbers.
    #[arg(long)]
    threshold: bool,
    /// Local cutoff while sampling.
    #[arg(long, default_value_t = 10)]
    d_sample: usize,
    /// Sample file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct BenchInputs {
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    samples_b: Option<PathBuf>,
    /// Covariance of the reference state.
    #[arg(long)]
    cov: Option<PathBuf>,
    /// Per-mode cutoff of the exact distribution.
    #[arg(long, default_value_t = 6)]
    cutoff: usize,
    /// Also write the table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum BenchmarkCommand {
    /// Cross entropy per photon sector and pooled.
    Xeb(BenchInputs),
    /// Total variation distance to the exact distribution or to a second sample file.
    Tvd(BenchInputs),
    /// Two-point correlation slope, Pearson coefficient and distance.
    Corr(BenchInputs),
    /// Bayesian score of the reference state against an alternative.
    Bayes {
        #[command(flatten)]
        inputs: BenchInputs,
        /// Covariance of the alternative model.
        #[arg(long)]
        cov_alt: PathBuf,
    },
    /// Spearman correlation of cumulants per order.
    Spearman {
        #[command(flatten)]
        inputs: BenchInputs,
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 3, 4, 5, 6])]
        orders: Vec<usize>,
        #[arg(long, default_value_t = 20_000)]
        budget: usize,
        #[arg(long, default_value_t = 1000)]
        resamples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum EstimateMode {
    WorstCase,
    Circuit,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum EnsembleArg {
    GlobalHaar,
    Brickwork,
    TmsvWorstCase,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long, value_enum)]
    mode: EstimateMode,
    /// Squeezers across the cut (worst case), comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize])]
    k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0f64])]
    r: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5f64])]
    eta: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.01f64])]
    eps: Vec<f64>,
    /// Mode count used for memory estimates (worst case) or circuits (ensembles).
    #[arg(long)]
    modes: Option<usize>,
    /// Local dimension used for cost estimates.
    #[arg(long, default_value_t = 4)]
    d: usize,
    /// Pure covariance to analyse instead of an ensemble (circuit mode).
    #[arg(long)]
    vp: Option<PathBuf>,
    /// Bond to analyse (defaults to the center).
    #[arg(long)]
    bond: Option<usize>,
    #[arg(long, value_enum, default_value_t = EnsembleArg::GlobalHaar)]
    ensemble: EnsembleArg,
    #[arg(long, default_value_t = 4)]
    depth: usize,
    #[arg(long, default_value_t = ENSEMBLE_CIRCUITS)]
    circuits: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenCircuitArgs {
    #[arg(long)]
    modes: usize,
    /// Input squeezing, one value or one per mode.
    #[arg(long, value_delimiter = ',', required = true)]
    r: Vec<f64>,
    /// Transmission, one value or one per mode.
    #[arg(long, value_delimiter = ',', required = true)]
    eta: Vec<f64>,
    #[arg(long, value_enum, default_value_t = EnsembleArg::GlobalHaar)]
    ensemble: EnsembleArg,
    #[arg(long, default_value_t = 1)]
    depth: usize,
    /// TMSV pairs across the center (worst-case ensemble).
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Explicit unitary file; overrides the ensemble.
    #[arg(long)]
    unitary: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct HafnianArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long, default_value_t = 40)]
    max: usize,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the output directory of the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<lossy_gbs::Error>().map(|e| e.exit_code()).unwrap_or(1);
            ExitCode::from(code as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker threads")?;
    }
    match cli.command {
        Command::Decompose(a) => cmd_decompose(a),
        Command::BuildMps(a) => cmd_build_mps(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Benchmark(b) => cmd_benchmark(b),
        Command::Estimate(a) => cmd_estimate(a),
        Command::GenCircuit(a) => cmd_gen_circuit(a),
        Command::Hafnian(a) => cmd_hafnian(a),
        Command::Run(a) => cmd_run(a, cli.scratch.as_deref()),
    }
}

fn read_cov(path: &Path) -> Result<CovMatrix> {
    io::read_covariance(path).with_context(|| format!("reading {}", path.display()))
}

fn read_batch(path: &Path) -> Result<SampleBatch> {
    io::read_samples(path).with_context(|| format!("reading {}", path.display()))
}

fn cmd_decompose(a: DecomposeArgs) -> Result<()> {
    let [vp_out, w_out] = a.out.as_slice() else {
        bail!(lossy_gbs::Error::OutOfRange("--out takes two files: vp,w".into()));
    };
    let v = read_cov(&a.cov)?;
    let mut tol = Tolerances::default();
    tol.sdp_gap = a.tol.unwrap_or(tol.sdp_gap);
    tol.feasibility = a.feasibility.unwrap_or(tol.feasibility);
    tol.purity = a.purity.unwrap_or(tol.purity);
    let method = match a.method {
        MethodArg::Sdp => Method::Sdp,
        MethodArg::Williamson => Method::Williamson,
    };
    let dec = decompose(&v, method, &tol)?;
    io::write_real_matrix(vp_out, dec.vp.data())?;
    io::write_real_matrix(w_out, &dec.w)?;
    let hash = io::sha256_file(&a.cov)?;
    let s = DecomposeSummary { config_hash: hash, objective: dec.objective, photons: dec.photons(), stats: dec.stats };
    println!("{}", serde_json::to_string(&s)?);
    Ok(())
}

fn cmd_build_mps(a: BuildMpsArgs) -> Result<()> {
    let vp = CovMatrix::new(io::read_real_matrix(&a.vp)?)?;
    let cfg = MpsConfig { chi: a.chi, d: a.d, max_hafnian: a.max_hafnian, purity_tol: a.purity };
    let mps = build_mps(&vp, &cfg)?;
    let hash = io::sha256_hex(format!("{}{}", io::sha256_file(&a.vp)?, serde_json::to_string(&cfg)?).as_bytes());
    save_mps(&mps, &a.out, &hash)?;
    println!(
        "{}",
        serde_json::json!({
            "modes": mps.modes,
            "bond_dims": mps.bond_dims(),
            "center_error": mps.report.center_error,
            "l_max": mps.report.l_max,
            "max_hafnian_size": mps.report.max_hafnian_size,
        })
    );
    Ok(())
}

fn cmd_sample(a: SampleArgs) -> Result<()> {
    let (mps, _) = load_mps(&a.mps).with_context(|| format!("loading {}", a.mps.display()))?;
    let w = io::read_real_matrix(&a.w)?;
    let detector = if a.threshold { Detector::Threshold } else { Detector::Pnr };
    let batch = sample_batch(&mps, &w, a.shots, a.seed, detector, a.d_sample)?;
    match a.out {
        Some(p) => io::write_samples(&p, &batch)?,
        None => print!("{}", io::format_samples(&batch)),
    }
    Ok(())
}

fn exact_distribution(cov: Option<&Path>, cutoff: usize, detector: Detector) -> Result<Distribution> {
    let Some(cov) = cov else {
        bail!(lossy_gbs::Error::OutOfRange("--cov is required for this comparison".into()));
    };
    Ok(GaussianTruth::new(&read_cov(cov)?)?.distribution(cutoff, detector)?)
}

fn emit(t: &Table, csv: Option<&Path>) -> Result<()> {
    print!("{}", t.aligned());
    if let Some(p) = csv {
        t.write_csv(p)?;
    }
    Ok(())
}

fn cmd_benchmark(cmd: BenchmarkCommand) -> Result<()> {
    match cmd {
        BenchmarkCommand::Xeb(i) => {
            let batch = read_batch(&i.samples)?;
            let ideal = exact_distribution(i.cov.as_deref(), i.cutoff, batch.detector)?;
            let sectors: BTreeSet<usize> = batch.patterns.iter().map(|p| p.total()).collect();
            let mut t = Table::new(&["sector", "xe", "stderr", "samples", "excluded", "pr_sector"]);
            for n in sectors {
                match xeb(&batch, &ideal, n) {
                    Ok(x) => t.row(vec![
                        n.to_string(),
                        fmt(x.xe),
                        fmt(x.stderr),
                        x.samples.to_string(),
                        x.excluded.to_string(),
                        fmt(x.sector_probability),
                    ]),
                    Err(lossy_gbs::Error::Degenerate(_)) | Err(lossy_gbs::Error::EmptySector(_)) => continue,
                    Err(e) => return Err(e.into()),
                }
            }
            let p = xeb_all_sectors(&batch, &ideal)?;
            t.row(vec!["all".into(), fmt(p.xe), fmt(p.stderr), p.samples.to_string(), p.excluded.to_string(), fmt(ideal.total())]);
            emit(&t, i.csv.as_deref())
        }
        BenchmarkCommand::Tvd(i) => {
            let a = read_batch(&i.samples)?;
            let da = Distribution::from_batch(&a)?;
            let (reference, db) = match &i.samples_b {
                Some(b) => (b.display().to_string(), Distribution::from_batch(&read_batch(b)?)?),
                None => ("exact".to_string(), exact_distribution(i.cov.as_deref(), i.cutoff, a.detector)?),
            };
            let mut t = Table::new(&["samples", "reference", "tvd"]);
            t.row(vec![i.samples.display().to_string(), reference, fmt(tvd_empirical(&da, &db))]);
            emit(&t, i.csv.as_deref())
        }
        BenchmarkCommand::Corr(i) => {
            let batch = read_batch(&i.samples)?;
            let Some(cov) = &i.cov else {
                bail!(lossy_gbs::Error::OutOfRange("--cov is required".into()));
            };
            let truth = ground_truth_two_point(&read_cov(cov)?, batch.detector)?;
            let sample = sample_two_point(&Distribution::from_batch(&batch)?, &mode_pairs(batch.modes))?;
            let s = two_point_stats(&sample, &truth)?;
            let mut t = Table::new(&["pairs", "slope", "intercept", "slope_origin", "pearson", "distance"]);
            t.row(vec![truth.len().to_string(), fmt(s.slope), fmt(s.intercept), fmt(s.slope_origin), fmt(s.pearson), fmt(s.distance)]);
            emit(&t, i.csv.as_deref())
        }
        BenchmarkCommand::Bayes { inputs: i, cov_alt } => {
            let batch = read_batch(&i.samples)?;
            let ground = exact_distribution(i.cov.as_deref(), i.cutoff, batch.detector)?;
            let alt = exact_distribution(Some(&cov_alt), i.cutoff, batch.detector)?;
            let s = bayesian_score(&batch, &ground, &alt)?;
            let mut t = Table::new(&["score", "stderr", "samples", "excluded"]);
            t.row(vec![fmt(s.score), fmt(s.stderr), s.samples.to_string(), s.excluded.to_string()]);
            emit(&t, i.csv.as_deref())
        }
        BenchmarkCommand::Spearman { inputs: i, orders, budget, resamples, seed } => {
            let batch = read_batch(&i.samples)?;
            let truth = exact_distribution(i.cov.as_deref(), i.cutoff, batch.detector)?;
            let opts = SpearmanOptions { orders, budget, resamples, seed };
            let mut t = Table::new(&["order", "subsets", "rho", "stderr", "ci_low", "ci_high"]);
            for c in spearman_by_order(&batch, &truth, &opts)? {
                t.row(vec![c.order.to_string(), c.subsets.to_string(), fmt(c.rho), fmt(c.stderr), fmt(c.ci.0), fmt(c.ci.1)]);
            }
            emit(&t, i.csv.as_deref())
        }
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.6e}")
}

fn ensemble(kind: EnsembleArg, depth: usize, k: usize) -> Ensemble {
    match kind {
        EnsembleArg::GlobalHaar => Ensemble::GlobalHaar,
        EnsembleArg::Brickwork => Ensemble::Brickwork { depth },
        EnsembleArg::TmsvWorstCase => Ensemble::TmsvWorstCase { k },
    }
}

fn cmd_estimate(a: EstimateArgs) -> Result<()> {
    let mut t;
    match (a.mode, &a.vp) {
        (EstimateMode::WorstCase, _) => {
            t = Table::new(&[
                "k", "r", "eta", "eps", "s", "nbar", "ratio", "level", "epsilon", "chi", "memory_bytes", "time_s", "hafnian_size",
            ]);
            for &k in &a.k {
                for &r in &a.r {
                    for &eta in &a.eta {
                        for &eps in &a.eps {
                            let b = worst_case_bond(k, r, eta, eps)?;
                            let modes = a.modes.unwrap_or(2 * k) as u64;
                            let (mem, time) = match u64::try_from(b.chi) {
                                Ok(c) => (memory_estimate(c, modes, a.d as u64).to_string(), fmt(time_estimate(c, a.d as u64))),
                                Err(_) => (String::new(), String::new()),
                            };
                            t.row(vec![
                                k.to_string(),
                                r.to_string(),
                                eta.to_string(),
                                eps.to_string(),
                                fmt(b.s),
                                fmt(b.nbar),
                                fmt(b.ratio),
                                b.level.to_string(),
                                fmt(b.epsilon),
                                b.chi.to_string(),
                                mem,
                                time,
                                max_hafnian_size(b.level).to_string(),
                            ]);
                        }
                    }
                }
            }
        }
        (EstimateMode::Circuit, Some(vp)) => {
            let vp = CovMatrix::new(io::read_real_matrix(vp)?)?;
            let bond = match a.bond.or(center_bond(vp.modes())) {
                Some(b) => b,
                None => bail!(lossy_gbs::Error::Dimension("need at least two modes".into())),
            };
            t = Table::new(&["bond", "eps", "chi"]);
            for &eps in &a.eps {
                t.row(vec![bond.to_string(), eps.to_string(), circuit_bond(&vp, bond, eps)?.to_string()]);
            }
        }
        (EstimateMode::Circuit, None) => {
            let Some(modes) = a.modes else {
                bail!(lossy_gbs::Error::OutOfRange("circuit mode needs --vp or --modes".into()));
            };
            t = Table::new(&["modes", "r", "eta", "eps", "circuits", "mean_chi", "min_chi", "max_chi", "mean_photons"]);
            let k = a.k.first().copied().unwrap_or(1);
            for &r in &a.r {
                for &eta in &a.eta {
                    let cfg = CircuitConfig { modes, r: vec![r], eta: vec![eta], ensemble: ensemble(a.ensemble, a.depth, k) };
                    let spec = cfg.to_spec()?;
                    for &eps in &a.eps {
                        let e = ensemble_bond(&spec, eps, a.circuits, a.seed, &Default::default())?;
                        t.row(vec![
                            modes.to_string(),
                            r.to_string(),
                            eta.to_string(),
                            eps.to_string(),
                            e.circuits.to_string(),
                            fmt(e.mean_chi),
                            e.min_chi.to_string(),
                            e.max_chi.to_string(),
                            fmt(e.mean_photons),
                        ]);
                    }
                }
            }
        }
    }
    match &a.out {
        Some(p) => t.write_csv(p)?,
        None => print!("{}", t.csv()?),
    }
    Ok(())
}

fn cmd_gen_circuit(a: GenCircuitArgs) -> Result<()> {
    let ensemble = match a.unitary {
        Some(u) => Ensemble::Explicit { unitary: u },
        None => ensemble(a.ensemble, a.depth, a.k),
    };
    let cfg = CircuitConfig { modes: a.modes, r: a.r, eta: a.eta, ensemble };
    let (circuit, files) = gen_circuit(&cfg, a.seed, &a.out)?;
    println!(
        "{}",
        serde_json::json!({
            "cov": files.cov,
            "cov_sha256": io::sha256_file(&files.cov)?,
            "mean_photon": lossy_gbs::gaussian::mean_photon(&circuit.output),
        })
    );
    Ok(())
}

fn cmd_hafnian(a: HafnianArgs) -> Result<()> {
    let m = io::read_complex_matrix(&a.matrix)?;
    let h = hafnian_with_max(&m, a.max)?;
    println!("{:e} {:e}", h.re, h.im);
    Ok(())
}

fn cmd_run(a: RunArgs, scratch: Option<&Path>) -> Result<()> {
    let mut cfg = RunConfig::from_json_file(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    if let Some(out) = a.out {
        cfg.out_dir = out;
    }
    if let Some(base) = scratch {
        if cfg.out_dir.is_relative() {
            cfg.out_dir = base.join(&cfg.out_dir);
        }
    }
    let summary = run_pipeline(&cfg)?;
    for m in &summary.manifests {
        println!("{:<10} {:>8.3} s{}", m.stage, m.wall_time_s, if m.resumed { "  (resumed)" } else { "" });
    }
    if let Some(r) = summary.report {
        fs::create_dir_all(&cfg.out_dir)?;
        println!("{}", serde_json::to_string(&r)?);
    }
    Ok(())
}
