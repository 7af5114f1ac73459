//! Photon-pattern sampling from a displaced matrix product state, and a
//! dense Monte-Carlo oracle for small systems.

use crate::error::{Error, Result};
use crate::gaussian::GaussianUnitaryFactors;
use crate::hafnian::{build_sigma, displacement_matrix, PhotonPattern};
use crate::linalg::{psd_factor, RMat};
use crate::mps::{MpsState, Tensor3};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::str::FromStr;

/// Conditional mass below which sampling gives up.
pub const STARVATION_MASS: f64 = 1e-9;
/// Per-site leakage above this is logged.
pub const LEAKAGE_LOG: f64 = 1e-4;
/// Largest system the dense oracle accepts.
pub const ORACLE_MAX_MODES: usize = 6;
pub const ORACLE_MAX_CUTOFF: usize = 8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Seed for a named stage or job: the first eight bytes (little endian) of
/// `SHA-256(seed as 8 LE bytes || label)`.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// RNG for shot (or draw) `index` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Detector {
    #[default]
    Pnr,
    Threshold,
}

impl Detector {
    pub fn apply(self, m: PhotonPattern) -> PhotonPattern {
        match self {
            Detector::Pnr => m,
            Detector::Threshold => m.clicks(),
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Detector::Pnr => "pnr",
            Detector::Threshold => "threshold",
        })
    }
}

impl FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pnr" => Ok(Detector::Pnr),
            "threshold" => Ok(Detector::Threshold),
            other => Err(Error::Parse(format!("unknown detector mode '{other}'"))),
        }
    }
}

/// One draw from the displacement channel.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementDraw {
    /// Quadrature shift, xxpp order.
    pub delta: Vec<f64>,
    /// `beta_k = (dx_k + i dp_k) / 2`.
    pub beta: Vec<Complex64>,
}

/// Gaussian noise source with covariance `W`, factored once.
#[derive(Debug, Clone)]
pub struct DisplacementSampler {
    factor: RMat,
}

impl DisplacementSampler {
    pub fn new(w: &RMat) -> Result<Self> {
        if w.nrows() != w.ncols() || w.nrows() % 2 == 1 {
            return Err(Error::Dimension(format!("W is {}x{}", w.nrows(), w.ncols())));
        }
        let (factor, min_eig) = psd_factor(w);
        if min_eig < -1e-8 {
            return Err(Error::NotPositiveSemidefinite { min_eig });
        }
        Ok(Self { factor })
    }

    pub fn modes(&self) -> usize {
        self.factor.nrows() / 2
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DisplacementDraw {
        let n = self.factor.nrows();
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let delta: Vec<f64> = (&self.factor * z).iter().copied().collect();
        let m = n / 2;
        let beta = (0..m).map(|k| Complex64::new(delta[k], delta[k + m]) * 0.5).collect();
        DisplacementDraw { delta, beta }
    }
}

pub fn draw_displacement<R: Rng + ?Sized>(w: &RMat, rng: &mut R) -> Result<DisplacementDraw> {
    Ok(DisplacementSampler::new(w)?.draw(rng))
}

/// Applies `D(beta_k)` to the physical index of every tensor, with output
/// cutoff `d_sample`. Tensors are zero-padded when `d_sample` exceeds the
/// build cutoff.
pub fn displace_tensors(mps: &MpsState, beta: &[Complex64], d_sample: usize) -> Result<MpsState> {
    if beta.len() != mps.modes {
        return Err(Error::Dimension(format!("{} displacements for {} modes", beta.len(), mps.modes)));
    }
    let mut out = mps.clone();
    out.d = d_sample;
    out.gammas = mps.gammas.iter().zip(beta).map(|(g, &b)| displace_tensor(g, b, d_sample)).collect();
    Ok(out)
}

fn displace_tensor(g: &Tensor3, beta: Complex64, d_sample: usize) -> Tensor3 {
    if beta == ZERO {
        return g.with_local_dim(d_sample);
    }
    let dm = displacement_matrix(beta, d_sample.max(g.d));
    let len = g.left * g.right;
    let mut out = Tensor3::zeros(d_sample, g.left, g.right);
    for m in 0..d_sample {
        let dst = &mut out.data[m * len..(m + 1) * len];
        for n in 0..g.d {
            let c = dm[(m, n)];
            for (o, x) in dst.iter_mut().zip(g.slice(n)) {
                *o += c * x;
            }
        }
    }
    out
}

/// Draws one pattern site by site from the chain-rule conditionals.
pub fn sample_chain<R: Rng + ?Sized>(mps: &MpsState, rng: &mut R) -> Result<PhotonPattern> {
    chain(&mps.gammas, &mps.lambdas, rng)
}

fn chain<R: Rng + ?Sized>(gammas: &[Tensor3], lambdas: &[Vec<f64>], rng: &mut R) -> Result<PhotonPattern> {
    let mut v = vec![Complex64::new(1.0, 0.0)];
    let mut counts = Vec::with_capacity(gammas.len());
    for (k, g) in gammas.iter().enumerate() {
        let lam = lambdas.get(k);
        let mut candidates: Vec<Vec<Complex64>> = Vec::with_capacity(g.d);
        let mut weights = Vec::with_capacity(g.d);
        for n in 0..g.d {
            let slice = g.slice(n);
            let mut w = vec![ZERO; g.right];
            for (a, va) in v.iter().enumerate() {
                for (o, x) in w.iter_mut().zip(&slice[a * g.right..(a + 1) * g.right]) {
                    *o += va * x;
                }
            }
            if let Some(lam) = lam {
                for (o, l) in w.iter_mut().zip(lam) {
                    *o *= l;
                }
            }
            weights.push(w.iter().map(|z| z.norm_sqr()).sum::<f64>());
            candidates.push(w);
        }
        let mass: f64 = weights.iter().sum();
        if !(mass >= STARVATION_MASS) {
            return Err(Error::CutoffStarvation { mode: k, mass });
        }
        if 1.0 - mass > LEAKAGE_LOG {
            log::debug!("mode {k}: conditional leakage {:.3e}", 1.0 - mass);
        }
        let u = rng.random::<f64>() * mass;
        let mut acc = 0.0;
        let mut pick = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        for (n, &w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                pick = n;
                break;
            }
        }
        let scale = weights[pick].sqrt().recip();
        v = candidates.swap_remove(pick).into_iter().map(|z| z * scale).collect();
        counts.push(pick);
    }
    Ok(PhotonPattern(counts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub modes: usize,
    pub shots: usize,
    pub seed: u64,
    pub detector: Detector,
    pub patterns: Vec<PhotonPattern>,
}

impl SampleBatch {
    pub fn new(modes: usize, seed: u64, detector: Detector, patterns: Vec<PhotonPattern>) -> Self {
        Self { modes, shots: patterns.len(), seed, detector, patterns }
    }

    /// Sum of photon numbers (or clicks) per mode divided by shots.
    pub fn mean_counts(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.modes];
        for p in &self.patterns {
            for (o, &c) in out.iter_mut().zip(p.counts()) {
                *o += c as f64;
            }
        }
        out.iter_mut().for_each(|o| *o /= self.shots.max(1) as f64);
        out
    }

    /// Same batch read out with threshold detectors.
    pub fn to_threshold(&self) -> Self {
        Self {
            detector: Detector::Threshold,
            patterns: self.patterns.iter().map(PhotonPattern::clicks).collect(),
            ..self.clone()
        }
    }
}

/// Draws `shots` patterns, each with a fresh displacement from `W`. Shot
/// `i` uses its own RNG stream, so the result does not depend on the
/// number of worker threads.
pub fn sample_batch(
    mps: &MpsState,
    w: &RMat,
    shots: usize,
    seed: u64,
    detector: Detector,
    d_sample: usize,
) -> Result<SampleBatch> {
    if w.nrows() != 2 * mps.modes {
        return Err(Error::Dimension(format!("W is {}x{} for {} modes", w.nrows(), w.ncols(), mps.modes)));
    }
    let noise = DisplacementSampler::new(w)?;
    let noiseless = w.iter().all(|&x| x == 0.0);
    let base: Vec<Tensor3> = mps.gammas.iter().map(|g| g.with_local_dim(d_sample)).collect();
    let patterns = (0..shots)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let m = if noiseless {
                chain(&base, &mps.lambdas, &mut rng)?
            } else {
                let draw = noise.draw(&mut rng);
                let displaced: Vec<Tensor3> =
                    mps.gammas.iter().zip(&draw.beta).map(|(g, &b)| displace_tensor(g, b, d_sample)).collect();
                chain(&displaced, &mps.lambdas, &mut rng)?
            };
            Ok(detector.apply(m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleBatch::new(mps.modes, seed, detector, patterns))
}

/// Dense statevector of the pure part plus the displacement channel; valid
/// only at small scale.
#[derive(Debug, Clone)]
pub struct DenseOracle {
    modes: usize,
    cutoff: usize,
    psi: Vec<Complex64>,
    noise: Option<DisplacementSampler>,
}

/// Estimate with its Monte-Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl DenseOracle {
    /// `factors` describe `V_p = S S^T`; amplitudes are `<n|U|0>`.
    pub fn new(factors: &GaussianUnitaryFactors, w: &RMat, cutoff: usize) -> Result<Self> {
        let modes = factors.modes();
        if modes > ORACLE_MAX_MODES || cutoff > ORACLE_MAX_CUTOFF {
            return Err(Error::OracleScale(format!(
                "{modes} modes at cutoff {cutoff} (limits {ORACLE_MAX_MODES}, {ORACLE_MAX_CUTOFF})"
            )));
        }
        if cutoff == 0 {
            return Err(Error::OutOfRange("oracle cutoff must be positive".into()));
        }
        if w.nrows() != 2 * modes || w.ncols() != 2 * modes {
            return Err(Error::Dimension(format!("W is {}x{} for {modes} modes", w.nrows(), w.ncols())));
        }
        let sigma = build_sigma(factors);
        let vacuum = PhotonPattern::zeros(modes);
        let size = cutoff.pow(modes as u32);
        let psi = (0..size)
            .into_par_iter()
            .map(|i| sigma.amplitude(&pattern_of(i, modes, cutoff), &vacuum, usize::MAX))
            .collect::<Result<Vec<_>>>()?;
        let noise = if w.iter().all(|&x| x == 0.0) { None } else { Some(DisplacementSampler::new(w)?) };
        Ok(Self { modes, cutoff, psi, noise })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// All patterns with every entry below the cutoff, in index order.
    pub fn patterns(&self) -> Vec<PhotonPattern> {
        (0..self.psi.len()).map(|i| pattern_of(i, self.modes, self.cutoff)).collect()
    }

    /// Index of `m` in [`DenseOracle::patterns`], if inside the cutoff.
    pub fn index_of(&self, m: &PhotonPattern) -> Option<usize> {
        if m.len() != self.modes || m.counts().iter().any(|&c| c >= self.cutoff) {
            return None;
        }
        Some(m.counts().iter().fold(0, |acc, &c| acc * self.cutoff + c))
    }

    /// `|<m|D(beta)|psi_p>|^2` for every pattern.
    pub fn displaced_probabilities(&self, beta: &[Complex64]) -> Vec<f64> {
        let c = self.cutoff;
        let mut state = self.psi.clone();
        for (k, &b) in beta.iter().enumerate() {
            if b == ZERO {
                continue;
            }
            let d = displacement_matrix(b, c);
            let inner = c.pow((self.modes - 1 - k) as u32);
            let outer = state.len() / (inner * c);
            let mut next = vec![ZERO; state.len()];
            for o in 0..outer {
                for m in 0..c {
                    for n in 0..c {
                        let dmn = d[(m, n)];
                        if dmn == ZERO {
                            continue;
                        }
                        for i in 0..inner {
                            next[(o * c + m) * inner + i] += dmn * state[(o * c + n) * inner + i];
                        }
                    }
                }
            }
            state = next;
        }
        state.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Monte-Carlo estimate of every pattern probability over `draws`
    /// displacement samples. Exact (zero error) without noise.
    pub fn distribution(&self, draws: usize, seed: u64) -> Vec<Estimate> {
        let Some(noise) = &self.noise else {
            return self.psi.iter().map(|z| Estimate { value: z.norm_sqr(), stderr: 0.0 }).collect();
        };
        const CHUNK: usize = 256;
        let len = self.psi.len();
        let chunks = draws.div_ceil(CHUNK);
        let partial: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut s1 = vec![0.0; len];
                let mut s2 = vec![0.0; len];
                for i in c * CHUNK..((c + 1) * CHUNK).min(draws) {
                    let draw = noise.draw(&mut stream_rng(seed, i as u64));
                    for ((a, b), p) in s1.iter_mut().zip(&mut s2).zip(self.displaced_probabilities(&draw.beta)) {
                        *a += p;
                        *b += p * p;
                    }
                }
                (s1, s2)
            })
            .collect();
        let mut s1 = vec![0.0; len];
        let mut s2 = vec![0.0; len];
        for (a, b) in partial {
            s1.iter_mut().zip(a).for_each(|(x, y)| *x += y);
            s2.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        let n = draws.max(1) as f64;
        s1.iter()
            .zip(&s2)
            .map(|(&a, &b)| {
                let mean = a / n;
                let var = (b / n - mean * mean).max(0.0);
                let stderr = if draws > 1 { (var * n / (n - 1.0) / n).sqrt() } else { 0.0 };
                Estimate { value: mean, stderr }
            })
            .collect()
    }

    /// Probability of a single pattern; zero outside the cutoff.
    pub fn probability(&self, m: &PhotonPattern, draws: usize, seed: u64) -> Result<Estimate> {
        if m.len() != self.modes {
            return Err(Error::Dimension(format!("pattern has {} modes, oracle has {}", m.len(), self.modes)));
        }
        let Some(i) = self.index_of(m) else {
            return Ok(Estimate { value: 0.0, stderr: 0.0 });
        };
        let Some(noise) = &self.noise else {
            return Ok(Estimate { value: self.psi[i].norm_sqr(), stderr: 0.0 });
        };
        let values: Vec<f64> = (0..draws)
            .into_par_iter()
            .map(|d| {
                let draw = noise.draw(&mut stream_rng(seed, d as u64));
                self.pattern_probability(m, &draw.beta)
            })
            .collect();
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Ok(Estimate { value: mean, stderr: (var / n).sqrt() })
    }

    fn pattern_probability(&self, m: &PhotonPattern, beta: &[Complex64]) -> f64 {
        let c = self.cutoff;
        let rows: Vec<Vec<Complex64>> = beta
            .iter()
            .zip(m.counts())
            .map(|(&b, &mk)| {
                let d = displacement_matrix(b, c);
                (0..c).map(|n| d[(mk, n)]).collect()
            })
            .collect();
        let amp: Complex64 = self
            .psi
            .iter()
            .enumerate()
            .filter(|(_, z)| **z != ZERO)
            .map(|(i, z)| {
                let n = pattern_of(i, self.modes, c);
                n.counts().iter().zip(&rows).fold(*z, |acc, (&nk, row)| acc * row[nk])
            })
            .sum();
        amp.norm_sqr()
    }
}

/// Mixed-radix pattern, mode 0 most significant.
fn pattern_of(mut i: usize, modes: usize, cutoff: usize) -> PhotonPattern {
    let mut counts = vec![0; modes];
    for k in (0..modes).rev() {
        counts[k] = i % cutoff;
        i /= cutoff;
    }
    PhotonPattern(counts)
}

/// Monte-Carlo probability of one pattern under `V_p` factors and noise `W`.
pub fn oracle_probability(
    factors: &GaussianUnitaryFactors,
    w: &RMat,
    m: &PhotonPattern,
    cutoff: usize,
    draws: usize,
    seed: u64,
) -> Result<Estimate> {
    DenseOracle::new(factors, w, cutoff)?.probability(m, draws, seed)
}
