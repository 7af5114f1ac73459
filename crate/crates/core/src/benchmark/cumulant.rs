//! Joint cumulants of photon counts or clicks and the statistics built on
//! them.

use super::{Distribution, GaussianTruth};
use crate::error::{Error, Result};
use crate::gaussian::CovMatrix;
use crate::hafnian::PhotonPattern;
use crate::sampler::{stream_rng, Detector, SampleBatch};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

pub const MAX_CUMULANT_ORDER: usize = 6;

/// All set partitions of `{0, .., k-1}`, each as a list of blocks.
pub fn set_partitions(k: usize) -> Vec<Vec<Vec<usize>>> {
    fn grow(i: usize, k: usize, labels: &mut Vec<usize>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == k {
            let blocks = labels.iter().max().map_or(0, |m| m + 1);
            let mut p = vec![Vec::new(); blocks];
            for (e, &l) in labels.iter().enumerate() {
                p[l].push(e);
            }
            out.push(p);
            return;
        }
        let next = labels.iter().max().map_or(0, |m| m + 1);
        for l in 0..=next {
            labels.push(l);
            grow(i + 1, k, labels, out);
            labels.pop();
        }
    }
    let mut out = Vec::new();
    grow(0, k, &mut Vec::with_capacity(k), &mut out);
    out
}

fn check_modes(dist: &Distribution, modes: &[usize]) -> Result<()> {
    if modes.is_empty() || modes.len() > MAX_CUMULANT_ORDER {
        return Err(Error::OutOfRange(format!(
            "cumulant order must be in 1..={MAX_CUMULANT_ORDER}, got {}",
            modes.len()
        )));
    }
    if let Some(&i) = modes.iter().find(|&&i| i >= dist.modes()) {
        return Err(Error::Dimension(format!("mode {i} out of range for {} modes", dist.modes())));
    }
    Ok(())
}

/// `E[prod_{i in b} n_{modes[i]}]` for every subset `b` of positions, indexed
/// by bitmask.
pub fn joint_moments(dist: &Distribution, modes: &[usize]) -> Result<Vec<f64>> {
    check_modes(dist, modes)?;
    let k = modes.len();
    let mut mu = vec![0.0; 1 << k];
    let mut prod = vec![0.0; 1 << k];
    for (p, w) in dist.iter() {
        prod[0] = 1.0;
        for mask in 1usize..1 << k {
            let low = mask.trailing_zeros() as usize;
            prod[mask] = prod[mask & (mask - 1)] * p.counts()[modes[low]] as f64;
        }
        for (m, x) in mu.iter_mut().zip(&prod) {
            *m += w * x;
        }
    }
    let total = dist.total();
    if !(total > 0.0) {
        return Err(Error::Degenerate("empty distribution".into()));
    }
    mu.iter_mut().for_each(|m| *m /= total);
    Ok(mu)
}

fn mask_partitions(mask: usize) -> Vec<Vec<usize>> {
    let elems: Vec<usize> = (0..usize::BITS as usize).filter(|b| mask >> b & 1 == 1).collect();
    set_partitions(elems.len())
        .into_iter()
        .map(|p| p.into_iter().map(|block| block.iter().fold(0, |acc, &e| acc | 1 << elems[e])).collect())
        .collect()
}

/// Joint cumulant by the recursion
/// `kappa(S) = E[prod S] - sum over partitions with >= 2 blocks of prod kappa(block)`.
pub fn cumulant(dist: &Distribution, modes: &[usize]) -> Result<f64> {
    let mu = joint_moments(dist, modes)?;
    let full = (1usize << modes.len()) - 1;
    let mut masks: Vec<usize> = (1..=full).collect();
    masks.sort_by_key(|m| m.count_ones());
    let mut kappa = vec![0.0; full + 1];
    for mask in masks {
        let split: f64 = mask_partitions(mask)
            .into_iter()
            .filter(|p| p.len() >= 2)
            .map(|p| p.iter().map(|&b| kappa[b]).product::<f64>())
            .sum();
        kappa[mask] = mu[mask] - split;
    }
    Ok(kappa[full])
}

/// Joint cumulant by the closed moment expansion
/// `sum_pi (-1)^{|pi|-1} (|pi|-1)! prod_b E[prod b]`.
pub fn cumulant_from_moments(dist: &Distribution, modes: &[usize]) -> Result<f64> {
    let mu = joint_moments(dist, modes)?;
    let full = (1usize << modes.len()) - 1;
    Ok(mask_partitions(full)
        .into_iter()
        .map(|p| {
            let b = p.len();
            let coef = (1..b).fold(1.0, |acc, i| acc * i as f64) * if b % 2 == 1 { 1.0 } else { -1.0 };
            coef * p.iter().map(|&blk| mu[blk]).product::<f64>()
        })
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantTable {
    pub order: usize,
    pub subsets: Vec<Vec<usize>>,
    pub values: Vec<f64>,
    /// Bootstrap standard errors (empty when no resampling was requested).
    pub stderr: Vec<f64>,
}

fn resample(batch: &SampleBatch, seed: u64, index: u64) -> Result<Distribution> {
    let mut rng = stream_rng(seed, index);
    let n = batch.patterns.len();
    let picks: Vec<PhotonPattern> = (0..n).map(|_| batch.patterns[rng.random_range(0..n)].clone()).collect();
    Distribution::from_patterns(batch.modes, &picks)
}

/// Cumulants of the samples over each subset, with bootstrap errors.
pub fn cumulant_table(batch: &SampleBatch, subsets: &[Vec<usize>], resamples: usize, seed: u64) -> Result<CumulantTable> {
    let order = subsets.first().map_or(0, Vec::len);
    if subsets.iter().any(|s| s.len() != order) {
        return Err(Error::Dimension("subsets of mixed order".into()));
    }
    let dist = Distribution::from_batch(batch)?;
    let values = subsets.iter().map(|s| cumulant(&dist, s)).collect::<Result<Vec<_>>>()?;
    let stderr = if resamples > 1 {
        let boots = (0..resamples)
            .into_par_iter()
            .map(|r| {
                let d = resample(batch, seed, r as u64)?;
                subsets.iter().map(|s| cumulant(&d, s)).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        (0..subsets.len())
            .map(|i| {
                let xs: Vec<f64> = boots.iter().map(|b| b[i]).collect();
                std_dev(&xs)
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(CumulantTable { order, subsets: subsets.to_vec(), values, stderr })
}

fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
}

/// All unordered pairs `i < j`.
pub fn mode_pairs(m: usize) -> Vec<(usize, usize)> {
    (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect()
}

/// Second-order cumulants of a distribution for the given pairs.
pub fn sample_two_point(dist: &Distribution, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    pairs.iter().map(|&(i, j)| cumulant(dist, &[i, j])).collect()
}

/// Exact `Cov(n_i, n_j)` (or click covariances) of a zero-mean Gaussian
/// state, in [`mode_pairs`] order.
pub fn ground_truth_two_point(v: &CovMatrix, detector: Detector) -> Result<Vec<f64>> {
    let m = v.modes();
    let d = v.data();
    match detector {
        // Wick: Cov(a^2, b^2) = 2 V_ab^2 for the quadratures a, b.
        Detector::Pnr => Ok(mode_pairs(m)
            .into_iter()
            .map(|(i, j)| {
                let s: f64 = [(i, j), (i, j + m), (i + m, j), (i + m, j + m)].iter().map(|&(a, b)| d[(a, b)].powi(2)).sum();
                s / 8.0
            })
            .collect()),
        Detector::Threshold => {
            let t = GaussianTruth::new(v)?;
            Ok(mode_pairs(m)
                .into_iter()
                .map(|(i, j)| t.vacuum_probability(&[i, j]) - t.vacuum_probability(&[i]) * t.vacuum_probability(&[j]))
                .collect())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointStats {
    /// Least-squares slope of sample against truth, fitted with intercept.
    pub slope: f64,
    pub intercept: f64,
    /// Slope of the fit through the origin.
    pub slope_origin: f64,
    pub pearson: f64,
    /// Euclidean distance between the two vectors.
    pub distance: f64,
}

pub fn two_point_stats(sample: &[f64], truth: &[f64]) -> Result<TwoPointStats> {
    if sample.len() != truth.len() {
        return Err(Error::Dimension(format!("{} sample values, {} truth values", sample.len(), truth.len())));
    }
    let n = truth.len() as f64;
    let mt = truth.iter().sum::<f64>() / n;
    let ms = sample.iter().sum::<f64>() / n;
    let stt: f64 = truth.iter().map(|t| (t - mt).powi(2)).sum();
    let sss: f64 = sample.iter().map(|s| (s - ms).powi(2)).sum();
    let sts: f64 = truth.iter().zip(sample).map(|(t, s)| (t - mt) * (s - ms)).sum();
    // Spread at roundoff level counts as none.
    let scale = truth.iter().fold(0.0f64, |a, t| a.max(t.abs())).max(1e-12);
    if truth.len() < 2 || !(stt > n * (1e-10 * scale).powi(2)) {
        return Err(Error::Degenerate("truth vector has no spread".into()));
    }
    let slope = sts / stt;
    let tt: f64 = truth.iter().map(|t| t * t).sum();
    let ts: f64 = truth.iter().zip(sample).map(|(t, s)| t * s).sum();
    let pearson = if sss > 0.0 { sts / (stt * sss).sqrt() } else { 0.0 };
    let distance = truth.iter().zip(sample).map(|(t, s)| (t - s).powi(2)).sum::<f64>().sqrt();
    Ok(TwoPointStats { slope, intercept: ms - slope * mt, slope_origin: ts / tt, pearson, distance })
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("{} vs {} values", a.len(), b.len())));
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let m = (n + 1.0) / 2.0;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - m) * (y - m)).sum();
    let va: f64 = ra.iter().map(|x| (x - m).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - m).powi(2)).sum();
    if !(va > 0.0 && vb > 0.0) {
        return Err(Error::Degenerate("constant ranks".into()));
    }
    Ok(cov / (va * vb).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpearmanOptions {
    pub orders: Vec<usize>,
    /// Largest number of subsets per order for orders >= 3.
    pub budget: usize,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for SpearmanOptions {
    fn default() -> Self {
        Self { orders: (1..=MAX_CUMULANT_ORDER).collect(), budget: 20_000, resamples: 1000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderCorrelation {
    pub order: usize,
    pub subsets: usize,
    pub rho: f64,
    pub stderr: f64,
    /// 2.5% and 97.5% bootstrap percentiles.
    pub ci: (f64, f64),
}

fn binomial_u128(n: usize, k: usize) -> u128 {
    let k = k.min(n.saturating_sub(k));
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i + 1) as u128)
}

/// Mode subsets of size `k`: all of them for `k <= 2` or when they fit the
/// budget, otherwise `budget` distinct subsets drawn by seeded shuffles.
pub fn choose_subsets(m: usize, k: usize, budget: usize, seed: u64) -> Vec<Vec<usize>> {
    fn all(m: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            all(m, k, i + 1, cur, out);
            cur.pop();
        }
    }
    if k > m {
        return Vec::new();
    }
    if k <= 2 || binomial_u128(m, k) <= budget as u128 {
        let mut out = Vec::new();
        all(m, k, 0, &mut Vec::with_capacity(k), &mut out);
        return out;
    }
    let mut rng = stream_rng(seed, k as u64);
    let mut chosen = BTreeSet::new();
    let mut pool: Vec<usize> = (0..m).collect();
    while chosen.len() < budget {
        for i in 0..k {
            let j = rng.random_range(i..m);
            pool.swap(i, j);
        }
        let mut s = pool[..k].to_vec();
        s.sort_unstable();
        chosen.insert(s);
    }
    chosen.into_iter().collect()
}

/// Per-order Spearman correlation between sample and ground-truth
/// cumulants, with bootstrap errors over resampled shots.
pub fn spearman_by_order(batch: &SampleBatch, truth: &Distribution, opts: &SpearmanOptions) -> Result<Vec<OrderCorrelation>> {
    if opts.budget == 0 {
        return Err(Error::OutOfRange("subset budget must be positive".into()));
    }
    if truth.modes() != batch.modes {
        return Err(Error::Dimension("samples and truth disagree on the mode count".into()));
    }
    let dist = Distribution::from_batch(batch)?;
    let mut out = Vec::new();
    for &k in &opts.orders {
        let subsets = choose_subsets(batch.modes, k, opts.budget, opts.seed);
        if subsets.len() < 2 {
            log::warn!("order {k}: fewer than two subsets, skipped");
            continue;
        }
        let truth_k = subsets.iter().map(|s| cumulant(truth, s)).collect::<Result<Vec<_>>>()?;
        let sample_k = subsets.iter().map(|s| cumulant(&dist, s)).collect::<Result<Vec<_>>>()?;
        let rho = match spearman(&sample_k, &truth_k) {
            Ok(r) => r,
            Err(Error::Degenerate(_)) => {
                log::warn!("order {k}: constant cumulants, skipped");
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut boots = (0..opts.resamples)
            .into_par_iter()
            .map(|r| {
                let d = resample(batch, opts.seed ^ 0x5eed_0000 ^ k as u64, r as u64)?;
                let s = subsets.iter().map(|s| cumulant(&d, s)).collect::<Result<Vec<_>>>()?;
                Ok(spearman(&s, &truth_k).unwrap_or(0.0))
            })
            .collect::<Result<Vec<f64>>>()?;
        boots.sort_by(f64::total_cmp);
        let (stderr, ci) = if boots.len() > 1 {
            let pick = |q: f64| boots[((boots.len() - 1) as f64 * q).round() as usize];
            (std_dev(&boots), (pick(0.025), pick(0.975)))
        } else {
            (0.0, (rho, rho))
        };
        out.push(OrderCorrelation { order: k, subsets: subsets.len(), rho, stderr, ci });
    }
    Ok(out)
}
