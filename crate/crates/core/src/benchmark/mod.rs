//! Sample quality metrics: cross entropy per photon sector, total variation
//! distance, correlation functions and the Bayesian score.

mod cumulant;
mod truth;

pub use cumulant::{
    cumulant, cumulant_from_moments, cumulant_table, ground_truth_two_point, joint_moments, mode_pairs,
    sample_two_point, set_partitions, spearman, spearman_by_order, two_point_stats, CumulantTable, OrderCorrelation,
    SpearmanOptions, TwoPointStats, MAX_CUMULANT_ORDER, choose_subsets,
};
pub use truth::GaussianTruth;

use crate::error::{Error, Result};
use crate::hafnian::PhotonPattern;
use crate::sampler::{Detector, SampleBatch};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Probabilities (or empirical frequencies) over photon patterns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Distribution {
    modes: usize,
    probs: BTreeMap<PhotonPattern, f64>,
}

impl Distribution {
    pub fn new(modes: usize, probs: BTreeMap<PhotonPattern, f64>) -> Result<Self> {
        if let Some(p) = probs.keys().find(|p| p.len() != modes) {
            return Err(Error::Dimension(format!("pattern ({p}) in a {modes}-mode distribution")));
        }
        Ok(Self { modes, probs })
    }

    /// Frequencies of the patterns in a list.
    pub fn from_patterns(modes: usize, patterns: &[PhotonPattern]) -> Result<Self> {
        let mut counts: BTreeMap<PhotonPattern, f64> = BTreeMap::new();
        for p in patterns {
            *counts.entry(p.clone()).or_default() += 1.0;
        }
        let n = patterns.len().max(1) as f64;
        counts.values_mut().for_each(|c| *c /= n);
        Self::new(modes, counts)
    }

    pub fn from_batch(batch: &SampleBatch) -> Result<Self> {
        Self::from_patterns(batch.modes, &batch.patterns)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probability(&self, m: &PhotonPattern) -> f64 {
        self.probs.get(m).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PhotonPattern, f64)> {
        self.probs.iter().map(|(p, &v)| (p, v))
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    /// `Pr(N)`: mass of all patterns with `N` photons (or clicks).
    pub fn sector_probability(&self, n: usize) -> f64 {
        self.iter().filter(|(p, _)| p.total() == n).map(|(_, v)| v).sum()
    }

    /// Same distribution read out with threshold detectors.
    pub fn to_threshold(&self) -> Self {
        let mut out: BTreeMap<PhotonPattern, f64> = BTreeMap::new();
        for (p, v) in self.iter() {
            *out.entry(p.clicks()).or_default() += v;
        }
        Self { modes: self.modes, probs: out }
    }

    pub fn for_detector(&self, detector: Detector) -> Self {
        match detector {
            Detector::Pnr => self.clone(),
            Detector::Threshold => self.to_threshold(),
        }
    }
}

/// `1/2 sum |p_a - p_b|` over the union of supports.
pub fn tvd_empirical(a: &Distribution, b: &Distribution) -> f64 {
    let (na, nb) = (a.total(), b.total());
    let norm = |x: f64, n: f64| if n > 0.0 { x / n } else { 0.0 };
    let mut sum = 0.0;
    for (p, v) in a.iter() {
        sum += (norm(v, na) - norm(b.probability(p), nb)).abs();
    }
    for (p, v) in b.iter() {
        if !a.probs.contains_key(p) {
            sum += norm(v, nb);
        }
    }
    (0.5 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorXeb {
    pub sector: usize,
    pub xe: f64,
    pub stderr: f64,
    /// In-sector samples that entered the mean.
    pub samples: usize,
    /// In-sector samples with zero ideal probability.
    pub excluded: usize,
    /// Probability of the sector under the ideal distribution.
    pub sector_probability: f64,
    pub normalization: f64,
}

/// Number of outcomes in sector `n` on `m` modes.
pub fn sector_size(m: usize, n: usize, detector: Detector) -> f64 {
    match detector {
        Detector::Pnr => binomial(n + m - 1, n),
        Detector::Threshold => binomial(m, n),
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Cross entropy of the in-sector samples against the ideal distribution,
/// relative to the sector-uniform value `Pr(N) / |sector|`.
pub fn xeb(batch: &SampleBatch, ideal: &Distribution, sector: usize) -> Result<SectorXeb> {
    if ideal.modes() != batch.modes {
        return Err(Error::Dimension(format!("samples on {} modes, ideal on {}", batch.modes, ideal.modes())));
    }
    let pr_n = ideal.sector_probability(sector);
    let size = sector_size(batch.modes, sector, batch.detector);
    let normalization = pr_n / size;
    if !(normalization > 0.0) {
        return Err(Error::Degenerate(format!("sector {sector} has zero ideal probability")));
    }
    let mut logs = Vec::new();
    let mut excluded = 0;
    for p in batch.patterns.iter().filter(|p| p.total() == sector) {
        let q = ideal.probability(p);
        if q > 0.0 {
            logs.push((q / normalization).ln());
        } else {
            excluded += 1;
        }
    }
    if logs.is_empty() {
        return Err(Error::EmptySector(sector));
    }
    let (xe, stderr) = mean_stderr(&logs);
    Ok(SectorXeb { sector, xe, stderr, samples: logs.len(), excluded, sector_probability: pr_n, normalization })
}

/// Cross entropy pooled over all sectors: the mean over every sample of
/// `log(p_id(S) / N_{|S|})`, each sample normalized by its own sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PooledXeb {
    pub xe: f64,
    pub stderr: f64,
    pub samples: usize,
    pub excluded: usize,
}

pub fn xeb_all_sectors(batch: &SampleBatch, ideal: &Distribution) -> Result<PooledXeb> {
    if ideal.modes() != batch.modes {
        return Err(Error::Dimension(format!("samples on {} modes, ideal on {}", batch.modes, ideal.modes())));
    }
    let mut norms: BTreeMap<usize, f64> = BTreeMap::new();
    let mut logs = Vec::with_capacity(batch.shots);
    let mut excluded = 0;
    for p in &batch.patterns {
        let n = p.total();
        let norm = *norms
            .entry(n)
            .or_insert_with(|| ideal.sector_probability(n) / sector_size(batch.modes, n, batch.detector));
        let q = ideal.probability(p);
        if q > 0.0 && norm > 0.0 {
            logs.push((q / norm).ln());
        } else {
            excluded += 1;
        }
    }
    if logs.is_empty() {
        return Err(Error::Degenerate("no sample has nonzero ideal probability".into()));
    }
    let (xe, stderr) = mean_stderr(&logs);
    Ok(PooledXeb { xe, stderr, samples: logs.len(), excluded })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesScore {
    pub score: f64,
    pub stderr: f64,
    pub samples: usize,
    /// Samples with zero probability under either model.
    pub excluded: usize,
}

/// Mean of `log[Pr_G(m) Pr_s(N) / (Pr_s(m) Pr_G(N))]`. Positive when the
/// samples are better described by `ground` than by `alternative`.
pub fn bayesian_score(batch: &SampleBatch, ground: &Distribution, alternative: &Distribution) -> Result<BayesScore> {
    if ground.modes() != batch.modes || alternative.modes() != batch.modes {
        return Err(Error::Dimension("samples and models disagree on the mode count".into()));
    }
    let mut sectors: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    let mut terms = Vec::with_capacity(batch.shots);
    let mut excluded = 0;
    for p in &batch.patterns {
        let n = p.total();
        let (gn, sn) =
            *sectors.entry(n).or_insert_with(|| (ground.sector_probability(n), alternative.sector_probability(n)));
        let (g, s) = (ground.probability(p), alternative.probability(p));
        if g > 0.0 && s > 0.0 && gn > 0.0 && sn > 0.0 {
            terms.push((g * sn / (s * gn)).ln());
        } else {
            excluded += 1;
        }
    }
    if terms.is_empty() {
        return Err(Error::Degenerate("no sample has nonzero probability under both models".into()));
    }
    let (score, stderr) = mean_stderr(&terms);
    Ok(BayesScore { score, stderr, samples: terms.len(), excluded })
}

pub(crate) fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(entries: &[(&[usize], f64)]) -> Distribution {
        let m = entries[0].0.len();
        Distribution::new(m, entries.iter().map(|(p, v)| (PhotonPattern(p.to_vec()), *v)).collect()).unwrap()
    }

    fn batch(patterns: &[&[usize]], detector: Detector) -> SampleBatch {
        let m = patterns[0].len();
        SampleBatch::new(m, 0, detector, patterns.iter().map(|p| PhotonPattern(p.to_vec())).collect())
    }

    #[test]
    fn tvd_examples() {
        let a = dist(&[(&[0], 0.6), (&[1], 0.4)]);
        let b = dist(&[(&[0], 0.5), (&[1], 0.5)]);
        assert!((tvd_empirical(&a, &b) - 0.1).abs() < 1e-15);
        assert_eq!(tvd_empirical(&a, &a), 0.0);
        let c = dist(&[(&[2], 1.0)]);
        assert_eq!(tvd_empirical(&a, &c), 1.0);
    }

    #[test]
    fn uniform_ideal_gives_zero_xe() {
        // Sector 2 on 2 modes has 3 patterns.
        let ideal = dist(&[(&[0, 0], 0.4), (&[2, 0], 0.2), (&[1, 1], 0.2), (&[0, 2], 0.2)]);
        let b = batch(&[&[2, 0], &[1, 1], &[1, 1], &[0, 0]], Detector::Pnr);
        let x = xeb(&b, &ideal, 2).unwrap();
        assert!(x.xe.abs() < 1e-12);
        assert_eq!(x.samples, 3);
        let x0 = xeb(&b, &ideal, 0).unwrap();
        assert!(x0.xe.abs() < 1e-12);
        assert!(matches!(xeb(&b, &ideal, 1), Err(Error::Degenerate(_))));
    }

    #[test]
    fn pooled_xe_is_sample_weighted() {
        let ideal = dist(&[(&[0, 0], 0.5), (&[2, 0], 0.3), (&[1, 1], 0.1), (&[0, 2], 0.1)]);
        let b = batch(&[&[2, 0], &[1, 1], &[0, 0]], Detector::Pnr);
        let x2 = xeb(&b, &ideal, 2).unwrap();
        let all = xeb_all_sectors(&b, &ideal).unwrap();
        assert!((all.xe - x2.xe * 2.0 / 3.0).abs() < 1e-14);
        assert_eq!(all.samples, 3);
    }

    #[test]
    fn xe_ignores_other_sectors() {
        let ideal = dist(&[(&[0, 0], 0.5), (&[2, 0], 0.3), (&[1, 1], 0.1), (&[0, 2], 0.1)]);
        let b1 = batch(&[&[2, 0], &[1, 1]], Detector::Pnr);
        let b2 = batch(&[&[2, 0], &[1, 1], &[0, 0], &[0, 0], &[0, 0]], Detector::Pnr);
        assert_eq!(xeb(&b1, &ideal, 2).unwrap().xe, xeb(&b2, &ideal, 2).unwrap().xe);
    }

    #[test]
    fn threshold_normalization_uses_subsets() {
        assert_eq!(sector_size(4, 2, Detector::Threshold), 6.0);
        assert_eq!(sector_size(4, 2, Detector::Pnr), 10.0);
        assert_eq!(sector_size(3, 0, Detector::Pnr), 1.0);
    }

    #[test]
    fn bayes_identical_models() {
        let g = dist(&[(&[0], 0.5), (&[2], 0.5)]);
        let b = batch(&[&[0], &[2], &[2]], Detector::Pnr);
        let s = bayesian_score(&b, &g, &g).unwrap();
        assert_eq!(s.score, 0.0);
        let zero = dist(&[(&[0], 1.0)]);
        let s = bayesian_score(&b, &g, &zero).unwrap();
        assert_eq!(s.excluded, 2);
    }

    #[test]
    fn threshold_view_merges_counts() {
        let d = dist(&[(&[0, 2], 0.3), (&[0, 1], 0.2), (&[1, 0], 0.5)]);
        let t = d.to_threshold();
        assert!((t.probability(&PhotonPattern(vec![0, 1])) - 0.5).abs() < 1e-15);
        assert_eq!(t.len(), 2);
    }
}
