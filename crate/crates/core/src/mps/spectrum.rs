//! Photon-pattern enumeration for the thermal spectrum across a bond.

use crate::error::Result;
use crate::gaussian::{reduced_covariance, williamson, CovMatrix, WilliamsonResult};
use crate::hafnian::PhotonPattern;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Thermal occupations below this are treated as exactly zero.
pub const NBAR_FLOOR: f64 = 1e-11;

/// Reduced-state spectrum of the modes to the right of a bond.
#[derive(Debug, Clone)]
pub struct BondSpectrum {
    /// Thermal means of the Williamson modes, in Williamson order.
    pub nbar: Vec<f64>,
    pub patterns: Vec<PhotonPattern>,
    /// `p_T(n)` for each kept pattern, nonincreasing.
    pub weights: Vec<f64>,
}

impl BondSpectrum {
    pub fn lambdas(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.sqrt()).collect()
    }

    pub fn kept_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// `(nu - 1) / 2` with tiny and negative values snapped to zero.
pub fn thermal_means(w: &WilliamsonResult) -> Vec<f64> {
    w.nu
        .iter()
        .map(|&nu| {
            let n = (nu - 1.0) / 2.0;
            if n < NBAR_FLOOR {
                0.0
            } else {
                n
            }
        })
        .collect()
}

/// Spectrum across bond `bond` (0-based, between modes `bond` and
/// `bond + 1`), keeping at most `chi` patterns.
pub fn bond_spectrum(vp: &CovMatrix, bond: usize, chi: usize) -> Result<BondSpectrum> {
    let m = vp.modes();
    if bond + 1 >= m {
        return Err(crate::Error::Dimension(format!("bond {bond} does not exist for {m} modes")));
    }
    let right: Vec<usize> = (bond + 1..m).collect();
    let w = williamson(&reduced_covariance(vp, &right)?)?;
    Ok(spectrum_from_nbar(thermal_means(&w), chi))
}

pub fn spectrum_from_nbar(nbar: Vec<f64>, chi: usize) -> BondSpectrum {
    let (patterns, weights) = top_patterns(&nbar, chi).into_iter().unzip();
    BondSpectrum { nbar, patterns, weights }
}

struct Entry {
    log_weight: f64,
    pattern: Vec<usize>,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Heavier first; among equal weights the lexicographically smaller
        // pattern wins.
        self.log_weight
            .total_cmp(&other.log_weight)
            .then_with(|| other.pattern.cmp(&self.pattern))
    }
}

/// The `chi` most probable patterns of a product of geometric laws with
/// means `nbar`, in nonincreasing weight order.
pub fn top_patterns(nbar: &[f64], chi: usize) -> Vec<(PhotonPattern, f64)> {
    let ln_r: Vec<f64> = nbar.iter().map(|&n| if n > 0.0 { (n / (n + 1.0)).ln() } else { f64::NEG_INFINITY }).collect();
    let ln_vac: f64 = nbar.iter().map(|&n| -(n + 1.0).ln()).sum();
    let active: Vec<usize> = (0..nbar.len()).filter(|&i| nbar[i] > 0.0).collect();

    let mut out = Vec::with_capacity(chi.min(1 << 16));
    let mut heap = BinaryHeap::new();
    heap.push(Entry { log_weight: ln_vac, pattern: vec![0; nbar.len()] });
    while let Some(Entry { log_weight, pattern }) = heap.pop() {
        if out.len() >= chi {
            break;
        }
        // Children bump a coordinate at or after the last nonzero one, so
        // every pattern has exactly one parent.
        let last = pattern.iter().rposition(|&c| c > 0).unwrap_or(0);
        for &i in active.iter().filter(|&&i| i >= last) {
            let mut child = pattern.clone();
            child[i] += 1;
            heap.push(Entry { log_weight: log_weight + ln_r[i], pattern: child });
        }
        out.push((PhotonPattern(pattern), log_weight.exp()));
    }
    out
}
