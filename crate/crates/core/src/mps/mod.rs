//! Matrix product state of a pure Gaussian state, built tensor by tensor
//! from Fock matrix elements of Gaussian unitaries.

mod persist;
mod spectrum;

pub use persist::{load_mps, read_manifest, save_mps, MpsManifest};
pub use spectrum::{bond_spectrum, spectrum_from_nbar, thermal_means, top_patterns, BondSpectrum, NBAR_FLOOR};

use crate::error::{Error, Result};
use crate::gaussian::{bloch_messiah, reduced_covariance, williamson, CovMatrix, SymplecticMatrix, WilliamsonResult};
use crate::hafnian::{build_sigma, PhotonPattern, DEFAULT_MAX_HAFNIAN};
use crate::linalg::RMat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Singular values below this are not divided out of the tensors.
pub const LAMBDA_FLOOR: f64 = 1e-12;

/// Local tensor `Gamma[n][a][b]`, stored n-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub d: usize,
    pub left: usize,
    pub right: usize,
    pub data: Vec<Complex64>,
}

impl Tensor3 {
    pub fn zeros(d: usize, left: usize, right: usize) -> Self {
        Self { d, left, right, data: vec![Complex64::new(0.0, 0.0); d * left * right] }
    }

    #[inline]
    pub fn index(&self, n: usize, a: usize, b: usize) -> usize {
        (n * self.left + a) * self.right + b
    }

    #[inline]
    pub fn get(&self, n: usize, a: usize, b: usize) -> Complex64 {
        self.data[self.index(n, a, b)]
    }

    /// The `left x right` slice for physical index `n`.
    pub fn slice(&self, n: usize) -> &[Complex64] {
        let len = self.left * self.right;
        &self.data[n * len..(n + 1) * len]
    }

    /// Copy with the physical dimension changed, zero-padding or cutting.
    pub fn with_local_dim(&self, d: usize) -> Self {
        let mut out = Self::zeros(d, self.left, self.right);
        let len = self.left * self.right;
        let keep = d.min(self.d) * len;
        out.data[..keep].copy_from_slice(&self.data[..keep]);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    /// `1 - sum of kept lambda^2` per bond.
    pub bond_errors: Vec<f64>,
    pub center_error: f64,
    /// Largest total photon number among kept bond patterns.
    pub l_max: usize,
    /// Largest hafnian evaluated during construction.
    pub max_hafnian_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpsState {
    pub modes: usize,
    pub d: usize,
    pub chi: usize,
    /// One tensor per mode.
    pub gammas: Vec<Tensor3>,
    /// One vector per bond, bond `k` sitting between modes `k` and `k + 1`.
    pub lambdas: Vec<Vec<f64>>,
    /// Photon patterns labelling each bond index.
    pub patterns: Vec<Vec<PhotonPattern>>,
    pub report: TruncationReport,
}

impl MpsState {
    pub fn bond_dims(&self) -> Vec<usize> {
        self.lambdas.iter().map(Vec::len).collect()
    }

    /// Product vacuum state.
    pub fn vacuum(modes: usize, d: usize) -> Self {
        let gammas = (0..modes)
            .map(|_| {
                let mut t = Tensor3::zeros(d, 1, 1);
                t.data[0] = Complex64::new(1.0, 0.0);
                t
            })
            .collect();
        let bonds = modes.saturating_sub(1);
        Self {
            modes,
            d,
            chi: 1,
            gammas,
            lambdas: vec![vec![1.0]; bonds],
            patterns: vec![vec![PhotonPattern::zeros(0)]; bonds],
            report: TruncationReport { bond_errors: vec![0.0; bonds], center_error: 0.0, l_max: 0, max_hafnian_size: 0 },
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct MpsConfig {
    pub chi: usize,
    pub d: usize,
    pub max_hafnian: usize,
    /// Allowed `max |nu - 1|` of the input.
    pub purity_tol: f64,
}

impl Default for MpsConfig {
    fn default() -> Self {
        Self { chi: 100, d: 4, max_hafnian: DEFAULT_MAX_HAFNIAN, purity_tol: 1e-5 }
    }
}

/// Index of the bond used for the reported truncation error.
pub fn center_bond(modes: usize) -> Option<usize> {
    (modes >= 2).then(|| modes / 2 - 1)
}

/// Center-bond truncation error.
pub fn truncation_error(report: &TruncationReport) -> f64 {
    report.center_error
}

/// Builds the MPS of the pure Gaussian state with covariance `vp`.
pub fn build_mps(vp: &CovMatrix, cfg: &MpsConfig) -> Result<MpsState> {
    if cfg.chi == 0 || cfg.d < 2 {
        return Err(Error::OutOfRange(format!("need chi >= 1 and d >= 2, got chi={} d={}", cfg.chi, cfg.d)));
    }
    let m = vp.modes();
    let full = williamson(vp)?;
    let deviation = full.max_purity_deviation();
    if deviation > cfg.purity_tol {
        return Err(Error::NotPure { deviation });
    }
    let s = full.s.data();
    let vp = CovMatrix::new_unchecked(crate::linalg::symmetrize(&(s * s.transpose())))?;

    // Williamson frame of every suffix k..M; each one is shared by the two
    // tensors that touch it.
    let suffix: Vec<WilliamsonResult> = (0..m)
        .into_par_iter()
        .map(|k| {
            if k == 0 {
                Ok(full.clone())
            } else {
                williamson(&reduced_covariance(&vp, &(k..m).collect::<Vec<_>>())?)
            }
        })
        .collect::<Result<_>>()?;

    let spectra: Vec<BondSpectrum> =
        (1..m).map(|k| spectrum_from_nbar(thermal_means(&suffix[k]), cfg.chi)).collect();
    let lambdas: Vec<Vec<f64>> = spectra.iter().map(BondSpectrum::lambdas).collect();
    let patterns: Vec<Vec<PhotonPattern>> = spectra.iter().map(|s| s.patterns.clone()).collect();

    let mut gammas = Vec::with_capacity(m);
    let mut max_haf = 0;
    for k in 0..m {
        let len = m - k;
        let left_patterns: Vec<PhotonPattern> =
            if k == 0 { vec![PhotonPattern::zeros(len)] } else { patterns[k - 1].clone() };
        let right_patterns: Vec<PhotonPattern> =
            if k + 1 == m { vec![PhotonPattern::zeros(0)] } else { patterns[k].clone() };
        let composite = if k + 1 == m {
            suffix[k].s.clone()
        } else {
            embed_after_first(&suffix[k + 1].s).inverse().compose(&suffix[k].s)
        };
        let factors = bloch_messiah(&composite)?;
        let sigma = build_sigma(&factors);

        let (nl, nr) = (left_patterns.len(), right_patterns.len());
        let cells: Vec<(usize, usize, usize)> =
            (0..cfg.d).flat_map(|n| (0..nl).flat_map(move |a| (0..nr).map(move |b| (n, a, b)))).collect();
        let values: Vec<Complex64> = cells
            .par_iter()
            .map(|&(n, a, b)| {
                let mut out = Vec::with_capacity(len);
                out.push(n);
                out.extend_from_slice(right_patterns[b].counts());
                sigma.amplitude(&PhotonPattern(out), &left_patterns[a], cfg.max_hafnian).map_err(|e| match e {
                    Error::HafnianTooLarge { size, max, context } => Error::HafnianTooLarge {
                        size,
                        max,
                        context: Some(format!("mode {k}: {}", context.unwrap_or_default())),
                    },
                    other => other,
                })
            })
            .collect::<Result<_>>()?;
        for &(n, a, b) in &cells {
            let size = n + left_patterns[a].total() + right_patterns[b].total();
            if size.is_multiple_of(2) {
                max_haf = max_haf.max(size);
            }
        }

        let mut t = Tensor3::zeros(cfg.d, nl, nr);
        t.data = values;
        if k + 1 < m {
            let lam = &lambdas[k];
            for n in 0..cfg.d {
                for a in 0..nl {
                    for (b, &l) in lam.iter().enumerate() {
                        let i = t.index(n, a, b);
                        t.data[i] = if l < LAMBDA_FLOOR { Complex64::new(0.0, 0.0) } else { t.data[i] / l };
                    }
                }
            }
        }
        gammas.push(t);
    }

    let bond_errors: Vec<f64> = spectra.iter().map(|s| (1.0 - s.kept_weight()).clamp(0.0, 1.0)).collect();
    let center_error = center_bond(m).map(|b| bond_errors[b]).unwrap_or(0.0);
    let l_max = patterns.iter().flatten().map(PhotonPattern::total).max().unwrap_or(0);
    Ok(MpsState {
        modes: m,
        d: cfg.d,
        chi: cfg.chi,
        gammas,
        lambdas,
        patterns,
        report: TruncationReport { bond_errors, center_error, l_max, max_hafnian_size: max_haf },
    })
}

/// `1 (+) S` with the identity acting on the first mode, xxpp ordering.
fn embed_after_first(s: &SymplecticMatrix) -> SymplecticMatrix {
    let r = s.modes();
    let l = r + 1;
    let src = s.data();
    let map = |i: usize| if i < r { i + 1 } else { i + 2 };
    let mut out = RMat::zeros(2 * l, 2 * l);
    out[(0, 0)] = 1.0;
    out[(l, l)] = 1.0;
    for i in 0..2 * r {
        for j in 0..2 * r {
            out[(map(i), map(j))] = src[(i, j)];
        }
    }
    SymplecticMatrix::from_raw(out)
}

/// Amplitude of pattern `m` obtained by contracting the chain.
pub fn contract_amplitude(mps: &MpsState, m: &PhotonPattern) -> Result<Complex64> {
    if m.len() != mps.modes {
        return Err(Error::Dimension(format!("pattern has {} modes, state has {}", m.len(), mps.modes)));
    }
    let mut v = vec![Complex64::new(1.0, 0.0)];
    for (k, g) in mps.gammas.iter().enumerate() {
        let n = m.counts()[k];
        if n >= g.d {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let slice = g.slice(n);
        let mut next = vec![Complex64::new(0.0, 0.0); g.right];
        for (a, va) in v.iter().enumerate() {
            let row = &slice[a * g.right..(a + 1) * g.right];
            for (o, x) in next.iter_mut().zip(row) {
                *o += va * x;
            }
        }
        if let Some(lam) = mps.lambdas.get(k) {
            for (o, l) in next.iter_mut().zip(lam) {
                *o *= l;
            }
        }
        v = next;
    }
    Ok(v[0])
}
