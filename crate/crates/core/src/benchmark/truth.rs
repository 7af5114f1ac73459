//! Exact photon statistics of a zero-mean Gaussian state, usable as ground
//! truth at small scale.

use super::Distribution;
use crate::error::{Error, Result};
use crate::gaussian::CovMatrix;
use crate::hafnian::{hafnian_repeated, PhotonPattern};
use crate::linalg::{CMat, RMat};
use crate::sampler::{Detector, ORACLE_MAX_CUTOFF, ORACLE_MAX_MODES};
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::BTreeMap;

/// `Pr(m) = haf(A_m) / (m! sqrt(det sigma_Q))` with `sigma_Q` the
/// anti-normally ordered covariance in the `(a, a^dagger)` basis and
/// `A = X (1 - sigma_Q^{-1})`.
#[derive(Debug, Clone)]
pub struct GaussianTruth {
    modes: usize,
    v: RMat,
    a: CMat,
    ln_det_q: f64,
}

impl GaussianTruth {
    pub fn new(v: &CovMatrix) -> Result<Self> {
        let m = v.modes();
        let vi = v.data() + RMat::identity(2 * m, 2 * m);
        let half = Complex64::new(0.5, 0.0);
        let ihalf = Complex64::new(0.0, 0.5);
        let mut t = CMat::zeros(2 * m, 2 * m);
        for k in 0..m {
            t[(k, k)] = half;
            t[(k, k + m)] = ihalf;
            t[(k + m, k)] = half;
            t[(k + m, k + m)] = -ihalf;
        }
        let sigma_q = &t * vi.map(|x| Complex64::new(x, 0.0)) * t.adjoint();
        let inv = sigma_q
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("sigma_Q is singular".into()))?;
        let mut x = CMat::zeros(2 * m, 2 * m);
        for k in 0..m {
            x[(k, k + m)] = Complex64::new(1.0, 0.0);
            x[(k + m, k)] = Complex64::new(1.0, 0.0);
        }
        let a = x * (CMat::identity(2 * m, 2 * m) - inv);
        let det = vi.determinant() / 4f64.powi(m as i32);
        if !(det > 0.0) {
            return Err(Error::InvalidCovariance { reason: "det(V + 1) is not positive".into(), min_eig: det });
        }
        Ok(Self { modes: m, v: v.data().clone(), a, ln_det_q: det.ln() })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Photon-number-resolved probability of `m`.
    pub fn probability(&self, m: &PhotonPattern) -> Result<f64> {
        if m.len() != self.modes {
            return Err(Error::Dimension(format!("pattern has {} modes, state has {}", m.len(), self.modes)));
        }
        let reps: Vec<usize> = m.counts().iter().chain(m.counts()).copied().collect();
        let haf = hafnian_repeated(&self.a, &reps)?;
        Ok((haf.re * (-m.ln_factorial() - 0.5 * self.ln_det_q).exp()).max(0.0))
    }

    /// Probability that every mode in `subset` is empty:
    /// `2^k / sqrt(det(V_S + 1))`.
    pub fn vacuum_probability(&self, subset: &[usize]) -> f64 {
        let k = subset.len();
        if k == 0 {
            return 1.0;
        }
        let idx: Vec<usize> = subset.iter().copied().chain(subset.iter().map(|&i| i + self.modes)).collect();
        let vs = RMat::from_fn(2 * k, 2 * k, |i, j| self.v[(idx[i], idx[j])] + if i == j { 1.0 } else { 0.0 });
        2f64.powi(k as i32) / vs.determinant().sqrt()
    }

    /// Threshold-detector probability by inclusion-exclusion over vacuum
    /// probabilities.
    pub fn click_probability(&self, clicks: &PhotonPattern) -> Result<f64> {
        if clicks.len() != self.modes {
            return Err(Error::Dimension(format!("pattern has {} modes, state has {}", clicks.len(), self.modes)));
        }
        let on: Vec<usize> = (0..self.modes).filter(|&i| clicks.counts()[i] > 0).collect();
        let off: Vec<usize> = (0..self.modes).filter(|&i| clicks.counts()[i] == 0).collect();
        let mut total = 0.0;
        for t in 0..1usize << on.len() {
            let mut set = off.clone();
            set.extend(on.iter().enumerate().filter(|(b, _)| t >> b & 1 == 1).map(|(_, &i)| i));
            let sign = if t.count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
            total += sign * self.vacuum_probability(&set);
        }
        Ok(total.max(0.0))
    }

    /// Full table: every pattern with entries below `cutoff` for PNR
    /// detectors, every click pattern for threshold detectors.
    pub fn distribution(&self, cutoff: usize, detector: Detector) -> Result<Distribution> {
        if self.modes > ORACLE_MAX_MODES || cutoff > ORACLE_MAX_CUTOFF {
            return Err(Error::OracleScale(format!(
                "{} modes at cutoff {cutoff} (limits {ORACLE_MAX_MODES}, {ORACLE_MAX_CUTOFF})",
                self.modes
            )));
        }
        let base = match detector {
            Detector::Pnr => cutoff,
            Detector::Threshold => 2,
        };
        let size = base.pow(self.modes as u32);
        let entries = (0..size)
            .into_par_iter()
            .map(|i| {
                let mut counts = vec![0; self.modes];
                let mut r = i;
                for k in (0..self.modes).rev() {
                    counts[k] = r % base;
                    r /= base;
                }
                let p = PhotonPattern(counts);
                let v = match detector {
                    Detector::Pnr => self.probability(&p)?,
                    Detector::Threshold => self.click_probability(&p)?,
                };
                Ok((p, v))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        Distribution::new(self.modes, entries)
    }
}
