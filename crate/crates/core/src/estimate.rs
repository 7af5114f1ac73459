//! Bond-dimension and cost estimates from the thermal singular-value
//! spectrum.

use crate::decompose::{decompose_sdp, decompose_single_mode, SdpOptions};
use crate::error::{Error, Result};
use crate::gaussian::{build_circuit, reduced_covariance, williamson, CircuitSpec, CovMatrix};
use crate::hafnian::ln_factorial;
use crate::mps::{center_bond, thermal_means, top_patterns};
use crate::sampler::derive_seed;
use rayon::prelude::*;
use serde::Serialize;

/// Tail term cutoff for the summed error.
const TAIL_TERM: f64 = 1e-17;
/// Relative weight difference treated as a tie when counting kept patterns.
const TIE_TOL: f64 = 1e-9;
const MAX_LEVEL: usize = 1 << 20;
const MAX_PATTERNS: usize = 1 << 24;

fn check_tail_args(k: usize, ratio: f64) -> Result<()> {
    if k == 0 {
        return Err(Error::OutOfRange("need at least one squeezer".into()));
    }
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::OutOfRange(format!("geometric ratio {ratio} outside [0, 1)")));
    }
    Ok(())
}

/// Discarded weight when every pattern of more than `l` photons is dropped:
/// `sum_{k > l} C(K+k-1, k) (1-R)^K R^k`.
pub fn epsilon_l(k: usize, ratio: f64, l: usize) -> Result<f64> {
    check_tail_args(k, ratio)?;
    if ratio == 0.0 {
        return Ok(0.0);
    }
    let kf = k as f64;
    let first = l + 1;
    let ln_binom = ln_factorial(k + first - 1) - ln_factorial(first) - ln_factorial(k - 1);
    let mut term = (ln_binom + kf * (1.0 - ratio).ln() + first as f64 * ratio.ln()).exp();
    let mut sum = 0.0;
    let mut j = first;
    loop {
        sum += term;
        let growth = (kf + j as f64) / (j + 1) as f64 * ratio;
        term *= growth;
        j += 1;
        if growth < 1.0 && term < TAIL_TERM {
            break;
        }
    }
    Ok(sum.min(1.0))
}

fn binomial_checked(n: u128, k: u128) -> Option<u128> {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.checked_mul(n - i)? / (i + 1);
    }
    Some(c)
}

/// Number of patterns with at most `l` photons on `K` modes:
/// `sum_{k <= l} C(K+k-1, k)`.
pub fn chi_l(k: usize, l: usize) -> Result<u128> {
    if k == 0 {
        return Err(Error::OutOfRange("need at least one squeezer".into()));
    }
    let overflow = || Error::Overflow(format!("chi_l(K={k}, l={l}) exceeds 128 bits"));
    (0..=l as u128).try_fold(0u128, |acc, j| {
        let c = binomial_checked(k as u128 + j - 1, j).ok_or_else(overflow)?;
        acc.checked_add(c).ok_or_else(overflow)
    })
}

/// Smallest level `l` with `epsilon_l <= target`.
pub fn required_level(k: usize, ratio: f64, target: f64) -> Result<usize> {
    check_tail_args(k, ratio)?;
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::OutOfRange(format!("target error {target} outside (0, 1)")));
    }
    for l in 0..MAX_LEVEL {
        if epsilon_l(k, ratio, l)? <= target {
            return Ok(l);
        }
    }
    Err(Error::OutOfRange(format!("no level below {MAX_LEVEL} reaches error {target}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorstCaseBond {
    /// Squeezing left after loss.
    pub s: f64,
    pub nbar: f64,
    pub ratio: f64,
    pub level: usize,
    pub epsilon: f64,
    pub chi: u128,
}

/// Bond dimension for `K` two-mode squeezed pairs across the cut, each with
/// the squeezing that survives loss `eta` on input squeezing `r`.
pub fn worst_case_bond(k: usize, r: f64, eta: f64, target: f64) -> Result<WorstCaseBond> {
    let s = decompose_single_mode(r, eta)?.s;
    let nbar = s.sinh().powi(2);
    let ratio = nbar / (nbar + 1.0);
    let level = required_level(k, ratio, target)?;
    Ok(WorstCaseBond { s, nbar, ratio, level, epsilon: epsilon_l(k, ratio, level)?, chi: chi_l(k, level)? })
}

/// Number of bond patterns needed at bond `bond` (between modes `bond` and
/// `bond + 1`) of a pure state to keep weight `1 - target`. Patterns tied
/// with the last one kept are counted too.
pub fn circuit_bond(vp: &CovMatrix, bond: usize, target: f64) -> Result<usize> {
    let m = vp.modes();
    if bond + 1 >= m {
        return Err(Error::Dimension(format!("bond {bond} does not exist for {m} modes")));
    }
    if !(0.0..1.0).contains(&target) {
        return Err(Error::OutOfRange(format!("target error {target} outside [0, 1)")));
    }
    let deviation = williamson(vp)?.max_purity_deviation();
    if deviation > 1e-5 {
        return Err(Error::NotPure { deviation });
    }
    let right: Vec<usize> = (bond + 1..m).collect();
    let nbar = thermal_means(&williamson(&reduced_covariance(vp, &right)?)?);
    let goal = 1.0 - target - 1e-14;
    let mut cap = 64;
    loop {
        let top = top_patterns(&nbar, cap);
        let exhausted = top.len() < cap;
        let mut cum = 0.0;
        let hit = top.iter().position(|(_, w)| {
            cum += w;
            cum >= goal
        });
        if let Some(i) = hit {
            let last = top[i].1;
            let end = top[i + 1..].iter().position(|(_, w)| (last - w) > TIE_TOL * last).map(|j| i + 1 + j);
            match end {
                Some(e) => return Ok(e),
                None if exhausted => return Ok(top.len()),
                None => {}
            }
        } else if exhausted {
            return Ok(top.len());
        }
        if cap >= MAX_PATTERNS {
            return Err(Error::OutOfRange(format!("more than {MAX_PATTERNS} patterns needed")));
        }
        cap *= 2;
    }
}

/// `S_alpha(s) = log(cosh^{2 alpha} s - sinh^{2 alpha} s) / (alpha - 1)`,
/// the Renyi entropy of one half of a two-mode squeezed state.
pub fn renyi_entropy(s: f64, alpha: f64) -> Result<f64> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::OutOfRange(format!("squeezing {s} must be finite and >= 0")));
    }
    if !(alpha > 0.0) {
        return Err(Error::OutOfRange(format!("order {alpha} must be positive")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    if alpha == 1.0 {
        let n = s.sinh().powi(2);
        return Ok((n + 1.0) * (n + 1.0).ln() - n * n.ln());
    }
    Ok((s.cosh().powf(2.0 * alpha) - s.sinh().powf(2.0 * alpha)).ln() / (alpha - 1.0))
}

/// Bytes to store `M` tensors of `chi x chi x d` complex numbers.
pub fn memory_estimate(chi: u64, modes: u64, d: u64) -> u128 {
    8 * (chi as u128).pow(2) * modes as u128 * d as u128
}

/// Seconds, scaled from 600 s per unit of `(chi / 10^4)^2 d`.
pub fn time_estimate(chi: u64, d: u64) -> f64 {
    600.0 * (chi as f64 / 1e4).powi(2) * d as f64
}

/// Largest hafnian met when bond patterns hold up to `l` photons.
pub fn max_hafnian_size(l: usize) -> usize {
    2 * l
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Dimension("need at least two matching points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::OutOfRange("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

/// Circuits drawn per ensemble point.
pub const ENSEMBLE_CIRCUITS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleBond {
    pub circuits: usize,
    pub mean_chi: f64,
    pub min_chi: usize,
    pub max_chi: usize,
    /// Mean photon number of the pure part, averaged over circuits.
    pub mean_photons: f64,
}

/// Center-bond dimension averaged over `circuits` draws of an ensemble.
/// Circuit `i` uses seed `derive_seed(seed, "circuit-i")`.
pub fn ensemble_bond(spec: &CircuitSpec, target: f64, circuits: usize, seed: u64, opts: &SdpOptions) -> Result<EnsembleBond> {
    let bond = center_bond(spec.modes).ok_or_else(|| Error::Dimension("need at least two modes".into()))?;
    if circuits == 0 {
        return Err(Error::OutOfRange("need at least one circuit".into()));
    }
    let runs = (0..circuits)
        .into_par_iter()
        .map(|i| {
            let c = build_circuit(spec, derive_seed(seed, &format!("circuit-{i}")))?;
            let dec = decompose_sdp(&c.output, opts)?;
            Ok((circuit_bond(&dec.vp, bond, target)?, dec.photons()))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = runs.len() as f64;
    Ok(EnsembleBond {
        circuits,
        mean_chi: runs.iter().map(|r| r.0 as f64).sum::<f64>() / n,
        min_chi: runs.iter().map(|r| r.0).min().unwrap_or(0),
        max_chi: runs.iter().map(|r| r.0).max().unwrap_or(0),
        mean_photons: runs.iter().map(|r| r.1).sum::<f64>() / n,
    })
}

/// `K S_alpha(s)` with the small-loss squeezing `s = eta e^{-r} sinh r`.
pub fn renyi_loss_curve(k: usize, r: f64, alpha: f64, etas: &[f64]) -> Result<Vec<f64>> {
    etas.iter().map(|&eta| Ok(k as f64 * renyi_entropy(eta * (-r).exp() * r.sinh(), alpha)?)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{apply_passive, squeezed_input, tmsv};
    use crate::linalg::CMat;
    use num_complex::Complex64;

    #[test]
    fn ensemble_of_worst_case_circuits() {
        use crate::gaussian::Interferometer;
        let spec = CircuitSpec { modes: 4, r_in: vec![0.8], eta: vec![0.5], interferometer: Interferometer::TmsvWorstCase { k: 2 } };
        let e = ensemble_bond(&spec, 0.01, 3, 1, &SdpOptions::default()).unwrap();
        let w = worst_case_bond(2, 0.8, 0.5, 0.01).unwrap();
        assert_eq!(e.min_chi, e.max_chi);
        assert!(e.min_chi as u128 >= w.chi);
    }

    #[test]
    fn tail_examples() {
        assert!((epsilon_l(1, 0.25, 2).unwrap() - 0.015625).abs() < 1e-15);
        assert_eq!(epsilon_l(3, 0.0, 0).unwrap(), 0.0);
        let e0 = epsilon_l(4, 0.3, 0).unwrap();
        assert!((e0 - (1.0 - 0.7f64.powi(4))).abs() < 1e-14);
        assert!(epsilon_l(1, 1.0, 0).is_err());
    }

    #[test]
    fn chi_examples() {
        assert_eq!(chi_l(5, 0).unwrap(), 1);
        assert_eq!(chi_l(1, 7).unwrap(), 8);
        assert_eq!(chi_l(3, 2).unwrap(), 10);
        assert!(matches!(chi_l(200, 200), Err(Error::Overflow(_))));
    }

    #[test]
    fn levels() {
        let e0 = epsilon_l(2, 0.2, 0).unwrap();
        assert_eq!(required_level(2, 0.2, e0 + 1e-12).unwrap(), 0);
        let ratio = 0.5f64.tanh().powi(2);
        let l = required_level(2, ratio, 0.01).unwrap();
        assert!(epsilon_l(2, ratio, l).unwrap() <= 0.01);
        assert!(epsilon_l(2, ratio, l - 1).unwrap() > 0.01);
        assert!(required_level(2, ratio, 0.001).unwrap() >= l);
    }

    #[test]
    fn worst_case_examples() {
        let v = worst_case_bond(3, 0.0, 1.0, 0.01).unwrap();
        assert_eq!(v.chi, 1);
        let w = worst_case_bond(2, 1.5, 0.4, 0.01).unwrap();
        assert!((w.s - 0.239087).abs() < 1e-6);
        assert!((w.nbar - 0.058260).abs() < 1e-6);
        let chis: Vec<u128> = (1..6).map(|k| worst_case_bond(k, 1.0, 0.6, 0.01).unwrap().chi).collect();
        assert!(chis.windows(2).all(|c| c[0] <= c[1]));
    }

    #[test]
    fn circuit_bond_examples() {
        let product = squeezed_input(&[0.5, 0.3, 0.2]);
        assert_eq!(circuit_bond(&product, 0, 1e-6).unwrap(), 1);
        let t = tmsv(0.5);
        let e1 = 0.5f64.tanh().powi(2);
        assert_eq!(circuit_bond(&t, 0, e1 + 1e-9).unwrap(), 1);
        assert_eq!(circuit_bond(&t, 0, 0.05).unwrap(), 2);
        assert_eq!(circuit_bond(&t, 0, 0.04).unwrap(), 3);
    }

    #[test]
    fn circuit_bond_matches_tail_count() {
        // Two equal TMSV pairs straddling the middle of four modes.
        let s = 0.6;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut u = CMat::zeros(4, 4);
        for (a, b) in [(1usize, 2usize), (0, 3)] {
            u[(a, a)] = Complex64::new(h, 0.0);
            u[(a, b)] = Complex64::new(0.0, h);
            u[(b, a)] = Complex64::new(h, 0.0);
            u[(b, b)] = Complex64::new(0.0, -h);
        }
        let v = apply_passive(&squeezed_input(&[s; 4]), &u).unwrap();
        let ratio = s.tanh().powi(2);
        for target in [0.1, 0.01, 1e-4] {
            let l = required_level(2, ratio, target).unwrap();
            assert_eq!(circuit_bond(&v, 1, target).unwrap() as u128, chi_l(2, l).unwrap(), "{target}");
        }
    }

    #[test]
    fn renyi_examples() {
        assert_eq!(renyi_entropy(0.0, 0.5).unwrap(), 0.0);
        assert!((renyi_entropy(0.5, 2.0).unwrap() - 1f64.cosh().ln()).abs() < 1e-14);
        let vn = renyi_entropy(0.7, 1.0).unwrap();
        assert!((renyi_entropy(0.7, 1.0 + 1e-7).unwrap() - vn).abs() < 1e-6);
        let grid: Vec<f64> = (1..30).map(|i| renyi_entropy(0.8, 0.1 * i as f64).unwrap()).collect();
        assert!(grid.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn cost_examples() {
        assert_eq!(memory_estimate(10_000, 288, 4), 921_600_000_000);
        assert_eq!(time_estimate(10_000, 4), 2400.0);
        assert_eq!(max_hafnian_size(5), 10);
    }
}
