//! Splitting a mixed Gaussian covariance `V = V_p + W` into a pure part
//! with as few photons as possible and a classical displacement part.

use crate::error::{Error, Result};
use crate::gaussian::{mean_photon, uncertainty_min_eig, williamson, CovMatrix};
use crate::linalg::{max_abs_real, min_eig_sym, omega_matrix, symmetrize, CMat, RMat};
use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Closed-form split of a lossy single-mode squeezed vacuum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingleModeSplit {
    pub r: f64,
    pub eta: f64,
    /// Squeezing left in the pure part.
    pub s: f64,
    /// Classical variance added to the anti-squeezed quadrature.
    pub w_xx: f64,
}

pub fn decompose_single_mode(r: f64, eta: f64) -> Result<SingleModeSplit> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::OutOfRange(format!("squeezing r = {r} must be finite and >= 0")));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::OutOfRange(format!("transmission {eta} outside [0, 1]")));
    }
    let s = -0.5 * (eta * (-2.0 * r).exp() + 1.0 - eta).ln();
    let w_xx = (eta * (2.0 * r).exp() + 1.0 - eta - (2.0 * s).exp()).max(0.0);
    Ok(SingleModeSplit { r, eta, s, w_xx })
}

/// Squeezing of the pure part as the input squeezing goes to infinity.
pub fn infinite_squeezing_limit(eta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::OutOfRange(format!("limit needs transmission in [0, 1), got {eta}")));
    }
    Ok(-0.5 * (1.0 - eta).ln())
}

/// Single-mode closed form of the Williamson split: pure squeezing `t` and
/// thermal occupation `n_th`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingleModeWilliamson {
    pub t: f64,
    pub n_th: f64,
}

pub fn williamson_split_single_mode(r: f64, eta: f64) -> Result<SingleModeWilliamson> {
    if !(0.0..=1.0).contains(&eta) || r < 0.0 {
        return Err(Error::OutOfRange(format!("invalid (r, eta) = ({r}, {eta})")));
    }
    let a = eta * (2.0 * r).exp() + 1.0 - eta;
    let b = eta * (-2.0 * r).exp() + 1.0 - eta;
    Ok(SingleModeWilliamson { t: 0.25 * (a / b).ln(), n_th: 0.5 * ((a * b).sqrt() - 1.0) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Sdp,
    Williamson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverStats {
    pub method: Method,
    pub iterations: usize,
    pub barrier_t: f64,
    pub duality_gap: f64,
    pub reconstruction: f64,
    pub min_eig_w: f64,
    pub min_eig_vp: f64,
    pub purity_deviation: f64,
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub vp: CovMatrix,
    pub w: RMat,
    /// `Tr[V_p]`.
    pub objective: f64,
    pub stats: SolverStats,
}

impl Decomposition {
    /// Mean photon number of the pure part.
    pub fn photons(&self) -> f64 {
        actual_squeezed_photons(&self.vp)
    }
}

pub fn actual_squeezed_photons(vp: &CovMatrix) -> f64 {
    mean_photon(vp).max(0.0)
}

#[derive(Debug, Clone, Copy)]
pub struct SdpOptions {
    /// Relative duality gap at which the barrier loop stops.
    pub tol: f64,
    /// Allowed negative eigenvalue of `W` and `V_p + i Omega`.
    pub feasibility: f64,
    /// Allowed deviation of the pure part's symplectic eigenvalues from 1.
    pub purity: f64,
    pub max_iterations: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { tol: 1e-6, feasibility: 1e-8, purity: 1e-5, max_iterations: 5000 }
    }
}

/// `V_p = S S^T`, `W = S (D - 1) S^T` from the Williamson form of `V`.
pub fn williamson_split(v: &CovMatrix) -> Result<Decomposition> {
    let wr = williamson(v)?;
    let s = wr.s.data();
    let vp = symmetrize(&(s * s.transpose()));
    let excess: Vec<f64> = wr.nu.iter().chain(wr.nu.iter()).map(|n| (n - 1.0).max(0.0)).collect();
    let w = symmetrize(&(s * RMat::from_diagonal(&DVector::from_vec(excess)) * s.transpose()));
    finish(v, vp, w, Method::Williamson, 0, 0.0, 0.0)
}

fn finish(v: &CovMatrix, vp: RMat, w: RMat, method: Method, iterations: usize, t: f64, gap: f64) -> Result<Decomposition> {
    let vp = CovMatrix::new_unchecked(vp)?;
    let purity_deviation = williamson(&vp).map(|r| r.max_purity_deviation()).unwrap_or(f64::INFINITY);
    let stats = SolverStats {
        method,
        iterations,
        barrier_t: t,
        duality_gap: gap,
        reconstruction: max_abs_real(&(v.data() - vp.data() - &w)),
        min_eig_w: min_eig_sym(&w),
        min_eig_vp: uncertainty_min_eig(vp.data()),
        purity_deviation,
    };
    Ok(Decomposition { objective: vp.data().trace(), vp, w, stats })
}

/// Minimizes `Tr[V_p]` subject to `V - V_p >= 0` and `V_p + i Omega >= 0`.
///
/// Works in the Williamson frame `V = S D S^T`, `V_p = S Y S^T`, where the
/// constraints become `D - Y >= 0` and `Y + i Omega >= 0`. Modes with unit
/// symplectic eigenvalue are pinned to `Y = 1`.
pub fn decompose_sdp(v: &CovMatrix, opts: &SdpOptions) -> Result<Decomposition> {
    let wr = williamson(v)?;
    let free: Vec<usize> = (0..v.modes()).filter(|&j| wr.nu[j] > 1.0 + 1e-9).collect();
    if free.is_empty() {
        return finish(v, v.data().clone(), RMat::zeros(2 * v.modes(), 2 * v.modes()), Method::Sdp, 0, 0.0, 0.0);
    }
    let m = v.modes();
    let s = wr.s.data();
    // Free coordinates in xxpp order of the free modes.
    let idx: Vec<usize> = free.iter().copied().chain(free.iter().map(|&j| j + m)).collect();
    let sf = RMat::from_fn(2 * m, idx.len(), |i, c| s[(i, idx[c])]);
    let g = sf.transpose() * &sf;
    let d: Vec<f64> = idx.iter().map(|&i| wr.nu[i % m]).collect();
    let solved = barrier_solve(&g, &d, opts)?;

    let mut y = RMat::identity(2 * m, 2 * m);
    for (a, &ia) in idx.iter().enumerate() {
        for (b, &ib) in idx.iter().enumerate() {
            y[(ia, ib)] = solved.y[(a, b)];
        }
    }
    let vp_raw = symmetrize(&(s * &y * s.transpose()));
    let vp = purify(&vp_raw)?;
    let w = symmetrize(&(v.data() - &vp));
    let dec = finish(v, vp, w, Method::Sdp, solved.iterations, solved.t, solved.gap)?;
    if dec.stats.min_eig_w < -opts.feasibility || dec.stats.min_eig_vp < -opts.feasibility {
        return Err(Error::NonConvergence {
            iterations: solved.iterations,
            detail: format!(
                "infeasible exit: min eig W {:.3e}, min eig V_p + i Omega {:.3e}",
                dec.stats.min_eig_w, dec.stats.min_eig_vp
            ),
        });
    }
    if dec.stats.purity_deviation > opts.purity {
        return Err(Error::NonConvergence {
            iterations: solved.iterations,
            detail: format!("pure part has symplectic eigenvalue deviation {:.3e}", dec.stats.purity_deviation),
        });
    }
    Ok(dec)
}

/// Replace `V_p = S_p diag(nu) S_p^T` by `S_p S_p^T`, which lies below it.
fn purify(vp: &RMat) -> Result<RMat> {
    let cov = CovMatrix::new_unchecked(vp.clone())?;
    let wp = williamson(&cov)?;
    let sp = wp.s.data();
    Ok(symmetrize(&(sp * sp.transpose())))
}

struct BarrierResult {
    y: RMat,
    iterations: usize,
    t: f64,
    gap: f64,
}

/// Log-barrier interior point for
/// `min Tr(G Y)  s.t.  D - Y >= 0,  Y + i Omega >= 0`.
fn barrier_solve(g: &RMat, d: &[f64], opts: &SdpOptions) -> Result<BarrierResult> {
    let n = d.len();
    let dm = RMat::from_diagonal(&DVector::from_column_slice(d));
    let om = omega_matrix(n / 2);
    let mut y = (RMat::identity(n, n) + &dm) * 0.5;
    let barrier_dim = 2.0 * n as f64;
    let mut t = 1.0;
    let mut iterations = 0;
    let t_max = 1e13;
    loop {
        let mut inner = 0;
        loop {
            if iterations >= opts.max_iterations {
                return Err(Error::NonConvergence {
                    iterations,
                    detail: format!("barrier parameter t = {t:.1e}"),
                });
            }
            iterations += 1;
            inner += 1;
            let Some(state) = BarrierState::at(&y, &dm, &om) else {
                return Err(Error::NonConvergence { iterations, detail: "iterate left the feasible set".into() });
            };
            let grad = g * t + &state.p - state.q.map(|z| z.re);
            let step = newton_direction(&state, &grad);
            let decrement = -inner_product(&grad, &step);
            if decrement / 2.0 <= 1e-12 || inner > 200 {
                break;
            }
            let f0 = t * inner_product(g, &y) + state.neg_logdet;
            let mut alpha = 1.0;
            let mut moved = false;
            while alpha > 1e-14 {
                let cand = &y + &step * alpha;
                if let Some(cs) = BarrierState::at(&cand, &dm, &om) {
                    let f1 = t * inner_product(g, &cand) + cs.neg_logdet;
                    if f1 <= f0 - 0.25 * alpha * decrement {
                        y = symmetrize(&cand);
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        let gap = barrier_dim / t;
        let objective = inner_product(g, &y).abs().max(1.0);
        if gap <= opts.tol.min(1e-9) * objective * 1e-3 || t >= t_max {
            return Ok(BarrierResult { y, iterations, t, gap });
        }
        t *= 10.0;
    }
}

struct BarrierState {
    /// `(D - Y)^{-1}`.
    p: RMat,
    /// `(Y + i Omega)^{-1}`.
    q: CMat,
    neg_logdet: f64,
}

impl BarrierState {
    fn at(y: &RMat, dm: &RMat, om: &RMat) -> Option<Self> {
        let slack = symmetrize(&(dm - y));
        let chol_a = slack.cholesky()?;
        let ld_a: f64 = chol_a.l().diagonal().iter().map(|x| 2.0 * x.ln()).sum();
        let n = y.nrows();
        let b = CMat::from_fn(n, n, |i, j| Complex64::new(0.5 * (y[(i, j)] + y[(j, i)]), om[(i, j)]));
        // Complex Cholesky does not fail on indefinite input, so definiteness
        // is checked on the real embedding [[Y, -Omega], [Omega, Y]].
        let embed = RMat::from_fn(2 * n, 2 * n, |i, j| {
            let z = b[(i % n, j % n)];
            match (i < n, j < n) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        });
        let chol_e = embed.cholesky()?;
        let ld_b: f64 = chol_e.l().diagonal().iter().map(|x| x.ln()).sum();
        let chol_b = b.cholesky()?;
        if !ld_a.is_finite() || !ld_b.is_finite() {
            return None;
        }
        Some(Self { p: chol_a.inverse(), q: chol_b.inverse(), neg_logdet: -ld_a - ld_b })
    }

    /// Hessian action `P X P + Re(Q X Q)`.
    fn hess_apply(&self, x: &RMat) -> RMat {
        let a = &self.p * x * &self.p;
        let xc = x.map(|v| Complex64::new(v, 0.0));
        let b = (&self.q * xc * &self.q).map(|z| z.re);
        symmetrize(&(a + b))
    }
}

fn inner_product(a: &RMat, b: &RMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

const EXPLICIT_HESSIAN_MAX: usize = 40;

fn newton_direction(state: &BarrierState, grad: &RMat) -> RMat {
    let n = grad.nrows();
    if n <= EXPLICIT_HESSIAN_MAX {
        if let Some(step) = explicit_newton(state, grad) {
            return step;
        }
    }
    cg_newton(state, grad)
}

/// Newton step with the Hessian assembled in an orthonormal basis of
/// symmetric matrices.
fn explicit_newton(state: &BarrierState, grad: &RMat) -> Option<RMat> {
    let n = grad.nrows();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect();
    let coef = |a: usize, b: usize| if a == b { 0.5 } else { std::f64::consts::FRAC_1_SQRT_2 };
    let np = pairs.len();
    let p = &state.p;
    let q = &state.q;
    let mut h = RMat::zeros(np, np);
    for (i, &(a, b)) in pairs.iter().enumerate() {
        for (j, &(c, d)) in pairs.iter().enumerate().skip(i) {
            let k = coef(a, b) * coef(c, d);
            let hp = p[(b, c)] * p[(d, a)] + p[(b, d)] * p[(c, a)] + p[(a, c)] * p[(d, b)] + p[(a, d)] * p[(c, b)];
            let hq = q[(b, c)] * q[(d, a)] + q[(b, d)] * q[(c, a)] + q[(a, c)] * q[(d, b)] + q[(a, d)] * q[(c, b)];
            let val = k * (hp + hq.re);
            h[(i, j)] = val;
            h[(j, i)] = val;
        }
    }
    let gv = DVector::from_iterator(np, pairs.iter().map(|&(a, b)| 2.0 * coef(a, b) * grad[(a, b)]));
    let sol = h.cholesky()?.solve(&(-gv));
    let mut step = RMat::zeros(n, n);
    for (i, &(a, b)) in pairs.iter().enumerate() {
        let v = sol[i] * coef(a, b);
        step[(a, b)] += v;
        if a != b {
            step[(b, a)] += v;
        } else {
            step[(a, a)] += v;
        }
    }
    Some(step)
}

/// Conjugate gradients on the space of symmetric matrices.
fn cg_newton(state: &BarrierState, grad: &RMat) -> RMat {
    let n = grad.nrows();
    let mut x = RMat::zeros(n, n);
    let mut r = -grad.clone();
    let mut p = r.clone();
    let mut rr = inner_product(&r, &r);
    let target = rr * 1e-24;
    for _ in 0..(n * (n + 1) / 2).max(50) {
        if rr <= target {
            break;
        }
        let hp = state.hess_apply(&p);
        let php = inner_product(&p, &hp);
        if php <= 0.0 {
            break;
        }
        let alpha = rr / php;
        x += &p * alpha;
        r -= &hp * alpha;
        let rr_new = inner_product(&r, &r);
        p = &r + &p * (rr_new / rr);
        rr = rr_new;
    }
    x
}
