//! Covariance-matrix formalism for zero-mean Gaussian states.
//!
//! Quadratures are ordered `(x_1..x_M, p_1..p_M)` and the vacuum covariance
//! is the identity.

use crate::error::{Error, Result};
use crate::linalg::{
    haar_unitary, herm_eigen, max_abs_real, min_eig_herm,
    omega_matrix, passive_symplectic, sqrtm_psd, sym_eigen, symplectic_inverse, symplectic_to_ab,
    to_complex, unitary_residual, CMat, RMat,
};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const SYMMETRY_TOL: f64 = 1e-12;
const PHYSICAL_TOL: f64 = 1e-9;
const SYMPLECTIC_TOL: f64 = 1e-10;
const UNITARY_TOL: f64 = 1e-10;

/// Canonical symplectic form `[[0, 1], [-1, 0]]` (blocks of size M).
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticForm {
    modes: usize,
    matrix: RMat,
}

impl SymplecticForm {
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn matrix(&self) -> &RMat {
        &self.matrix
    }
}

pub fn omega(modes: usize) -> Result<SymplecticForm> {
    if modes == 0 {
        return Err(Error::Dimension("omega requires at least one mode".into()));
    }
    Ok(SymplecticForm { modes, matrix: omega_matrix(modes) })
}

/// Wigner covariance matrix of an M-mode Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    modes: usize,
    data: RMat,
}

impl CovMatrix {
    /// Validates and wraps a matrix. The stored copy is exactly symmetrized.
    pub fn new(data: RMat) -> Result<Self> {
        validate_covariance(&data)?;
        let data = crate::linalg::symmetrize(&data);
        Ok(Self { modes: data.nrows() / 2, data })
    }

    /// Wraps without the physicality check. Shape is still enforced.
    pub fn new_unchecked(data: RMat) -> Result<Self> {
        check_shape(&data)?;
        Ok(Self { modes: data.nrows() / 2, data })
    }

    pub fn vacuum(modes: usize) -> Self {
        Self { modes, data: RMat::identity(2 * modes, 2 * modes) }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn data(&self) -> &RMat {
        &self.data
    }

    pub fn into_inner(self) -> RMat {
        self.data
    }
}

fn check_shape(v: &RMat) -> Result<()> {
    if v.nrows() != v.ncols() {
        return Err(Error::Dimension(format!("covariance is {}x{}, not square", v.nrows(), v.ncols())));
    }
    if !v.nrows().is_multiple_of(2) || v.nrows() == 0 {
        return Err(Error::Dimension(format!("covariance dimension {} is not a positive even number", v.nrows())));
    }
    Ok(())
}

/// Checks symmetry and the uncertainty relation `V + i Omega >= 0`.
pub fn validate_covariance(v: &RMat) -> Result<()> {
    check_shape(v)?;
    let scale = max_abs_real(v).max(1.0);
    let asym = max_abs_real(&(v - v.transpose()));
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::InvalidCovariance {
            reason: format!("not symmetric (max asymmetry {asym:.3e})"),
            min_eig: f64::NAN,
        });
    }
    let min_eig = uncertainty_min_eig(v);
    if min_eig < -PHYSICAL_TOL {
        return Err(Error::InvalidCovariance {
            reason: "V + i*Omega is not positive semidefinite".into(),
            min_eig,
        });
    }
    Ok(())
}

/// Smallest eigenvalue of the Hermitian matrix `V + i Omega`.
pub fn uncertainty_min_eig(v: &RMat) -> f64 {
    let m = v.nrows() / 2;
    let om = omega_matrix(m);
    let h = CMat::from_fn(v.nrows(), v.ncols(), |i, j| Complex64::new(v[(i, j)], om[(i, j)]));
    min_eig_herm(&h)
}

/// `diag(e^{2r}, e^{-2r})` per mode.
pub fn squeezed_input(r: &[f64]) -> CovMatrix {
    let m = r.len();
    let mut v = RMat::zeros(2 * m, 2 * m);
    for (i, &ri) in r.iter().enumerate() {
        v[(i, i)] = (2.0 * ri).exp();
        v[(m + i, m + i)] = (-2.0 * ri).exp();
    }
    CovMatrix { modes: m, data: v }
}

/// Pure-loss channel with per-mode transmission `eta`.
pub fn apply_loss(v: &CovMatrix, eta: &[f64]) -> Result<CovMatrix> {
    let m = v.modes;
    let eta = broadcast(eta, m, "eta")?;
    if let Some(bad) = eta.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(Error::OutOfRange(format!("transmission {bad} outside [0, 1]")));
    }
    let scale: Vec<f64> = (0..2 * m).map(|i| eta[i % m].sqrt()).collect();
    let mut out = RMat::from_fn(2 * m, 2 * m, |i, j| scale[i] * v.data[(i, j)] * scale[j]);
    for i in 0..2 * m {
        out[(i, i)] += 1.0 - eta[i % m];
    }
    Ok(CovMatrix { modes: m, data: out })
}

fn broadcast(vals: &[f64], m: usize, what: &str) -> Result<Vec<f64>> {
    match vals.len() {
        1 => Ok(vec![vals[0]; m]),
        n if n == m => Ok(vals.to_vec()),
        n => Err(Error::Dimension(format!("{what} has length {n}, expected 1 or {m}"))),
    }
}

/// `V -> O V O^T` for the passive transformation `a -> U a`.
pub fn apply_passive(v: &CovMatrix, u: &CMat) -> Result<CovMatrix> {
    if u.nrows() != v.modes || u.ncols() != v.modes {
        return Err(Error::Dimension(format!(
            "unitary is {}x{}, state has {} modes",
            u.nrows(),
            u.ncols(),
            v.modes
        )));
    }
    let residual = unitary_residual(u);
    if residual > UNITARY_TOL {
        return Err(Error::NotUnitary { residual });
    }
    let o = passive_symplectic(u);
    let data = crate::linalg::symmetrize(&(&o * &v.data * o.transpose()));
    Ok(CovMatrix { modes: v.modes, data })
}

/// `Tr[V - 1] / 4`.
pub fn mean_photon(v: &CovMatrix) -> f64 {
    (v.data.trace() - 2.0 * v.modes as f64) / 4.0
}

/// Rows and columns of the selected modes in both quadrature blocks.
pub fn reduced_covariance(v: &CovMatrix, modes: &[usize]) -> Result<CovMatrix> {
    if modes.is_empty() {
        return Err(Error::Dimension("reduced covariance over an empty mode set".into()));
    }
    let m = v.modes;
    if let Some(&bad) = modes.iter().find(|&&k| k >= m) {
        return Err(Error::Dimension(format!("mode index {bad} out of range for {m} modes")));
    }
    let idx: Vec<usize> = modes.iter().copied().chain(modes.iter().map(|&k| k + m)).collect();
    let data = RMat::from_fn(idx.len(), idx.len(), |i, j| v.data[(idx[i], idx[j])]);
    Ok(CovMatrix { modes: modes.len(), data })
}

/// Real 2M x 2M matrix satisfying `S Omega S^T = Omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix {
    modes: usize,
    data: RMat,
}

impl SymplecticMatrix {
    pub fn new(data: RMat) -> Result<Self> {
        check_shape(&data)?;
        let residual = symplectic_residual(&data);
        if residual > SYMPLECTIC_TOL * max_abs_real(&data).max(1.0).powi(2) {
            return Err(Error::NotSymplectic { residual });
        }
        Ok(Self { modes: data.nrows() / 2, data })
    }

    pub(crate) fn from_raw(data: RMat) -> Self {
        Self { modes: data.nrows() / 2, data }
    }

    pub fn identity(modes: usize) -> Self {
        Self::from_raw(RMat::identity(2 * modes, 2 * modes))
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn data(&self) -> &RMat {
        &self.data
    }

    pub fn inverse(&self) -> Self {
        Self::from_raw(symplectic_inverse(&self.data))
    }

    pub fn compose(&self, rhs: &Self) -> Self {
        Self::from_raw(&self.data * &rhs.data)
    }
}

/// `max |S Omega S^T - Omega|`.
pub fn symplectic_residual(s: &RMat) -> f64 {
    let om = omega_matrix(s.nrows() / 2);
    max_abs_real(&(s * &om * s.transpose() - om))
}

#[derive(Debug, Clone)]
pub struct WilliamsonResult {
    pub s: SymplecticMatrix,
    /// Symplectic eigenvalues, descending.
    pub nu: Vec<f64>,
}

impl WilliamsonResult {
    /// `(nu - 1) / 2`, clamped at zero.
    pub fn thermal_means(&self) -> Vec<f64> {
        self.nu.iter().map(|&n| ((n - 1.0) / 2.0).max(0.0)).collect()
    }

    pub fn reconstruct(&self) -> RMat {
        let d: Vec<f64> = self.nu.iter().chain(self.nu.iter()).copied().collect();
        let s = &self.s.data;
        s * RMat::from_diagonal(&nalgebra::DVector::from_vec(d)) * s.transpose()
    }

    pub fn max_purity_deviation(&self) -> f64 {
        self.nu.iter().fold(0.0_f64, |a, n| a.max((n - 1.0).abs()))
    }
}

/// `V = S diag(nu, nu) S^T` via the spectrum of `-i V^{1/2} Omega V^{1/2}`.
pub fn williamson(v: &CovMatrix) -> Result<WilliamsonResult> {
    let m = v.modes;
    let (evals, _) = sym_eigen(&v.data);
    if evals[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_eig: evals[0] });
    }
    let half = sqrtm_psd(&v.data);
    let k = &half * omega_matrix(m) * &half;
    let h = to_complex(&k) * Complex64::new(0.0, -1.0);
    let (vals, vecs) = herm_eigen(&h);

    // Positive half of the spectrum, largest first.
    let cols: Vec<usize> = (m..2 * m).rev().collect();
    let mut nu = Vec::with_capacity(m);
    let mut o = RMat::zeros(2 * m, 2 * m);
    for (j, &c) in cols.iter().enumerate() {
        nu.push(vals[c]);
        let mut u = vecs.column(c).into_owned();
        if let Some(first) = u.iter().find(|z| z.norm() > 1e-10).copied() {
            let ph = first.conj() / first.norm();
            u *= ph;
        }
        for i in 0..2 * m {
            o[(i, j)] = u[i].re * std::f64::consts::SQRT_2;
            o[(i, m + j)] = u[i].im * std::f64::consts::SQRT_2;
        }
    }
    let scale: Vec<f64> = nu.iter().chain(nu.iter()).map(|n| n.sqrt().recip()).collect();
    let s = &half * o * RMat::from_diagonal(&nalgebra::DVector::from_vec(scale));
    Ok(WilliamsonResult { s: SymplecticMatrix::from_raw(s), nu })
}

/// Passive-squeeze-passive factors `U2 S(r) U1` of a Gaussian unitary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianUnitaryFactors {
    #[serde(with = "cmat_serde")]
    pub u2: CMat,
    pub r: Vec<f64>,
    #[serde(with = "cmat_serde")]
    pub u1: CMat,
}

impl GaussianUnitaryFactors {
    pub fn identity(modes: usize) -> Self {
        Self { u2: CMat::identity(modes, modes), r: vec![0.0; modes], u1: CMat::identity(modes, modes) }
    }

    pub fn modes(&self) -> usize {
        self.r.len()
    }

    /// Symplectic matrix induced by the factors.
    pub fn symplectic(&self) -> RMat {
        let m = self.modes();
        let mut sq = RMat::zeros(2 * m, 2 * m);
        for (i, &r) in self.r.iter().enumerate() {
            sq[(i, i)] = r.exp();
            sq[(m + i, m + i)] = (-r).exp();
        }
        passive_symplectic(&self.u2) * sq * passive_symplectic(&self.u1)
    }
}

mod cmat_serde {
    use super::CMat;
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Raw {
        rows: usize,
        cols: usize,
        re: Vec<f64>,
        im: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        Raw {
            rows: m.nrows(),
            cols: m.ncols(),
            re: m.iter().map(|z| z.re).collect(),
            im: m.iter().map(|z| z.im).collect(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        let raw = Raw::deserialize(d)?;
        if raw.re.len() != raw.rows * raw.cols || raw.im.len() != raw.re.len() {
            return Err(serde::de::Error::custom("matrix payload length mismatch"));
        }
        Ok(CMat::from_iterator(
            raw.rows,
            raw.cols,
            raw.re.iter().zip(&raw.im).map(|(&a, &b)| Complex64::new(a, b)),
        ))
    }
}

/// Decompose a symplectic matrix as `U2 S(r) U1` with `r >= 0` descending.
pub fn bloch_messiah(s: &SymplecticMatrix) -> Result<GaussianUnitaryFactors> {
    let residual = symplectic_residual(&s.data);
    if residual > 1e-8 * max_abs_real(&s.data).max(1.0).powi(2) {
        return Err(Error::NotSymplectic { residual });
    }
    let m = s.modes;
    let (a, b) = symplectic_to_ab(&s.data);
    let (vals, vecs) = herm_eigen(&(&a * a.adjoint()));
    let order: Vec<usize> = (0..m).rev().collect();
    let cosh: Vec<f64> = order.iter().map(|&i| vals[i].max(1.0).sqrt()).collect();
    let mut u2 = CMat::from_fn(m, m, |i, j| vecs[(i, order[j])]);
    let cinv = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        m,
        cosh.iter().map(|c| Complex64::new(c.recip(), 0.0)),
    ));
    let mut u1 = &cinv * u2.adjoint() * &a;
    let sinh: Vec<f64> = cosh.iter().map(|c| (c * c - 1.0).max(0.0).sqrt()).collect();

    // Inside each degenerate block, U2^H B U1^T = sinh * W with W symmetric
    // unitary. Factor W = Q Q^T and rotate it away.
    let bt = u2.adjoint() * &b * u1.transpose();
    let mut q = CMat::identity(m, m);
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m && (cosh[end] - cosh[start]).abs() <= 1e-9 * cosh[start] {
            end += 1;
        }
        if sinh[start] > 1e-12 {
            let n = end - start;
            let w = bt.view((start, start), (n, n)).into_owned() / Complex64::new(sinh[start], 0.0);
            let qb = symmetric_unitary_sqrt(&w);
            q.view_mut((start, start), (n, n)).copy_from(&qb);
        }
        start = end;
    }
    u2 = &u2 * &q;
    u1 = q.adjoint() * u1;
    let r: Vec<f64> = cosh.iter().map(|c| c.acosh()).collect();
    let factors = GaussianUnitaryFactors { u2, r, u1 };
    let err = max_abs_real(&(factors.symplectic() - &s.data));
    if err > 1e-7 * max_abs_real(&s.data).max(1.0) {
        return Err(Error::Degenerate(format!("Bloch-Messiah reconstruction error {err:.3e}")));
    }
    Ok(factors)
}

/// For symmetric unitary `W`, returns unitary `Q` with `Q Q^T = W`.
fn symmetric_unitary_sqrt(w: &CMat) -> CMat {
    let n = w.nrows();
    let x = w.map(|z| z.re);
    let y = w.map(|z| z.im);
    // Re W and Im W commute; a generic combination shares their eigenbasis.
    let mix = crate::linalg::symmetrize(&(&x + &y * 0.618_033_988_749_895));
    let (_, o) = sym_eigen(&mix);
    let oc = to_complex(&o);
    let diag = oc.transpose() * w * &oc;
    let mut q = oc;
    for j in 0..n {
        let half = Complex64::from_polar(1.0, diag[(j, j)].arg() / 2.0);
        for i in 0..n {
            q[(i, j)] *= half;
        }
    }
    q
}

/// Interferometer choice for [`CircuitSpec`].
#[derive(Debug, Clone)]
pub enum Interferometer {
    Explicit(CMat),
    GlobalHaar,
    Brickwork { depth: usize },
    TmsvWorstCase { k: usize },
}

/// Squeezed inputs, a linear network and per-mode loss.
#[derive(Debug, Clone)]
pub struct CircuitSpec {
    pub modes: usize,
    pub r_in: Vec<f64>,
    pub eta: Vec<f64>,
    pub interferometer: Interferometer,
}

/// Output of [`build_circuit`]: final state plus the ingredients.
#[derive(Debug, Clone)]
pub struct Circuit {
    pub input: CovMatrix,
    pub unitary: CMat,
    pub eta: Vec<f64>,
    pub output: CovMatrix,
}

pub fn build_circuit(spec: &CircuitSpec, seed: u64) -> Result<Circuit> {
    let m = spec.modes;
    if m == 0 {
        return Err(Error::Dimension("circuit needs at least one mode".into()));
    }
    let r_in = broadcast(&spec.r_in, m, "r_in")?;
    let eta = broadcast(&spec.eta, m, "eta")?;
    let unitary = circuit_unitary(m, &spec.interferometer, seed)?;
    let input = squeezed_input(&r_in);
    let output = apply_loss(&apply_passive(&input, &unitary)?, &eta)?;
    Ok(Circuit { input, unitary, eta, output })
}

/// Unitary of a named ensemble, deterministic in `seed`.
pub fn circuit_unitary(m: usize, kind: &Interferometer, seed: u64) -> Result<CMat> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        Interferometer::Explicit(u) => {
            if u.nrows() != m || u.ncols() != m {
                return Err(Error::Dimension(format!("unitary is {}x{}, expected {m}x{m}", u.nrows(), u.ncols())));
            }
            let residual = unitary_residual(u);
            if residual > UNITARY_TOL {
                return Err(Error::NotUnitary { residual });
            }
            Ok(u.clone())
        }
        Interferometer::GlobalHaar => Ok(haar_unitary(m, &mut rng)),
        Interferometer::Brickwork { depth } => {
            let mut u = CMat::identity(m, m);
            for layer in 0..*depth {
                let mut lu = CMat::identity(m, m);
                let mut i = layer % 2;
                while i + 1 < m {
                    let g = haar_unitary(2, &mut rng);
                    lu.view_mut((i, i), (2, 2)).copy_from(&g);
                    i += 2;
                }
                u = lu * u;
            }
            Ok(u)
        }
        Interferometer::TmsvWorstCase { k } => {
            let pairs = tmsv_pairs(m, *k)?;
            let mut u = CMat::identity(m, m);
            let h = std::f64::consts::FRAC_1_SQRT_2;
            for (a, b) in pairs {
                u[(a, a)] = Complex64::new(h, 0.0);
                u[(a, b)] = Complex64::new(0.0, h);
                u[(b, a)] = Complex64::new(h, 0.0);
                u[(b, b)] = Complex64::new(0.0, -h);
            }
            Ok(u)
        }
    }
}

/// Mode pairs straddling the center cut, innermost first.
pub fn tmsv_pairs(m: usize, k: usize) -> Result<Vec<(usize, usize)>> {
    let c = m / 2;
    if k > c || k > m - c {
        return Err(Error::OutOfRange(format!("{k} TMSV pairs do not fit across the center of {m} modes")));
    }
    Ok((0..k).map(|j| (c - 1 - j, c + j)).collect())
}

/// Covariance of a two-mode squeezed vacuum.
pub fn tmsv(s: f64) -> CovMatrix {
    let c = (2.0 * s).cosh();
    let sh = (2.0 * s).sinh();
    let data = RMat::from_row_slice(
        4,
        4,
        &[
            c, sh, 0.0, 0.0, //
            sh, c, 0.0, 0.0, //
            0.0, 0.0, c, -sh, //
            0.0, 0.0, -sh, c,
        ],
    );
    CovMatrix { modes: 2, data }
}
