//! Hafnians, Fock-basis matrix elements of Gaussian unitaries and
//! displacement-operator matrix elements.

use crate::error::{Error, Result};
use crate::gaussian::GaussianUnitaryFactors;
use crate::linalg::CMat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

pub const DEFAULT_MAX_HAFNIAN: usize = 40;
pub const BRUTE_FORCE_MAX: usize = 14;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Photon counts per mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub struct PhotonPattern(pub Vec<usize>);

impl PhotonPattern {
    pub fn zeros(modes: usize) -> Self {
        Self(vec![0; modes])
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn counts(&self) -> &[usize] {
        &self.0
    }

    /// Threshold-detector view: every nonzero count becomes 1.
    pub fn clicks(&self) -> Self {
        Self(self.0.iter().map(|&c| usize::from(c > 0)).collect())
    }

    /// `ln(prod_i n_i!)`.
    pub fn ln_factorial(&self) -> f64 {
        self.0.iter().map(|&n| ln_factorial(n)).sum()
    }
}

impl From<Vec<usize>> for PhotonPattern {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

impl std::fmt::Display for PhotonPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

const LN_FACT_TABLE: usize = 1024;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = vec![0.0; LN_FACT_TABLE];
        for n in 1..LN_FACT_TABLE {
            t[n] = t[n - 1] + (n as f64).ln();
        }
        t
    })
}

/// `ln(n!)`.
pub fn ln_factorial(n: usize) -> f64 {
    let table = ln_factorial_table();
    if n < table.len() {
        return table[n];
    }
    let mut acc = table[table.len() - 1];
    for k in table.len()..=n {
        acc += (k as f64).ln();
    }
    acc
}

fn check_square(x: &CMat) -> Result<()> {
    if x.nrows() != x.ncols() {
        return Err(Error::Dimension(format!("hafnian of a {}x{} matrix", x.nrows(), x.ncols())));
    }
    Ok(())
}

/// Sum over perfect matchings. Oracle only.
pub fn hafnian_brute(x: &CMat) -> Result<Complex64> {
    check_square(x)?;
    let n = x.nrows();
    if n > BRUTE_FORCE_MAX {
        return Err(Error::OracleScale(format!("brute-force hafnian limited to n <= {BRUTE_FORCE_MAX}, got {n}")));
    }
    if n % 2 == 1 {
        return Ok(ZERO);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    Ok(matchings(x, &mut idx))
}

fn matchings(x: &CMat, rest: &mut Vec<usize>) -> Complex64 {
    if rest.is_empty() {
        return ONE;
    }
    let first = rest.remove(0);
    let mut total = ZERO;
    for pos in 0..rest.len() {
        let partner = rest.remove(pos);
        total += x[(first, partner)] * matchings(x, rest);
        rest.insert(pos, partner);
    }
    rest.insert(0, first);
    total
}

/// Hafnian by the power-trace formula, size capped at [`DEFAULT_MAX_HAFNIAN`].
pub fn hafnian(x: &CMat) -> Result<Complex64> {
    hafnian_with_max(x, DEFAULT_MAX_HAFNIAN)
}

pub fn hafnian_with_max(x: &CMat, max: usize) -> Result<Complex64> {
    check_square(x)?;
    let n = x.nrows();
    if n > max {
        return Err(Error::HafnianTooLarge { size: n, max, context: None });
    }
    if n % 2 == 1 {
        return Ok(ZERO);
    }
    if n == 0 {
        return Ok(ONE);
    }
    let flat: Vec<Complex64> = (0..n * n).map(|k| x[(k / n, k % n)]).collect();
    Ok(power_trace(&flat, n))
}

/// Hafnian of the matrix obtained by repeating row and column `i` of `a`
/// `reps[i]` times, without building it. Runs in `prod(reps[i] + 1)` steps,
/// which beats the power-trace method when few distinct rows are involved.
pub fn hafnian_repeated(a: &CMat, reps: &[usize]) -> Result<Complex64> {
    check_square(a)?;
    if reps.len() != a.nrows() {
        return Err(Error::Dimension(format!("{} repetitions for a {}x{} matrix", reps.len(), a.nrows(), a.ncols())));
    }
    let total: usize = reps.iter().sum();
    if total % 2 == 1 {
        return Ok(ZERO);
    }
    if total == 0 {
        return Ok(ONE);
    }
    let active: Vec<usize> = (0..reps.len()).filter(|&i| reps[i] > 0).collect();
    let r: Vec<usize> = active.iter().map(|&i| reps[i]).collect();
    let sub = CMat::from_fn(r.len(), r.len(), |i, j| a[(active[i], active[j])]);
    let half = total / 2;
    let ln_half_fact = ln_factorial(half);
    let ln_binom = |n: usize, k: usize| ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k);

    // Odometer over v with v_i in 0..=r_i. Flipping every v_i to r_i - v_i
    // leaves the summand unchanged, so only v_0 <= r_0 / 2 is visited.
    let mut v = vec![0usize; r.len()];
    let mut h = vec![Complex64::new(0.0, 0.0); r.len()];
    let mut sum = ZERO;
    loop {
        let first = v[0];
        let weight = if 2 * first == r[0] { 1.0 } else { 2.0 };
        for (i, hi) in h.iter_mut().enumerate() {
            *hi = Complex64::new(r[i] as f64 / 2.0 - v[i] as f64, 0.0);
        }
        let mut q = ZERO;
        for i in 0..r.len() {
            let row: Complex64 = (0..r.len()).map(|j| sub[(i, j)] * h[j]).sum();
            q += h[i] * row;
        }
        let ln_c: f64 = v.iter().zip(&r).map(|(&vi, &ri)| ln_binom(ri, vi)).sum();
        let sign = if v.iter().sum::<usize>() % 2 == 0 { 1.0 } else { -1.0 };
        sum += (q * 0.5).powu(half as u32) * (sign * weight * (ln_c - ln_half_fact).exp());

        let mut i = r.len() - 1;
        loop {
            let limit = if i == 0 { r[0] / 2 } else { r[i] };
            if v[i] < limit {
                v[i] += 1;
                break;
            }
            v[i] = 0;
            if i == 0 {
                return Ok(sum);
            }
            i -= 1;
        }
    }
}

/// Hafnians of many matrices in parallel. Results are in input order.
pub fn hafnian_batch(xs: &[CMat]) -> Result<Vec<Complex64>> {
    xs.par_iter().map(hafnian).collect()
}

fn power_trace(x: &[Complex64], n: usize) -> Complex64 {
    let h = n / 2;
    let sets = 1usize << h;
    let mut total = ZERO;
    let mut sub = Vec::with_capacity(n * n);
    let mut idx = Vec::with_capacity(n);
    for z in 1..sets {
        idx.clear();
        for i in 0..h {
            if z >> i & 1 == 1 {
                idx.push(2 * i);
                idx.push(2 * i + 1);
            }
        }
        let k = idx.len();
        // C = X_Z A_Z: swap each row pair (2i, 2i+1) of the submatrix.
        sub.clear();
        for r in 0..k {
            let src = idx[r ^ 1];
            for &c in &idx {
                sub.push(x[src * n + c]);
            }
        }
        let traces = power_traces(&sub, k, h);
        let f = exp_coefficient(&traces, h);
        let sign = if (h - idx.len() / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
        total += f * sign;
    }
    total
}

/// `tr(C^j)` for `j = 1..=h`.
fn power_traces(c: &[Complex64], k: usize, h: usize) -> Vec<Complex64> {
    let q = h.div_ceil(2);
    let mut powers: Vec<Vec<Complex64>> = Vec::with_capacity(q);
    powers.push(c.to_vec());
    for _ in 1..q {
        let prev = powers.last().expect("non-empty");
        powers.push(matmul(prev, c, k));
    }
    let mut traces = vec![ZERO; h + 1];
    for j in 1..=h {
        traces[j] = if j <= q {
            (0..k).map(|i| powers[j - 1][i * k + i]).sum()
        } else {
            let a = &powers[q - 1];
            let b = &powers[j - q - 1];
            let mut t = ZERO;
            for i in 0..k {
                for l in 0..k {
                    t += a[i * k + l] * b[l * k + i];
                }
            }
            t
        };
    }
    traces
}

fn matmul(a: &[Complex64], b: &[Complex64], k: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; k * k];
    for i in 0..k {
        for l in 0..k {
            let ail = a[i * k + l];
            if ail == ZERO {
                continue;
            }
            let row = &b[l * k..(l + 1) * k];
            for (o, &blj) in out[i * k..(i + 1) * k].iter_mut().zip(row) {
                *o += ail * blj;
            }
        }
    }
    out
}

/// Coefficient of `t^h` in `exp(sum_j traces[j] t^j / (2j))`.
fn exp_coefficient(traces: &[Complex64], h: usize) -> Complex64 {
    let c: Vec<Complex64> = (0..=h)
        .map(|j| if j == 0 { ZERO } else { traces[j] / (2.0 * j as f64) })
        .collect();
    let mut e = vec![ZERO; h + 1];
    e[0] = ONE;
    for k in 1..=h {
        let mut acc = ZERO;
        for j in 1..=k {
            acc += c[j] * e[k - j] * j as f64;
        }
        e[k] = acc / k as f64;
    }
    e[h]
}

/// Complex symmetric 2M x 2M matrix generating the Fock matrix elements of
/// a Gaussian unitary. Rows `0..M` index output modes, `M..2M` input modes.
#[derive(Debug, Clone)]
pub struct SigmaMatrix {
    data: CMat,
    ln_cosh_sum: f64,
}

impl SigmaMatrix {
    pub fn data(&self) -> &CMat {
        &self.data
    }

    pub fn modes(&self) -> usize {
        self.data.nrows() / 2
    }

    /// `<n1| U |n2>` using the configured hafnian size cap.
    pub fn amplitude(&self, n1: &PhotonPattern, n2: &PhotonPattern, max: usize) -> Result<Complex64> {
        let size = n1.total() + n2.total();
        if size % 2 == 1 {
            return Ok(ZERO);
        }
        if size > max {
            return Err(Error::HafnianTooLarge {
                size,
                max,
                context: Some(format!("out=({n1}) in=({n2})")),
            });
        }
        let reps: Vec<usize> = n1.counts().iter().chain(n2.counts()).copied().collect();
        let distinct = reps.iter().filter(|&&c| c > 0).count() as f64;
        let repeated_cost: f64 = reps.iter().map(|&c| (c + 1) as f64).product::<f64>() * distinct * distinct;
        let power_cost = (size as f64 / 2.0).exp2() * (size as f64).powi(3);
        let haf = if repeated_cost < power_cost {
            hafnian_repeated(&self.data, &reps)?
        } else {
            hafnian_with_max(&repeat_pattern(self, n1, n2)?, max)?
        };
        let ln_norm = -0.5 * (n1.ln_factorial() + n2.ln_factorial() + self.ln_cosh_sum);
        Ok(haf * ln_norm.exp())
    }
}

pub fn build_sigma(f: &GaussianUnitaryFactors) -> SigmaMatrix {
    let m = f.modes();
    let tanh = CMat::from_diagonal(&nalgebra::DVector::from_iterator(m, f.r.iter().map(|r| Complex64::new(r.tanh(), 0.0))));
    let sech = CMat::from_diagonal(&nalgebra::DVector::from_iterator(m, f.r.iter().map(|r| Complex64::new(r.cosh().recip(), 0.0))));
    let u2t = f.u2.transpose();
    let u1t = f.u1.transpose();
    let tl = &f.u2 * &tanh * &u2t;
    let tr = &f.u2 * &sech * &f.u1;
    let bl = &u1t * &sech * &u2t;
    let br = -(&u1t * &tanh * &f.u1);
    let mut data = CMat::zeros(2 * m, 2 * m);
    data.view_mut((0, 0), (m, m)).copy_from(&tl);
    data.view_mut((0, m), (m, m)).copy_from(&tr);
    data.view_mut((m, 0), (m, m)).copy_from(&bl);
    data.view_mut((m, m), (m, m)).copy_from(&br);
    let ln_cosh_sum = f.r.iter().map(|r| r.cosh().ln()).sum();
    SigmaMatrix { data, ln_cosh_sum }
}

/// Replicates output row/column `i` `n1[i]` times and input row/column `j`
/// `n2[j]` times.
pub fn repeat_pattern(sigma: &SigmaMatrix, n1: &PhotonPattern, n2: &PhotonPattern) -> Result<CMat> {
    let m = sigma.modes();
    if n1.len() != m || n2.len() != m {
        return Err(Error::Dimension(format!(
            "patterns of length {} and {} for {m} modes",
            n1.len(),
            n2.len()
        )));
    }
    let idx: Vec<usize> = repeated_indices(n1.counts(), 0).chain(repeated_indices(n2.counts(), m)).collect();
    Ok(CMat::from_fn(idx.len(), idx.len(), |a, b| sigma.data[(idx[a], idx[b])]))
}

fn repeated_indices(counts: &[usize], offset: usize) -> impl Iterator<Item = usize> + '_ {
    counts.iter().enumerate().flat_map(move |(i, &c)| std::iter::repeat_n(offset + i, c))
}

/// `<n1| U2 S(r) U1 |n2>`.
pub fn fock_amplitude(f: &GaussianUnitaryFactors, n1: &PhotonPattern, n2: &PhotonPattern) -> Result<Complex64> {
    build_sigma(f).amplitude(n1, n2, DEFAULT_MAX_HAFNIAN)
}

/// Output probability of squeezed vacua `r_in` sent through the lossless
/// interferometer `U`: `|haf(A_m)|^2 / (m! prod cosh r)` with
/// `A = U diag(tanh r) U^T`.
pub fn pure_output_probability(r_in: &[f64], u: &CMat, m: &PhotonPattern) -> Result<f64> {
    let modes = r_in.len();
    if u.nrows() != modes || u.ncols() != modes || m.len() != modes {
        return Err(Error::Dimension("pattern, squeezing and unitary sizes disagree".into()));
    }
    if m.total() % 2 == 1 {
        return Ok(0.0);
    }
    let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(modes, r_in.iter().map(|r| Complex64::new(r.tanh(), 0.0))));
    let a = u * d * u.transpose();
    let idx: Vec<usize> = repeated_indices(m.counts(), 0).collect();
    let am = CMat::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])]);
    let haf = hafnian(&am)?;
    let ln_norm = -m.ln_factorial() - r_in.iter().map(|r| r.cosh().ln()).sum::<f64>();
    Ok(haf.norm_sqr() * ln_norm.exp())
}

/// `<m| D(beta) |n>` for `m, n < d`, by the two-term recurrence.
pub fn displacement_matrix(beta: Complex64, d: usize) -> CMat {
    let mut out = CMat::zeros(d, d);
    if d == 0 {
        return out;
    }
    out[(0, 0)] = Complex64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
    for m in 1..d {
        out[(m, 0)] = out[(m - 1, 0)] * beta / (m as f64).sqrt();
    }
    let bc = beta.conj();
    for n in 0..d - 1 {
        let norm = ((n + 1) as f64).sqrt();
        for m in 0..d {
            let up = if m > 0 { out[(m - 1, n)] * (m as f64).sqrt() } else { ZERO };
            out[(m, n + 1)] = (up - bc * out[(m, n)]) / norm;
        }
    }
    out
}
