//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
pub fn sym_eigen(m: &RMat) -> (Vec<f64>, RMat) {
    let sym = symmetrize(m);
    let eig = sym.symmetric_eigen();
    sort_eigen(eig.eigenvalues.as_slice(), &eig.eigenvectors)
}

/// Eigen-decomposition of a complex Hermitian matrix, eigenvalues ascending.
pub fn herm_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let h = hermitize(m);
    let eig = h.symmetric_eigen();
    sort_eigen(eig.eigenvalues.as_slice(), &eig.eigenvectors)
}

fn sort_eigen<T: nalgebra::Scalar + Copy>(vals: &[f64], vecs: &DMatrix<T>) -> (Vec<f64>, DMatrix<T>) {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
    let sorted_vals = idx.iter().map(|&i| vals[i]).collect();
    let sorted_vecs = DMatrix::from_fn(vecs.nrows(), vecs.ncols(), |r, c| vecs[(r, idx[c])]);
    (sorted_vals, sorted_vecs)
}

pub fn symmetrize(m: &RMat) -> RMat {
    (m + m.transpose()) * 0.5
}

pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn min_eig_sym(m: &RMat) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    sym_eigen(m).0[0]
}

pub fn min_eig_herm(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    herm_eigen(m).0[0]
}

/// Principal square root of a symmetric positive semidefinite matrix.
/// Negative eigenvalues (roundoff) are clamped to zero.
pub fn sqrtm_psd(m: &RMat) -> RMat {
    let (vals, vecs) = sym_eigen(m);
    let d = DVector::from_iterator(vals.len(), vals.iter().map(|v| v.max(0.0).sqrt()));
    &vecs * DMatrix::from_diagonal(&d) * vecs.transpose()
}

/// Factor `L` with `L L^T = m` for symmetric PSD `m` (eigenvalue based,
/// tolerant of rank deficiency).
pub fn psd_factor(m: &RMat) -> (RMat, f64) {
    let (vals, vecs) = sym_eigen(m);
    let min = vals.first().copied().unwrap_or(0.0);
    let d = DVector::from_iterator(vals.len(), vals.iter().map(|v| v.max(0.0).sqrt()));
    (&vecs * DMatrix::from_diagonal(&d), min)
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn max_abs_real(m: &RMat) -> f64 {
    m.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

pub fn max_abs_complex(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |a, x| a.max(x.norm()))
}

/// `max |U^H U - 1|`.
pub fn unitary_residual(u: &CMat) -> f64 {
    if u.nrows() != u.ncols() {
        return f64::INFINITY;
    }
    let n = u.nrows();
    max_abs_complex(&(u.adjoint() * u - CMat::identity(n, n)))
}

/// Canonical symplectic form in xxpp ordering.
pub fn omega_matrix(modes: usize) -> RMat {
    let n = 2 * modes;
    let mut om = RMat::zeros(n, n);
    for i in 0..modes {
        om[(i, modes + i)] = 1.0;
        om[(modes + i, i)] = -1.0;
    }
    om
}

/// Orthogonal symplectic matrix of a passive transformation
/// `a -> U a`: `[[Re U, -Im U], [Im U, Re U]]`.
pub fn passive_symplectic(u: &CMat) -> RMat {
    let m = u.nrows();
    let mut o = RMat::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            let z = u[(i, j)];
            o[(i, j)] = z.re;
            o[(i, m + j)] = -z.im;
            o[(m + i, j)] = z.im;
            o[(m + i, m + j)] = z.re;
        }
    }
    o
}

/// Split a real symplectic matrix into the complex pair `(A, B)` with
/// `a -> A a + B a^dagger`.
pub fn symplectic_to_ab(s: &RMat) -> (CMat, CMat) {
    let m = s.nrows() / 2;
    let mut a = CMat::zeros(m, m);
    let mut b = CMat::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let sxx = s[(i, j)];
            let sxp = s[(i, m + j)];
            let spx = s[(m + i, j)];
            let spp = s[(m + i, m + j)];
            a[(i, j)] = Complex64::new(0.5 * (sxx + spp), 0.5 * (spx - sxp));
            b[(i, j)] = Complex64::new(0.5 * (sxx - spp), 0.5 * (spx + sxp));
        }
    }
    (a, b)
}

/// Inverse of [`symplectic_to_ab`].
pub fn ab_to_symplectic(a: &CMat, b: &CMat) -> RMat {
    let m = a.nrows();
    let mut s = RMat::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            let plus = a[(i, j)] + b[(i, j)];
            let minus = a[(i, j)] - b[(i, j)];
            s[(i, j)] = plus.re;
            s[(i, m + j)] = -minus.im;
            s[(m + i, j)] = plus.im;
            s[(m + i, m + j)] = minus.re;
        }
    }
    s
}

/// `S^{-1} = -Omega S^T Omega`.
pub fn symplectic_inverse(s: &RMat) -> RMat {
    let om = omega_matrix(s.nrows() / 2);
    -(&om * s.transpose() * &om)
}

/// Haar-random unitary from the QR decomposition of a complex Ginibre
/// matrix, with the diagonal phases of R divided out.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let z = CMat::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) / std::f64::consts::SQRT_2
    });
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// Block-diagonal direct sum of two real matrices.
pub fn direct_sum(a: &RMat, b: &RMat) -> RMat {
    let mut out = RMat::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), (b.nrows(), b.ncols())).copy_from(b);
    out
}
