//! Small dense linear-algebra helpers shared by the sensing, tracking and
//! beamforming modules.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{CMat, CVec, C64};

/// `(m + m^H) / 2`.
pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Column `i` of the returned matrix belongs to value `i`.
pub fn eigh_desc(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Projection onto the PSD cone by eigenvalue truncation.
pub fn psd_project(m: &CMat) -> CMat {
    let (values, vectors) = eigh_desc(m);
    let n = m.nrows();
    let mut out = CMat::zeros(n, n);
    for (i, &v) in values.iter().enumerate() {
        if v > 0.0 {
            let u = vectors.column(i);
            out += (&u * u.adjoint()).scale(v);
        }
    }
    hermitize(&out)
}

/// Real symmetric counterpart of [`psd_project`].
pub fn psd_project_real(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let clamped = eig.eigenvalues.map(|v| v.max(0.0));
    let out = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    (&out + out.transpose()) * 0.5
}

/// `Re(w^H R w)`.
pub fn quad_form(r: &CMat, w: &CVec) -> f64 {
    (w.adjoint() * r * w)[(0, 0)].re
}

/// `Re tr(A^H B)`, the real inner product on Hermitian matrices.
pub fn inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// `Re tr(R W)` for Hermitian `R`, `W`.
pub fn trace_product(r: &CMat, w: &CMat) -> f64 {
    // tr(RW) = sum_ij R_ij W_ji = sum_ij R_ij conj(W_ij) for Hermitian W
    r.iter().zip(w.iter()).map(|(x, y)| (x * y.conj()).re).sum()
}

/// Circularly-symmetric complex Gaussian vector with `E|z_i|^2 = variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize, variance: f64) -> CVec {
    let s = (variance / 2.0).sqrt();
    CVec::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

/// One circular complex Gaussian sample with the given variance.
pub fn complex_gaussian_scalar<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

/// Kronecker product of two column vectors.
pub fn kron(a: &CVec, b: &CVec) -> CVec {
    let mut out = CVec::zeros(a.len() * b.len());
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i * b.len() + j] = ai * bj;
        }
    }
    out
}

/// Smallest eigenvalue of a real symmetric matrix.
pub fn min_eigenvalue_real(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}
