//! Dense complex linear algebra helpers: Hermitian eigendecomposition,
//! PSD certification and pseudo-inverses.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default relative PSD tolerance: `λ_min ≥ −tol·(1 + λ_max)`.
pub const DEFAULT_PSD_TOL: f64 = 1e-9;
/// Relative asymmetry above which a matrix is rejected instead of symmetrized.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Default relative rank threshold for quotients and pseudo-inverses.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[inline]
pub const fn c64(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// Outcome of [`psd_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdReport {
    pub is_psd: bool,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// ascending order; column `j` of `vectors` belongs to `values[j]`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest entrywise deviation from Hermitian symmetry.
pub fn asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(M + M*)/2`.
pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

fn check_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid(alloc::format!(
            "matrix is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Eigen-decomposition of a matrix that is Hermitian up to roundoff. The
/// matrix is symmetrized first; no asymmetry check is made.
pub fn hermitian_eigen(m: &CMatrix) -> HermitianEigen {
    let n = m.nrows();
    if n == 0 {
        return HermitianEigen {
            values: Vec::new(),
            vectors: CMatrix::zeros(0, 0),
        };
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    HermitianEigen { values, vectors }
}

/// Certifies positive semi-definiteness: `is_psd ⇔ λ_min ≥ −tol·(1 + λ_max)`.
///
/// Asymmetry up to `HERMITIAN_TOL` relative to the largest entry is
/// symmetrized away; anything larger is an input error.
pub fn psd_check(m: &CMatrix, tol: f64) -> Result<PsdReport> {
    check_square(m)?;
    if !(tol >= 0.0) {
        return Err(Error::invalid("PSD tolerance must be nonnegative"));
    }
    let scale = max_abs(m);
    let asym = asymmetry(m);
    if asym > HERMITIAN_TOL * scale || !asym.is_finite() {
        return Err(Error::invalid(alloc::format!(
            "matrix is not Hermitian (asymmetry {asym:e}, scale {scale:e})"
        )));
    }
    let eig = hermitian_eigen(m);
    Ok(report_from_eigenvalues(eig.min(), eig.max(), tol))
}

pub(crate) fn report_from_eigenvalues(min: f64, max: f64, tol: f64) -> PsdReport {
    PsdReport {
        is_psd: min >= -tol * (1.0 + max.max(0.0)),
        min_eigenvalue: min,
        max_eigenvalue: max,
    }
}

/// Moore–Penrose pseudo-inverse of a Hermitian PSD matrix, discarding
/// eigenvalues at or below `rank_tol · λ_max`.
pub fn hermitian_pinv(m: &CMatrix, rank_tol: f64) -> CMatrix {
    let n = m.nrows();
    let eig = hermitian_eigen(m);
    let cutoff = rank_tol * eig.max().max(0.0);
    let mut out = CMatrix::zeros(n, n);
    for (j, &lam) in eig.values.iter().enumerate() {
        if lam > cutoff && lam > 0.0 {
            let v = eig.vectors.column(j);
            out += (&v * v.adjoint()).map(|z| z / lam);
        }
    }
    out
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = m.adjoint() * m;
    hermitian_eigen(&gram).max().max(0.0).sqrt()
}

/// Lower Cholesky factor of a Hermitian matrix, or `None` unless every
/// pivot is strictly positive and finite.
pub fn hermitian_cholesky(m: &CMatrix) -> Option<CMatrix> {
    let n = m.nrows();
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = c64(djj, 0.0);
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Block-diagonal matrix with the given square blocks.
pub fn block_diag(blocks: &[&CMatrix]) -> CMatrix {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(n, n);
    let mut at = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((at, at), (k, k)).copy_from(*b);
        at += k;
    }
    out
}
