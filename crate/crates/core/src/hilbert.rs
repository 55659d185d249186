//! The finite-dimensional reproducing space `H²(k)` over a finite point set.
//!
//! Elements are kept in kernel-column coordinates: a vector `v` of length
//! `n·|F|` stands for `Σ_y k(·, y) v_y`, with inner product
//! `⟨u, v⟩ = v* K u` where `K` is the Gram matrix. Null vectors of `K` are
//! quotiented out through a Hermitian eigendecomposition; the orthonormal
//! (quotient) coordinates of `v` are `L* v` where `K = L L*`.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::kernel::{kernel_gram, Kernel, MatrixField, Point, PointSet};
use crate::linalg::{
    hermitian_eigen, hermitian_pinv, max_abs, psd_check, spectral_norm, symmetrize, CMatrix,
    CVector, C64, DEFAULT_PSD_TOL,
};
use crate::{Error, Result};

/// Relative tolerance of the `Q_x` well-definedness check.
pub const QX_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct HilbertModel {
    kernel: Kernel,
    points: PointSet,
    gram: CMatrix,
    factor: CMatrix,
    range_basis: CMatrix,
    range_eigenvalues: Vec<f64>,
    null_basis: CMatrix,
    max_eigenvalue: f64,
    rank_tol: f64,
}

impl HilbertModel {
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn gram(&self) -> &CMatrix {
        &self.gram
    }

    /// `L` with `gram = L L*`; its columns span the range of the Gram.
    pub fn factor(&self) -> &CMatrix {
        &self.factor
    }

    pub fn rank(&self) -> usize {
        self.range_eigenvalues.len()
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.max_eigenvalue
    }

    /// Orthonormal eigenvectors spanning the range (`U_r`).
    pub fn range_basis(&self) -> &CMatrix {
        &self.range_basis
    }

    pub fn range_eigenvalues(&self) -> &[f64] {
        &self.range_eigenvalues
    }

    /// Orthonormal eigenvectors spanning the null space.
    pub fn null_basis(&self) -> &CMatrix {
        &self.null_basis
    }

    /// Gram row of coordinate `coord` at the point labelled `label`.
    pub fn index(&self, label: &str, coord: usize) -> Option<usize> {
        if coord >= self.dim() {
            return None;
        }
        self.points.position(label).map(|i| i * self.dim() + coord)
    }

    /// `⟨u, v⟩ = v* K u`.
    pub fn inner(&self, u: &CVector, v: &CVector) -> C64 {
        (v.adjoint() * &self.gram * u)[(0, 0)]
    }

    /// Quotient (orthonormal) coordinates `L* v`.
    pub fn to_quotient(&self, v: &CVector) -> CVector {
        self.factor.adjoint() * v
    }

    /// Right inverse of [`to_quotient`](Self::to_quotient): `U_r Λ^{-1/2}`.
    pub fn from_quotient_map(&self) -> CMatrix {
        let mut w = self.range_basis.clone();
        for (j, &lam) in self.range_eigenvalues.iter().enumerate() {
            let s = 1.0 / lam.sqrt();
            w.column_mut(j).iter_mut().for_each(|z| *z *= s);
        }
        w
    }

    /// Block selector `E_x`: keeps the coordinates of `x`, zeroes the rest.
    pub(crate) fn block_selector(&self, i: usize) -> CMatrix {
        let n = self.dim();
        let size = self.gram.nrows();
        CMatrix::from_fn(size, size, |r, c| {
            if r == c && r / n == i {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// `‖gram − L L*‖` in spectral norm.
    pub fn factor_residual(&self) -> f64 {
        spectral_norm(&(&self.gram - &self.factor * self.factor.adjoint()))
    }
}

/// Builds `H²(k)` over `points`. Eigenvalues at or below
/// `rank_tol · λ_max` span the null space.
pub fn build_h2(k: &Kernel, points: &PointSet, rank_tol: f64) -> Result<HilbertModel> {
    let gram = kernel_gram(k, points)?;
    model_from_gram(k.clone(), points.clone(), gram, rank_tol)
}

pub(crate) fn model_from_gram(
    kernel: Kernel,
    points: PointSet,
    gram: CMatrix,
    rank_tol: f64,
) -> Result<HilbertModel> {
    let report = psd_check(&gram, DEFAULT_PSD_TOL)?;
    if !report.is_psd {
        return Err(Error::InvalidKernel {
            min_eigenvalue: report.min_eigenvalue,
        });
    }
    let size = gram.nrows();
    let eig = hermitian_eigen(&gram);
    let max = eig.max().max(0.0);
    let cutoff = rank_tol * max;
    let mut range_cols = Vec::new();
    let mut null_cols = Vec::new();
    for (j, &lam) in eig.values.iter().enumerate() {
        if lam > cutoff && lam > 0.0 {
            range_cols.push(j);
        } else {
            null_cols.push(j);
        }
    }
    let range_basis = CMatrix::from_fn(size, range_cols.len(), |r, c| eig.vectors[(r, range_cols[c])]);
    let null_basis = CMatrix::from_fn(size, null_cols.len(), |r, c| eig.vectors[(r, null_cols[c])]);
    let range_eigenvalues: Vec<f64> = range_cols.iter().map(|&j| eig.values[j]).collect();
    let mut factor = range_basis.clone();
    for (j, &lam) in range_eigenvalues.iter().enumerate() {
        let s = lam.sqrt();
        factor.column_mut(j).iter_mut().for_each(|z| *z *= s);
    }
    Ok(HilbertModel {
        kernel,
        points,
        gram,
        factor,
        range_basis,
        range_eigenvalues,
        null_basis,
        max_eigenvalue: max,
        rank_tol,
    })
}

/// The idempotent `Q_x` in quotient coordinates (a `rank × rank` matrix).
///
/// `Q_x` sends the class of `k(·, y)v` to itself when `y = x` and to zero
/// otherwise. It is well defined only if every null vector `v` of the Gram
/// has `k(·, x) v_x = 0`; a violation is reported as
/// [`Error::PreconditionViolated`].
pub fn qx_operator(model: &HilbertModel, x: &Point) -> Result<CMatrix> {
    let i = model
        .points
        .position(x.label())
        .ok_or_else(|| Error::invalid(format!("point {} not in model", x.label())))?;
    let ex = model.block_selector(i);
    let threshold = QX_TOL * (1.0 + model.max_eigenvalue);
    for c in 0..model.null_basis.ncols() {
        let v = model.null_basis.column(c);
        let leak = (&model.gram * (&ex * v)).norm();
        if leak > threshold {
            return Err(Error::PreconditionViolated(format!(
                "Q_{} is not well defined: a null vector leaks {leak:e} through its block",
                x.label()
            )));
        }
    }
    Ok(model.factor.adjoint() * ex * model.from_quotient_map())
}

/// Gram data of a compressed kernel `k′` together with its certificates.
#[derive(Debug, Clone)]
pub struct CompressedKernel {
    pub points: PointSet,
    pub dim: usize,
    /// Gram matrix of `k′` over `points`.
    pub gram: CMatrix,
    /// `P_M` in kernel-column coordinates, when the compressed vectors lie
    /// in the span of the point set's kernel columns.
    pub projector: Option<CMatrix>,
    /// Annihilation residual `max ‖k′(·, z) γ‖` over the generators.
    pub defect: f64,
}

impl CompressedKernel {
    /// `k′` as an explicit kernel on its point set.
    pub fn to_kernel(&self) -> Result<Kernel> {
        Kernel::from_gram(self.points.clone(), self.dim, &self.gram)
    }
}

/// `k′(x, y) = k(x, y) − k(x, z)γγ*k(z, y) / (γ*k(z, z)γ)` over `points`.
pub fn rank_one_compress(
    k: &Kernel,
    points: &PointSet,
    z: &Point,
    gamma: &CVector,
) -> Result<CompressedKernel> {
    let n = k.dim();
    if gamma.len() != n {
        return Err(Error::invalid(format!(
            "gamma has length {}, kernel dimension is {n}",
            gamma.len()
        )));
    }
    let kzz = k.eval(z, z)?;
    let denom = (gamma.adjoint() * &kzz * gamma)[(0, 0)].re;
    let threshold = 1e-12 * kzz.norm() * gamma.norm_squared();
    if !(denom.abs() > threshold) {
        return Err(Error::DegenerateCompression {
            denominator: denom,
            threshold,
        });
    }
    let m = points.len();
    // a_x = k(x, z) γ, stacked over the point set
    let mut a = CVector::zeros(n * m);
    for (i, x) in points.iter().enumerate() {
        let col = k.eval(x, z)? * gamma;
        a.rows_mut(i * n, n).copy_from(&col);
    }
    let gram = kernel_gram(k, points)?;
    let kprime = symmetrize(&(&gram - (&a * a.adjoint()).map(|v| v / denom)));

    let ratio = (gamma.adjoint() * &kzz * gamma)[(0, 0)] / denom;
    let mut defect = 0.0f64;
    for i in 0..m {
        let ax = a.rows(i * n, n);
        defect = defect.max((ax - ax.map(|v| v * ratio)).norm());
    }

    let projector = points.position(z.label()).map(|zi| {
        let mut e = CVector::zeros(n * m);
        e.rows_mut(zi * n, n).copy_from(gamma);
        // P_M = I − e (K e)* / denom, and K e = a
        CMatrix::identity(n * m, n * m) - (&e * a.adjoint()).map(|v| v / denom)
    });

    Ok(CompressedKernel {
        points: points.clone(),
        dim: n,
        gram: kprime,
        projector,
        defect,
    })
}

/// Generators `(z, J_z)` of the subspace `N = Σ k(·, z) J_z` to compress away.
#[derive(Debug, Clone, Default)]
pub struct CompressionSpec {
    pub generators: Vec<(Point, Vec<CVector>)>,
}

impl CompressionSpec {
    pub fn new() -> Self {
        CompressionSpec::default()
    }

    pub fn single(z: Point, gamma: CVector) -> Self {
        CompressionSpec {
            generators: alloc::vec![(z, alloc::vec![gamma])],
        }
    }

    pub fn push(&mut self, z: Point, span: Vec<CVector>) {
        self.generators.push((z, span));
    }
}

/// Compression of `k` to `M = H²(k) ⊖ N`: the Gram of `k′` is
/// `K − C·pinv(N)·C*` with `C = K B` (generator columns `B`) and
/// `N = B* K B`.
pub fn compress_kernel(model: &HilbertModel, spec: &CompressionSpec) -> Result<CompressedKernel> {
    let n = model.dim();
    let size = model.gram.nrows();
    let mut cols: Vec<CVector> = Vec::new();
    for (z, span) in &spec.generators {
        let zi = model
            .points
            .position(z.label())
            .ok_or_else(|| Error::invalid(format!("generator point {} not in model", z.label())))?;
        for gamma in span {
            if gamma.len() != n {
                return Err(Error::invalid(format!(
                    "generator vector at {} has length {}, kernel dimension is {n}",
                    z.label(),
                    gamma.len()
                )));
            }
            let mut e = CVector::zeros(size);
            e.rows_mut(zi * n, n).copy_from(gamma);
            cols.push(e);
        }
    }
    if cols.is_empty() {
        return Ok(CompressedKernel {
            points: model.points.clone(),
            dim: n,
            gram: model.gram.clone(),
            projector: Some(CMatrix::identity(size, size)),
            defect: 0.0,
        });
    }
    let b = CMatrix::from_columns(&cols);
    let c = &model.gram * &b;
    let nmat = b.adjoint() * &c;
    let pinv = hermitian_pinv(&nmat, model.rank_tol);
    let gram = symmetrize(&(&model.gram - &c * &pinv * c.adjoint()));
    let projector = CMatrix::identity(size, size) - &b * &pinv * c.adjoint();
    let defect = max_abs(&(&gram * &b));
    Ok(CompressedKernel {
        points: model.points.clone(),
        dim: n,
        gram,
        projector: Some(projector),
        defect,
    })
}

/// Largest entrywise deviation between `kprime.gram` and the Gram of
/// `(x, y) ↦ G(x)·κ(x, y)·G(y)*` over `points`.
pub fn isometry_check(
    kprime: &CompressedKernel,
    kappa: &Kernel,
    g: &MatrixField,
    points: &PointSet,
) -> Result<f64> {
    let n = kprime.dim;
    let big_n = kappa.dim();
    let m = points.len();
    if kprime.gram.nrows() != n * m || !kprime.points.same_labels(points) {
        return Err(Error::invalid("compressed kernel does not live on the given point set"));
    }
    let gs = points
        .iter()
        .map(|p| g.require(p.label()).cloned())
        .collect::<Result<Vec<_>>>()?;
    for (p, gx) in points.iter().zip(&gs) {
        if gx.nrows() != n || gx.ncols() != big_n {
            return Err(Error::invalid(format!(
                "G({}) is {}x{}, expected {n}x{big_n}",
                p.label(),
                gx.nrows(),
                gx.ncols()
            )));
        }
    }
    let kappa_gram = kernel_gram(kappa, points)?;
    let mut worst = 0.0f64;
    for (i, x) in points.iter().enumerate() {
        let row = kprime.points.position(x.label()).expect("same labels");
        for (j, y) in points.iter().enumerate() {
            let col = kprime.points.position(y.label()).expect("same labels");
            let kk = kappa_gram.view((i * big_n, j * big_n), (big_n, big_n));
            let rhs = &gs[i] * kk * gs[j].adjoint();
            let lhs = kprime.gram.view((row * n, col * n), (n, n));
            worst = worst.max(max_abs(&(lhs - rhs)));
        }
    }
    Ok(worst)
}
