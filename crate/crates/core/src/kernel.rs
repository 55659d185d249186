//! Points, functions on finite point sets, and `M_n`-valued kernels.
//!
//! A [`Kernel`] is either an explicit Hermitian block table over a fixed
//! [`PointSet`] or an analytic evaluator (the Szegő kernel `I_n ⊗ s` on the
//! unit disc, or an annulus kernel) that is sampled at point coordinates.
//! Gram matrices are laid out block by block in the order of the point set:
//! row `i·n + c` belongs to coordinate `c` at point `i`.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};

use crate::family::annulus::AnnulusKernel;
use crate::linalg::{block_diag, max_abs, asymmetry, c64, CMatrix, CVector, C64, HERMITIAN_TOL};
use crate::{Error, Result};

/// An element of the abstract set `X`. Identity is the label; the coordinate
/// is only consulted by analytic kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    label: String,
    coordinate: Option<C64>,
}

impl Point {
    pub fn new(label: impl Into<String>, coordinate: C64) -> Self {
        Point {
            label: label.into(),
            coordinate: Some(coordinate),
        }
    }

    /// A point without a coordinate, usable only with explicit kernels.
    pub fn labelled(label: impl Into<String>) -> Self {
        Point {
            label: label.into(),
            coordinate: None,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn coordinate(&self) -> Option<C64> {
        self.coordinate
    }

    pub(crate) fn require_coordinate(&self) -> Result<C64> {
        self.coordinate
            .ok_or_else(|| Error::invalid(format!("point {} has no coordinate", self.label)))
    }
}

/// Ordered list of points with pairwise distinct labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointSet {
    points: Vec<Point>,
}

impl PointSet {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if points[..i].iter().any(|q| q.label == p.label) {
                return Err(Error::invalid(format!("duplicate point label {}", p.label)));
            }
        }
        Ok(PointSet { points })
    }

    pub fn empty() -> Self {
        PointSet { points: Vec::new() }
    }

    /// Points labelled `p0, p1, …` at the given coordinates.
    pub fn from_coordinates(coords: &[C64]) -> Self {
        PointSet {
            points: coords
                .iter()
                .enumerate()
                .map(|(i, &z)| Point::new(format!("p{i}"), z))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Point> {
        self.points.iter()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn get(&self, i: usize) -> Option<&Point> {
        self.points.get(i)
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.points.iter().position(|p| p.label == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.position(label).is_some()
    }

    pub fn find(&self, label: &str) -> Option<&Point> {
        self.points.iter().find(|p| p.label == label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.points.iter().map(|p| p.label.as_str())
    }

    /// Sub-list of the points carrying the given labels, in the given order.
    pub fn select<S: AsRef<str>>(&self, labels: &[S]) -> Result<PointSet> {
        let points = labels
            .iter()
            .map(|l| {
                self.find(l.as_ref())
                    .cloned()
                    .ok_or_else(|| Error::invalid(format!("unknown point label {}", l.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        PointSet::new(points)
    }

    /// True when every label of `self` is a label of `other`.
    pub fn is_subset_of(&self, other: &PointSet) -> bool {
        self.points.iter().all(|p| other.contains(&p.label))
    }

    /// True when `self` appears in `other` with its relative order preserved.
    pub fn is_ordered_sublist_of(&self, other: &PointSet) -> bool {
        let mut it = other.points.iter();
        self.points
            .iter()
            .all(|p| it.by_ref().any(|q| q.label == p.label))
    }

    /// Points of `self` whose labels are not in `other`, in order.
    pub fn difference(&self, other: &PointSet) -> PointSet {
        PointSet {
            points: self
                .points
                .iter()
                .filter(|p| !other.contains(&p.label))
                .cloned()
                .collect(),
        }
    }

    pub fn with_point(&self, point: Point) -> Result<PointSet> {
        if self.contains(&point.label) {
            return Err(Error::invalid(format!("point {} already present", point.label)));
        }
        let mut points = self.points.clone();
        points.push(point);
        Ok(PointSet { points })
    }

    pub fn same_labels(&self, other: &PointSet) -> bool {
        self.len() == other.len() && self.is_subset_of(other)
    }
}

/// A value attached to every point of a declared [`PointSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct PointMap<T> {
    points: PointSet,
    values: Vec<T>,
}

/// Complex-valued function on a finite point set (interpolation data).
pub type ScalarFunction = PointMap<C64>;
/// Map from points to complex vectors (the `G` of a scalarization).
pub type VectorField = PointMap<CVector>;
/// Map from points to complex matrices (the `G` of a factorization).
pub type MatrixField = PointMap<CMatrix>;

impl<T: Clone> PointMap<T> {
    pub fn new(points: PointSet, values: Vec<T>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} values for {} points",
                values.len(),
                points.len()
            )));
        }
        Ok(PointMap { points, values })
    }

    pub fn from_fn(points: PointSet, mut f: impl FnMut(&Point) -> T) -> Self {
        let values = points.iter().map(&mut f).collect();
        PointMap { points, values }
    }

    pub fn try_from_fn(points: PointSet, f: impl FnMut(&Point) -> Result<T>) -> Result<Self> {
        let values = points.iter().map(f).collect::<Result<Vec<_>>>()?;
        Ok(PointMap { points, values })
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<&T> {
        self.points.position(label).map(|i| &self.values[i])
    }

    pub(crate) fn require(&self, label: &str) -> Result<&T> {
        self.get(label)
            .ok_or_else(|| Error::invalid(format!("function not defined at point {label}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, &T)> {
        self.points.iter().zip(self.values.iter())
    }

    /// The restriction to `subset`, reordered to follow `subset`.
    pub fn restrict(&self, subset: &PointSet) -> Result<Self> {
        let values = subset
            .iter()
            .map(|p| self.require(p.label()).cloned())
            .collect::<Result<Vec<_>>>()?;
        Ok(PointMap {
            points: subset.clone(),
            values,
        })
    }

    pub fn with_value(&self, point: Point, value: T) -> Result<Self> {
        let points = self.points.with_point(point)?;
        let mut values = self.values.clone();
        values.push(value);
        Ok(PointMap { points, values })
    }
}

impl PointMap<C64> {
    pub fn constant(points: PointSet, c: C64) -> Self {
        let values = vec![c; points.len()];
        PointMap { points, values }
    }

    pub fn value(&self, label: &str) -> Option<C64> {
        self.get(label).copied()
    }

    pub fn scaled(&self, c: C64) -> Self {
        PointMap {
            points: self.points.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// Pointwise product on the common domain of `self` (must cover `other`'s labels).
    pub fn product(&self, other: &ScalarFunction) -> Result<Self> {
        let values = self
            .iter()
            .map(|(p, v)| other.require(p.label()).map(|w| v * w))
            .collect::<Result<Vec<_>>>()?;
        Ok(PointMap {
            points: self.points.clone(),
            values,
        })
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.re == 0.0 && v.im == 0.0)
    }
}

/// Explicit kernel stored as a table of `n×n` blocks over a point set.
/// Missing blocks are allowed and only fail when evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    points: PointSet,
    blocks: Vec<Option<CMatrix>>,
}

impl KernelTable {
    pub fn points(&self) -> &PointSet {
        &self.points
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelBody {
    Table(KernelTable),
    /// `I_n ⊗ s` with `s(z,w) = 1/(1 − z·conj(w))` on the open unit disc.
    Szego,
    Annulus(AnnulusKernel),
    DirectSum(Vec<Kernel>),
}

/// An `M_n`-valued positive semi-definite kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    dim: usize,
    body: KernelBody,
}

impl Kernel {
    /// `I_n ⊗ s`.
    pub fn szego(n: usize) -> Kernel {
        assert!(n >= 1, "kernel dimension must be positive");
        Kernel {
            dim: n,
            body: KernelBody::Szego,
        }
    }

    pub fn annulus(k: AnnulusKernel) -> Kernel {
        Kernel {
            dim: 1,
            body: KernelBody::Annulus(k),
        }
    }

    /// Explicit kernel from its full Gram matrix over `points`.
    pub fn from_gram(points: PointSet, n: usize, gram: &CMatrix) -> Result<Kernel> {
        if n == 0 {
            return Err(Error::invalid("kernel dimension must be positive"));
        }
        let m = points.len();
        if gram.nrows() != n * m || gram.ncols() != n * m {
            return Err(Error::invalid(format!(
                "Gram is {}x{}, expected {}x{}",
                gram.nrows(),
                gram.ncols(),
                n * m,
                n * m
            )));
        }
        if asymmetry(gram) > HERMITIAN_TOL * max_abs(gram) {
            return Err(Error::invalid("Gram matrix is not Hermitian"));
        }
        let mut blocks = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                blocks.push(Some(gram.view((i * n, j * n), (n, n)).into_owned()));
            }
        }
        Ok(Kernel {
            dim: n,
            body: KernelBody::Table(KernelTable { points, blocks }),
        })
    }

    /// Explicit kernel from one triangle of blocks: each `(x, y, block)`
    /// with `x` not after `y` in the order of `points`. The mirrored block is
    /// the adjoint; diagonal blocks must be Hermitian.
    pub fn from_upper_blocks(
        points: PointSet,
        n: usize,
        entries: &[(String, String, CMatrix)],
    ) -> Result<Kernel> {
        if n == 0 {
            return Err(Error::invalid("kernel dimension must be positive"));
        }
        let m = points.len();
        let mut blocks: Vec<Option<CMatrix>> = vec![None; m * m];
        for (x, y, b) in entries {
            let i = points
                .position(x)
                .ok_or_else(|| Error::invalid(format!("unknown point label {x}")))?;
            let j = points
                .position(y)
                .ok_or_else(|| Error::invalid(format!("unknown point label {y}")))?;
            if b.nrows() != n || b.ncols() != n {
                return Err(Error::invalid(format!(
                    "block ({x},{y}) is {}x{}, expected {n}x{n}",
                    b.nrows(),
                    b.ncols()
                )));
            }
            if i > j {
                return Err(Error::invalid(format!(
                    "block ({x},{y}) is below the diagonal; store the upper triangle only"
                )));
            }
            if blocks[i * m + j].is_some() {
                return Err(Error::invalid(format!("duplicate block ({x},{y})")));
            }
            if i == j && asymmetry(b) > HERMITIAN_TOL * max_abs(b) {
                return Err(Error::invalid(format!("diagonal block ({x},{x}) is not Hermitian")));
            }
            blocks[i * m + j] = Some(b.clone());
            if i != j {
                blocks[j * m + i] = Some(b.adjoint());
            }
        }
        Ok(Kernel {
            dim: n,
            body: KernelBody::Table(KernelTable { points, blocks }),
        })
    }

    /// The zero `n×n` kernel on `points`.
    pub fn zero(points: PointSet, n: usize) -> Result<Kernel> {
        let m = points.len();
        Kernel::from_gram(points, n, &CMatrix::zeros(n * m, n * m))
    }

    /// Block size `n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn body(&self) -> &KernelBody {
        &self.body
    }

    /// The finite domain of a table kernel (or of the first table summand).
    pub fn domain(&self) -> Option<&PointSet> {
        match &self.body {
            KernelBody::Table(t) => Some(&t.points),
            KernelBody::DirectSum(parts) => parts.iter().find_map(|k| k.domain()),
            _ => None,
        }
    }

    /// Checks that the kernel can be evaluated at `p`.
    pub fn check_point(&self, p: &Point) -> Result<()> {
        match &self.body {
            KernelBody::Table(t) => {
                if t.points.contains(p.label()) {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("point {} outside kernel domain", p.label())))
                }
            }
            KernelBody::Szego => {
                let z = p.require_coordinate()?;
                if z.norm() < 1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!(
                        "point {} at {z} is outside the open unit disc",
                        p.label()
                    )))
                }
            }
            KernelBody::Annulus(a) => a.check_point(p),
            KernelBody::DirectSum(parts) => parts.iter().try_for_each(|k| k.check_point(p)),
        }
    }

    /// The block `k(x, y)`.
    pub fn eval(&self, x: &Point, y: &Point) -> Result<CMatrix> {
        match &self.body {
            KernelBody::Table(t) => {
                let m = t.points.len();
                let i = t.points.position(x.label());
                let j = t.points.position(y.label());
                match (i, j) {
                    (Some(i), Some(j)) => t.blocks[i * m + j].clone().ok_or_else(|| {
                        Error::invalid(format!(
                            "missing table entry ({}, {})",
                            x.label(),
                            y.label()
                        ))
                    }),
                    _ => Err(Error::invalid(format!(
                        "pair ({}, {}) outside kernel domain",
                        x.label(),
                        y.label()
                    ))),
                }
            }
            KernelBody::Szego => {
                self.check_point(x)?;
                self.check_point(y)?;
                let s = szego(x.require_coordinate()?, y.require_coordinate()?);
                Ok(CMatrix::from_diagonal_element(self.dim, self.dim, s))
            }
            KernelBody::Annulus(a) => {
                let v = a.eval_points(x, y)?;
                Ok(CMatrix::from_element(1, 1, v))
            }
            KernelBody::DirectSum(parts) => {
                let blocks = parts
                    .iter()
                    .map(|k| k.eval(x, y))
                    .collect::<Result<Vec<_>>>()?;
                let refs: Vec<&CMatrix> = blocks.iter().collect();
                Ok(block_diag(&refs))
            }
        }
    }

    /// Frobenius norm of the diagonal block `k(x, x)`.
    pub fn diagonal_norm(&self, x: &Point) -> Result<f64> {
        Ok(self.eval(x, x)?.norm())
    }
}

/// Szegő kernel `1/(1 − z·conj(w))`.
pub fn szego(z: C64, w: C64) -> C64 {
    (c64(1.0, 0.0) - z * w.conj()).inv()
}

/// Gram matrix of `k` over `points`; block `(i, j)` is `k(F[i], F[j])`.
///
/// Only the upper block triangle is evaluated; the lower one is its adjoint,
/// so the result is exactly Hermitian.
pub fn kernel_gram(k: &Kernel, points: &PointSet) -> Result<CMatrix> {
    let n = k.dim();
    let m = points.len();
    let mut gram = CMatrix::zeros(n * m, n * m);
    for (i, x) in points.iter().enumerate() {
        for (j, y) in points.iter().enumerate().skip(i) {
            let mut b = k.eval(x, y)?;
            if i == j {
                b = crate::linalg::symmetrize(&b);
            }
            gram.view_mut((i * n, j * n), (n, n)).copy_from(&b);
            if i != j {
                gram.view_mut((j * n, i * n), (n, n)).copy_from(&b.adjoint());
            }
        }
    }
    Ok(gram)
}

/// `(k1 ⊕ k2)(x, y) = diag(k1(x, y), k2(x, y))`.
pub fn direct_sum(k1: &Kernel, k2: &Kernel) -> Result<Kernel> {
    if let (Some(d1), Some(d2)) = (k1.domain(), k2.domain()) {
        if !d1.same_labels(d2) {
            return Err(Error::invalid("direct sum of kernels on different point sets"));
        }
    }
    let mut parts = Vec::new();
    for k in [k1, k2] {
        match &k.body {
            KernelBody::DirectSum(inner) => parts.extend(inner.iter().cloned()),
            _ => parts.push(k.clone()),
        }
    }
    Ok(Kernel {
        dim: k1.dim + k2.dim,
        body: KernelBody::DirectSum(parts),
    })
}

/// `k|_Y`, materialized as an explicit table over `subset`.
pub fn restrict(k: &Kernel, subset: &PointSet) -> Result<Kernel> {
    for p in subset.iter() {
        k.check_point(p)?;
    }
    let gram = kernel_gram(k, subset)?;
    Kernel::from_gram(subset.clone(), k.dim(), &gram)
}

/// The kernel `(ρ² − f(x)·conj(f(y)))·k(x, y)`.
///
/// For a table kernel the result lives on the kernel's domain (and `f` must
/// cover it); for analytic kernels it lives on `f`'s domain.
pub fn pick_kernel(k: &Kernel, f: &ScalarFunction, rho: f64) -> Result<Kernel> {
    let points = pick_domain(k, f)?;
    let gram = pick_gram(k, f, rho, &points)?;
    Kernel::from_gram(points, k.dim(), &gram)
}

pub(crate) fn pick_domain(k: &Kernel, f: &ScalarFunction) -> Result<PointSet> {
    match k.domain() {
        Some(d) => {
            for p in d.iter() {
                f.require(p.label())?;
            }
            Ok(d.clone())
        }
        None => Ok(f.points().clone()),
    }
}

/// Gram of the Pick kernel over `points` (which `f` must cover).
pub fn pick_gram(k: &Kernel, f: &ScalarFunction, rho: f64, points: &PointSet) -> Result<CMatrix> {
    if !(rho >= 0.0) {
        return Err(Error::invalid("rho must be nonnegative"));
    }
    let gram = kernel_gram(k, points)?;
    let vals = points
        .iter()
        .map(|p| f.require(p.label()).copied())
        .collect::<Result<Vec<_>>>()?;
    Ok(apply_pick_weights(&gram, k.dim(), &vals, rho))
}

/// `ρ²K − Δ_f K Δ_f*` for a Gram `K` with blocks of size `n`.
pub(crate) fn apply_pick_weights(gram: &CMatrix, n: usize, vals: &[C64], rho: f64) -> CMatrix {
    let rho2 = rho * rho;
    CMatrix::from_fn(gram.nrows(), gram.ncols(), |r, c| {
        let w = c64(rho2, 0.0) - vals[r / n] * vals[c / n].conj();
        w * gram[(r, c)]
    })
}

/// Scalar kernel `k(x, y) = G(x)* K(x, y) G(y)` on `G`'s domain.
///
/// This is the congruence of `K` by the block-diagonal `Δ_G`, so it is PSD
/// whenever `K` is.
pub fn scalarize(k: &Kernel, g: &VectorField) -> Result<Kernel> {
    let n = k.dim();
    for (p, v) in g.iter() {
        if v.len() != n {
            return Err(Error::invalid(format!(
                "vector at {} has length {}, kernel dimension is {n}",
                p.label(),
                v.len()
            )));
        }
    }
    let points = g.points().clone();
    let big = kernel_gram(k, &points)?;
    let m = points.len();
    let mut gram = CMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let block = big.view((i * n, j * n), (n, n));
            let v = (g.values()[i].adjoint() * block * &g.values()[j])[(0, 0)];
            gram[(i, j)] = v;
            gram[(j, i)] = v.conj();
        }
        gram[(i, i)] = c64(gram[(i, i)].re, 0.0);
    }
    Kernel::from_gram(points, 1, &gram)
}
