//! Scalar kernels on the annulus `A = {r < |z| < 1/r}`.
//!
//! `k_θ(z, w) = Σ_m (z·conj(w))^m / c_m(θ)` with
//! `c_m(θ) = r^{2(m+θ)} + r^{−2(m+θ)}`. Every weight is positive, so each
//! `k_θ` is positive semi-definite. Terms are evaluated in log-polar form so
//! that large `|m|` neither overflows nor underflows prematurely.
//!
//! Shifting `θ` by an integer multiplies the kernel by a power of
//! `1/(z·conj(w))`: `k_{θ+1}(z, w) = k_θ(z, w)/(z·conj(w))`. Non-reduced
//! `θ` are evaluated through that identity.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use super::{FamilyKind, KernelFamily};
use crate::kernel::{Kernel, Point, PointSet, ScalarFunction};
use crate::linalg::{c64, hermitian_eigen, max_abs, CMatrix, C64};
use crate::{Error, Result};

/// Largest automatic truncation order.
pub const MAX_TRUNCATION: usize = 200;
/// Target bound on the discarded tail for automatic truncation.
pub const TAIL_TARGET: f64 = 1e-12;
/// θ grid of [`fit_annulus_compression`] inside family compression rules.
pub const FIT_GRID: usize = 512;
/// Golden-section iterations after the grid sweep.
pub const FIT_REFINEMENTS: usize = 32;
/// Largest acceptable `σ₂/σ₁` of a fit.
pub const FIT_ACCEPT: f64 = 0.1;
/// Kernel values below this magnitude are masked out of the ratio matrix.
pub const MASK_TOL: f64 = 1e-12;

/// `k_θ` with modulus `r`; `truncation = None` picks the order per pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusKernel {
    r: f64,
    theta: f64,
    truncation: Option<usize>,
}

impl AnnulusKernel {
    pub fn new(r: f64, theta: f64, truncation: Option<usize>) -> Result<Self> {
        check_modulus(r)?;
        if !theta.is_finite() {
            return Err(Error::invalid("theta must be finite"));
        }
        if truncation == Some(0) {
            return Err(Error::invalid("truncation must be at least 1"));
        }
        Ok(AnnulusKernel { r, theta, truncation })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn truncation(&self) -> Option<usize> {
        self.truncation
    }

    pub fn check_point(&self, p: &Point) -> Result<()> {
        check_in_annulus(self.r, p.label(), p.require_coordinate()?)
    }

    pub fn eval_points(&self, x: &Point, y: &Point) -> Result<C64> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(eval_unchecked(
            self.r,
            self.theta,
            x.require_coordinate()?,
            y.require_coordinate()?,
            self.truncation,
        ))
    }
}

fn check_modulus(r: f64) -> Result<()> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::invalid(format!("annulus modulus r = {r} must lie in (0, 1)")));
    }
    Ok(())
}

fn check_in_annulus(r: f64, label: &str, z: C64) -> Result<()> {
    let m = z.norm();
    if !(m > r && m < 1.0 / r) {
        return Err(Error::invalid(format!(
            "point {label} at {z} is outside the annulus {r} < |z| < {}",
            1.0 / r
        )));
    }
    Ok(())
}

/// `q = max(|p|·r², r²/|p|)` for `p = z·conj(w)`.
fn ratio(r: f64, log_abs_p: f64) -> f64 {
    let r2 = r * r;
    let a = log_abs_p.exp();
    (a * r2).max(r2 / a)
}

/// Bound on `Σ_{|m|>N} |p^m / c_m(θ)|` for `θ ∈ [0, 1)`:
/// `(1 + r^{-2}) q^{N+1} / (1 − q)`.
pub fn annulus_tail_bound(r: f64, z: C64, w: C64, truncation: usize) -> f64 {
    let q = ratio(r, z.norm().ln() + w.norm().ln());
    if q >= 1.0 {
        return f64::INFINITY;
    }
    (1.0 + 1.0 / (r * r)) * q.powi(truncation as i32 + 1) / (1.0 - q)
}

/// Smallest `N ≤ MAX_TRUNCATION` whose tail bound is below `TAIL_TARGET`.
pub fn default_truncation(r: f64, z: C64, w: C64) -> usize {
    let q = ratio(r, z.norm().ln() + w.norm().ln());
    if !(q < 1.0) {
        return MAX_TRUNCATION;
    }
    let lead = (1.0 + 1.0 / (r * r)) / (1.0 - q);
    // lead · q^{N+1} < target  ⇔  N + 1 > ln(target/lead)/ln q
    let need = ((TAIL_TARGET / lead).ln() / q.ln()).ceil() as i64;
    need.clamp(1, MAX_TRUNCATION as i64) as usize
}

/// `ln c_m(θ) = ln(r^{a} + r^{-a})` with `a = 2(m + θ)`.
fn ln_weight(ln_r: f64, m: i64, theta: f64) -> f64 {
    let e = (2.0 * (m as f64 + theta) * ln_r).abs();
    e + (-2.0 * e).exp().ln_1p()
}

/// Series with `θ ∈ [0, 1)` and explicit order, for `p` given in log-polar form.
fn series(ln_r: f64, theta: f64, log_abs_p: f64, arg_p: f64, n: usize) -> C64 {
    let n = n as i64;
    let mut sum = c64(0.0, 0.0);
    // sum the small terms first
    let mut order: Vec<i64> = (-n..=n).collect();
    order.sort_by_key(|m| core::cmp::Reverse(m.abs()));
    for m in order {
        let mag = (m as f64 * log_abs_p - ln_weight(ln_r, m, theta)).exp();
        let ang = m as f64 * arg_p;
        sum += c64(mag * ang.cos(), mag * ang.sin());
    }
    sum
}

fn eval_unchecked(r: f64, theta: f64, z: C64, w: C64, truncation: Option<usize>) -> C64 {
    let shift = theta.floor();
    let base = theta - shift;
    let p = z * w.conj();
    let (log_abs_p, arg_p) = (z.norm().ln() + w.norm().ln(), p.arg());
    let n = truncation.unwrap_or_else(|| default_truncation(r, z, w));
    let v = series(r.ln(), base, log_abs_p, arg_p, n);
    if shift == 0.0 {
        v
    } else {
        // k_{base + j} = k_base · p^{−j}
        let j = shift;
        let scale = (-j * log_abs_p).exp();
        let ang = -j * arg_p;
        v * c64(scale * ang.cos(), scale * ang.sin())
    }
}

/// `k_θ(z, w)` for `r < |z|, |w| < 1/r`. With `truncation = None` the order
/// is chosen so the discarded tail is below `1e-12`.
pub fn annulus_kernel_eval(r: f64, theta: f64, z: C64, w: C64, truncation: Option<usize>) -> Result<C64> {
    let k = AnnulusKernel::new(r, theta, truncation)?;
    check_in_annulus(r, "z", z)?;
    check_in_annulus(r, "w", w)?;
    Ok(eval_unchecked(k.r, k.theta, z, w, k.truncation))
}

/// Generators `k_{j/grid}`, `j = 0, …, grid − 1`.
pub fn annulus_family(r: f64, theta_grid: usize, truncation: Option<usize>) -> Result<KernelFamily> {
    check_modulus(r)?;
    if theta_grid == 0 {
        return Err(Error::invalid("theta grid must have at least one point"));
    }
    let generators = (0..theta_grid)
        .map(|j| AnnulusKernel::new(r, j as f64 / theta_grid as f64, truncation).map(Kernel::annulus))
        .collect::<Result<Vec<_>>>()?;
    Ok(KernelFamily::from_parts(
        FamilyKind::Annulus {
            r,
            theta_grid,
            truncation,
        },
        generators,
    ))
}

/// Pairwise data of a point set for repeated Gram evaluation at many `θ`.
struct PairTable {
    m: usize,
    log_abs: Vec<f64>,
    arg: Vec<f64>,
    order: Vec<usize>,
}

impl PairTable {
    fn new(r: f64, coords: &[C64], truncation: Option<usize>) -> Self {
        let m = coords.len();
        let mut log_abs = vec![0.0; m * m];
        let mut arg = vec![0.0; m * m];
        let mut order = vec![0; m * m];
        for i in 0..m {
            for j in i..m {
                let (z, w) = (coords[i], coords[j]);
                log_abs[i * m + j] = z.norm().ln() + w.norm().ln();
                arg[i * m + j] = (z * w.conj()).arg();
                order[i * m + j] = truncation.unwrap_or_else(|| default_truncation(r, z, w));
            }
        }
        PairTable { m, log_abs, arg, order }
    }

    /// Gram of `k_θ` for reduced `θ ∈ [0, 1)`.
    fn gram(&self, ln_r: f64, theta: f64) -> CMatrix {
        let m = self.m;
        let mut g = CMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let t = i * m + j;
                let v = series(ln_r, theta, self.log_abs[t], self.arg[t], self.order[t]);
                g[(i, j)] = v;
                g[(j, i)] = v.conj();
            }
            g[(i, i)] = c64(g[(i, i)].re, 0.0);
        }
        g
    }
}

/// Result of [`fit_annulus_compression`].
#[derive(Debug, Clone)]
pub struct CompressionFit {
    pub theta_best: f64,
    /// Fitted `φ` with `k′(x, y) ≈ φ(x)·k_{θ_best}(x, y)·conj(φ(y))`.
    pub phi: ScalarFunction,
    /// `σ₂/σ₁` of the ratio matrix at `theta_best`.
    pub residual: f64,
    /// `(θ, residual)` over the uniform grid.
    pub grid_profile: Vec<(f64, f64)>,
}

/// Rank-one analysis of `R = k′ ./ k_θ`: the residual `σ₂/σ₁` and the
/// top eigenpair scaled to `φ` (before phase normalization).
fn ratio_fit(kprime: &CMatrix, k: &CMatrix) -> (f64, Vec<C64>) {
    let m = kprime.nrows();
    let mut mask = vec![false; m * m];
    let mut rmat = CMatrix::zeros(m, m);
    let mut any_masked = false;
    for i in 0..m {
        for j in i..m {
            let d = k[(i, j)];
            if d.norm() < MASK_TOL {
                mask[i * m + j] = true;
                mask[j * m + i] = true;
                any_masked = true;
            } else {
                let v = kprime[(i, j)] / d;
                rmat[(i, j)] = v;
                rmat[(j, i)] = v.conj();
            }
        }
    }
    let top = |a: &CMatrix| -> (f64, f64, Vec<C64>, f64) {
        let eig = hermitian_eigen(a);
        let mut mags: Vec<(f64, usize)> = eig.values.iter().enumerate().map(|(i, v)| (v.abs(), i)).collect();
        mags.sort_by(|x, y| y.0.total_cmp(&x.0));
        let s1 = mags.first().map(|x| x.0).unwrap_or(0.0);
        let s2 = mags.get(1).map(|x| x.0).unwrap_or(0.0);
        let (lam, idx) = mags
            .first()
            .map(|&(_, i)| (eig.values[i], i))
            .unwrap_or((0.0, 0));
        let v: Vec<C64> = if m > 0 { eig.vectors.column(idx).iter().copied().collect() } else { Vec::new() };
        (s1, s2, v, lam)
    };
    let (mut s1, mut s2, mut v, mut lam) = top(&rmat);
    if any_masked {
        // hard-impute: fill masked entries from the current rank-one fit
        for _ in 0..50 {
            let mut filled = rmat.clone();
            for i in 0..m {
                for j in 0..m {
                    if mask[i * m + j] {
                        filled[(i, j)] = v[i] * v[j].conj() * lam;
                    }
                }
            }
            let next = top(&filled);
            s1 = next.0;
            s2 = next.1;
            v = next.2;
            lam = next.3;
        }
    }
    let residual = if s1 > 0.0 { s2 / s1 } else { 1.0 };
    let scale = lam.abs().sqrt();
    (residual, v.into_iter().map(|c| c * scale).collect())
}

/// Recovers `θ′` and `φ` with `k′(x, y) = φ(x)·k_{θ′}(x, y)·conj(φ(y))` from
/// the Gram of a one-point compression of an annulus kernel.
///
/// A uniform grid of `theta_grid` values is swept for the smallest `σ₂/σ₁`
/// of the ratio matrix `k′ ./ k_θ`, then refined by golden-section search
/// within one grid step. `φ` is phase-normalized so its first entry with
/// modulus above `1e-8` is positive real.
pub fn fit_annulus_compression(
    kprime_gram: &CMatrix,
    points: &PointSet,
    r: f64,
    theta_grid: usize,
    truncation: Option<usize>,
) -> Result<CompressionFit> {
    check_modulus(r)?;
    if theta_grid == 0 {
        return Err(Error::invalid("theta grid must have at least one point"));
    }
    let m = points.len();
    if kprime_gram.nrows() != m || kprime_gram.ncols() != m {
        return Err(Error::invalid(format!(
            "Gram is {}x{}, expected {m}x{m}",
            kprime_gram.nrows(),
            kprime_gram.ncols()
        )));
    }
    let coords = points
        .iter()
        .map(|p| {
            let z = p.require_coordinate()?;
            check_in_annulus(r, p.label(), z)?;
            Ok(z)
        })
        .collect::<Result<Vec<_>>>()?;
    let table = PairTable::new(r, &coords, truncation);
    let ln_r = r.ln();
    let eval = |theta: f64| -> (f64, Vec<C64>) {
        let t = theta - theta.floor();
        ratio_fit(kprime_gram, &table.gram(ln_r, t))
    };

    let mut profile = Vec::with_capacity(theta_grid);
    let mut best = (0.0, f64::INFINITY);
    for j in 0..theta_grid {
        let theta = j as f64 / theta_grid as f64;
        let (res, _) = eval(theta);
        profile.push((theta, res));
        if res < best.1 {
            best = (theta, res);
        }
    }
    if max_abs(kprime_gram) == 0.0 || !(best.1 <= FIT_ACCEPT) {
        return Err(Error::FitFailure {
            best_residual: best.1,
            profile,
        });
    }

    let h = 1.0 / theta_grid as f64;
    let (mut a, mut b) = (best.0 - h, best.0 + h);
    let golden = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut c = b - golden * (b - a);
    let mut d = a + golden * (b - a);
    let mut fc = eval(c).0;
    let mut fd = eval(d).0;
    let mut cand = best;
    for _ in 0..FIT_REFINEMENTS {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - golden * (b - a);
            fc = eval(c).0;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + golden * (b - a);
            fd = eval(d).0;
        }
        for (t, f) in [(c, fc), (d, fd)] {
            if f < cand.1 {
                cand = (t, f);
            }
        }
    }
    let theta_best = cand.0 - cand.0.floor();
    let (residual, mut phi) = eval(theta_best);
    if let Some(lead) = phi.iter().find(|v| v.norm() > 1e-8).copied() {
        let phase = lead.conj() / lead.norm();
        phi.iter_mut().for_each(|v| *v *= phase);
    }
    Ok(CompressionFit {
        theta_best,
        phi: ScalarFunction::new(points.clone(), phi)?,
        residual,
        grid_profile: profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::rank_one_compress;
    use crate::kernel::kernel_gram;
    use crate::linalg::{psd_check, CVector, DEFAULT_PSD_TOL};

    fn oracle(r: f64, theta: f64, z: C64, w: C64, n: i64) -> C64 {
        let p = z * w.conj();
        let mut s = c64(0.0, 0.0);
        for m in -n..=n {
            let a = 2.0 * (m as f64 + theta);
            s += p.powi(m as i32) / (r.powf(a) + r.powf(-a));
        }
        s
    }

    fn ring() -> PointSet {
        PointSet::from_coordinates(&[
            c64(1.0, 0.0),
            c64(0.0, 0.8),
            c64(-1.2, 0.3),
            c64(0.6, -0.6),
            c64(1.5, 0.4),
        ])
    }

    #[test]
    fn matches_direct_summation() {
        let one = c64(1.0, 0.0);
        let v = annulus_kernel_eval(0.5, 0.0, one, one, Some(50)).unwrap();
        let expect = oracle(0.5, 0.0, one, one, 50);
        assert!((v - expect).norm() < 1e-13);
        assert!((v.re - 1.1367607720058066).abs() < 1e-12);
        let z = c64(0.7, 0.4);
        let w = c64(-1.1, 0.2);
        let v = annulus_kernel_eval(0.5, 0.3, z, w, None).unwrap();
        assert!((v - oracle(0.5, 0.3, z, w, 120)).norm() < 1e-12);
    }

    #[test]
    fn hermitian_symmetry() {
        let z = c64(0.7, 0.4);
        let w = c64(-1.1, 0.2);
        let a = annulus_kernel_eval(0.4, 0.7, z, w, None).unwrap();
        let b = annulus_kernel_eval(0.4, 0.7, w, z, None).unwrap();
        assert!((a - b.conj()).norm() < 1e-13);
    }

    #[test]
    fn integer_shift_identity() {
        let z = c64(0.9, 0.3);
        let w = c64(-0.6, 1.1);
        let a = annulus_kernel_eval(0.5, 1.25, z, w, Some(120)).unwrap();
        let b = annulus_kernel_eval(0.5, 0.25, z, w, Some(120)).unwrap() / (z * w.conj());
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn rejects_outside_points() {
        assert!(annulus_kernel_eval(0.5, 0.0, c64(0.4, 0.0), c64(1.0, 0.0), None).is_err());
        assert!(annulus_kernel_eval(0.5, 0.0, c64(1.0, 0.0), c64(2.5, 0.0), None).is_err());
        assert!(annulus_kernel_eval(1.5, 0.0, c64(1.0, 0.0), c64(1.0, 0.0), None).is_err());
    }

    #[test]
    fn truncation_within_tail_bound() {
        let z = c64(1.3, 0.2);
        let w = c64(0.0, 1.4);
        for n in [5usize, 10, 20] {
            let a = annulus_kernel_eval(0.5, 0.4, z, w, Some(n)).unwrap();
            let b = annulus_kernel_eval(0.5, 0.4, z, w, Some(2 * n)).unwrap();
            assert!((a - b).norm() <= annulus_tail_bound(0.5, z, w, n));
        }
    }

    #[test]
    fn family_grams_are_psd() {
        let fam = annulus_family(0.5, 8, None).unwrap();
        let pts = ring();
        for k in fam.generators() {
            let g = kernel_gram(k, &pts).unwrap();
            assert!(psd_check(&g, DEFAULT_PSD_TOL).unwrap().is_psd);
        }
    }

    #[test]
    fn fit_identity_without_compression() {
        let pts = ring();
        let theta = 0.375;
        let k = Kernel::annulus(AnnulusKernel::new(0.5, theta, None).unwrap());
        let g = kernel_gram(&k, &pts).unwrap();
        let fit = fit_annulus_compression(&g, &pts, 0.5, 64, None).unwrap();
        assert!((fit.theta_best - theta).abs() < 1e-6, "{}", fit.theta_best);
        assert!(fit.residual < 1e-10);
        for v in fit.phi.values() {
            assert!((v - c64(1.0, 0.0)).norm() < 1e-6);
        }
    }

    #[test]
    fn fit_one_point_compression() {
        let pts = ring();
        let k = Kernel::annulus(AnnulusKernel::new(0.5, 0.2, None).unwrap());
        let lambda = Point::new("lambda", c64(0.3, 0.9));
        let one = CVector::from_element(1, c64(1.0, 0.0));
        let kp = rank_one_compress(&k, &pts, &lambda, &one).unwrap();
        let fit = fit_annulus_compression(&kp.gram, &pts, 0.5, FIT_GRID, None).unwrap();
        assert!(fit.residual < 1e-5, "{}", fit.residual);
        let kt = Kernel::annulus(AnnulusKernel::new(0.5, fit.theta_best, None).unwrap());
        let g = kernel_gram(&kt, &pts).unwrap();
        let phi = fit.phi.values();
        let recomposed = CMatrix::from_fn(5, 5, |i, j| phi[i] * g[(i, j)] * phi[j].conj());
        assert!(max_abs(&(&recomposed - &kp.gram)) <= 1e-6 * max_abs(&kp.gram));
        assert_eq!(fit.grid_profile.len(), FIT_GRID);
    }

    #[test]
    fn fit_rejects_zero() {
        let pts = ring();
        let r = fit_annulus_compression(&CMatrix::zeros(5, 5), &pts, 0.5, 16, None);
        match r {
            Err(Error::FitFailure { profile, .. }) => assert_eq!(profile.len(), 16),
            other => panic!("expected fit failure, got {other:?}"),
        }
    }
}
