//! Multiplier norms `‖f‖_k`, family norms and quotient norms.
//!
//! `‖f‖_k` is the least `ρ` with `ρ²K − Δ_f K Δ_f* ⪰ 0`, where `Δ_f` is
//! block diagonal with blocks `f(x)·I_n`. On the range of `K = L L*` this is
//! the spectral norm of `A = W* Δ_f L` with `W = U_r Λ^{-1/2}`, so the
//! generalized pencil `(Δ_f K Δ_f*, K)` reduces to an ordinary Hermitian
//! eigenproblem for `A A*`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::family::KernelFamily;
use crate::hilbert::{build_h2, HilbertModel};
use crate::kernel::{pick_gram, Kernel, PointSet, ScalarFunction};
use crate::linalg::{
    c64, hermitian_cholesky, hermitian_eigen, max_abs, psd_check, spectral_norm, CMatrix, CVector, C64,
    DEFAULT_PSD_TOL, DEFAULT_RANK_TOL,
};
use crate::{Error, Result};

/// Relative size of `Δ_f K` outside `range(K)` that marks `f` unbounded.
pub const RANGE_TOL: f64 = 1e-8;
/// Newton iteration cap of the quotient-norm solver.
pub const MAX_NEWTON_ITERATIONS: usize = 5000;
/// Newton steps allowed per centering of the barrier method.
const MAX_CENTERING_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMethod {
    Pencil,
    Bisection,
}

#[derive(Debug, Clone)]
pub struct NormResult {
    pub value: f64,
    /// Kernel-column coordinate vector on which the norm is attained.
    pub certificate: CVector,
    pub method: NormMethod,
}

#[derive(Debug, Clone)]
pub struct QuotientResult {
    pub value: f64,
    /// Extension of `ψ` to `X` (values on `Y` copied unchanged).
    pub minimizer: ScalarFunction,
    pub iterations: usize,
    /// Certified optimality gap of `value`.
    pub gap: f64,
    pub lower_bound: f64,
}

fn values_on(points: &PointSet, f: &ScalarFunction) -> Result<Vec<C64>> {
    points
        .iter()
        .map(|p| f.require(p.label()).copied())
        .collect()
}

fn delta(vals: &[C64], n: usize) -> CMatrix {
    let size = vals.len() * n;
    CMatrix::from_fn(size, size, |r, c| if r == c { vals[r / n] } else { c64(0.0, 0.0) })
}

/// Component of `Δ K` outside `range(K)`, as a max-abs entry.
fn range_defect(model: &HilbertModel, d: &CMatrix) -> f64 {
    let dk = d * model.gram();
    let u = model.range_basis();
    max_abs(&(&dk - u * (u.adjoint() * &dk)))
}

/// `‖f‖_k` on the points of `model`.
pub fn multiplier_norm_in(model: &HilbertModel, f: &ScalarFunction) -> Result<NormResult> {
    let n = model.dim();
    let vals = values_on(model.points(), f)?;
    let size = vals.len() * n;
    if model.rank() == 0 {
        return Ok(NormResult {
            value: 0.0,
            certificate: CVector::zeros(size),
            method: NormMethod::Pencil,
        });
    }
    let d = delta(&vals, n);
    let defect = range_defect(model, &d);
    let threshold = RANGE_TOL * model.max_eigenvalue();
    if defect > threshold {
        return Err(Error::UnboundedMultiplier { defect, threshold });
    }
    let w = model.from_quotient_map();
    let a = w.adjoint() * &d * model.factor();
    let eig = hermitian_eigen(&(&a * a.adjoint()));
    let top = eig.values.len() - 1;
    Ok(NormResult {
        value: eig.max().max(0.0).sqrt(),
        certificate: &w * eig.vectors.column(top),
        method: NormMethod::Pencil,
    })
}

/// `‖f‖_k` over `points`: the least `ρ` making `(ρ² − f(x)conj(f(y)))k(x,y)`
/// positive semi-definite.
pub fn multiplier_norm(k: &Kernel, points: &PointSet, f: &ScalarFunction) -> Result<NormResult> {
    let model = build_h2(k, points, DEFAULT_RANK_TOL)?;
    multiplier_norm_in(&model, f)
}

/// Independent route to `‖f‖_k`: bisection on `ρ` with [`psd_check`] of the
/// Pick Gram, stopped at relative width `rel_tol`.
pub fn multiplier_norm_by_bisection(
    k: &Kernel,
    points: &PointSet,
    f: &ScalarFunction,
    rel_tol: f64,
) -> Result<NormResult> {
    let feasible = |rho: f64| -> Result<(bool, CVector)> {
        let g = pick_gram(k, f, rho, points)?;
        let eig = hermitian_eigen(&g);
        let report = psd_check(&g, DEFAULT_PSD_TOL)?;
        let v = if eig.values.is_empty() {
            CVector::zeros(0)
        } else {
            eig.vectors.column(0).into_owned()
        };
        Ok((report.is_psd, v))
    };
    let (ok0, v0) = feasible(0.0)?;
    if ok0 {
        return Ok(NormResult {
            value: 0.0,
            certificate: v0,
            method: NormMethod::Bisection,
        });
    }
    let mut hi = f.max_modulus().max(f64::MIN_POSITIVE);
    let mut doublings = 0;
    while !feasible(hi)?.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::UnboundedMultiplier {
                defect: f64::INFINITY,
                threshold: hi,
            });
        }
    }
    let mut lo = 0.0;
    let mut cert = v0;
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        let (ok, v) = feasible(mid)?;
        if ok {
            hi = mid;
        } else {
            lo = mid;
            cert = v;
        }
    }
    Ok(NormResult {
        value: hi,
        certificate: cert,
        method: NormMethod::Bisection,
    })
}

/// `sup_k ‖f‖_k` over the family's generators. Direct sums never exceed
/// the largest summand, so the generators suffice.
pub fn family_norm(family: &KernelFamily, points: &PointSet, f: &ScalarFunction) -> Result<f64> {
    let mut best = 0.0f64;
    for k in family.generators() {
        best = best.max(multiplier_norm(k, points, f)?.value);
    }
    Ok(best)
}

/// Largest `|f(x)|` over points with `k(x,x) ≠ 0`; a lower bound for `‖f‖_k`.
pub fn diagonal_lower_bound(k: &Kernel, f: &ScalarFunction) -> Result<f64> {
    let mut best = 0.0f64;
    for (p, v) in f.iter() {
        if k.diagonal_norm(p)? > 1e-12 {
            best = best.max(v.norm());
        }
    }
    Ok(best)
}

/// Quotient norm: `inf ‖φ‖_k` over `φ : X → ℂ` with `φ|_Y = ψ`.
///
/// The epigraph `t ≥ ‖φ‖_k` is the block LMI `[[tI, A(φ)], [A(φ)*, tI]] ⪰ 0`
/// with `A(φ) = W* Δ_φ L` affine in the free values, solved by a log-det
/// barrier path-following method until the duality gap drops below
/// `tol·lower_bound`.
pub fn quotient_norm(
    k: &Kernel,
    x: &PointSet,
    y: &PointSet,
    psi: &ScalarFunction,
    tol: f64,
) -> Result<QuotientResult> {
    if !y.is_subset_of(x) {
        return Err(Error::invalid("Y must be a subset of X"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let psi_y = psi.restrict(y)?;
    let free = x.difference(y);
    let model = build_h2(k, x, DEFAULT_RANK_TOL)?;
    let n = model.dim();
    let lower = diagonal_lower_bound(k, &psi_y)?;

    let mean = if psi_y.is_empty() {
        c64(0.0, 0.0)
    } else {
        psi_y.values().iter().sum::<C64>() / psi_y.len() as f64
    };
    let assemble = |free_vals: &[C64]| -> ScalarFunction {
        let mut it = free_vals.iter();
        ScalarFunction::from_fn(x.clone(), |p| match psi_y.value(p.label()) {
            Some(v) => v,
            None => *it.next().expect("one value per free point"),
        })
    };

    if psi_y.is_zero() {
        let minimizer = assemble(&vec![c64(0.0, 0.0); free.len()]);
        return Ok(QuotientResult {
            value: 0.0,
            minimizer,
            iterations: 0,
            gap: 0.0,
            lower_bound: 0.0,
        });
    }
    if free.is_empty() {
        let minimizer = assemble(&[]);
        let value = multiplier_norm_in(&model, &minimizer)?.value;
        return Ok(QuotientResult {
            value,
            minimizer,
            iterations: 0,
            gap: 0.0,
            lower_bound: value,
        });
    }

    // Real parameters: (Re φ_j, Im φ_j) for each free point j.
    let free_idx: Vec<usize> = free
        .iter()
        .map(|p| x.position(p.label()).expect("free point in X"))
        .collect();
    let nparam = 2 * free_idx.len();
    let fixed: Vec<C64> = x
        .iter()
        .map(|p| psi_y.value(p.label()).unwrap_or(c64(0.0, 0.0)))
        .collect();
    let d0 = delta(&fixed, n);
    let dirs: Vec<CMatrix> = (0..nparam)
        .map(|i| {
            let mut vals = vec![c64(0.0, 0.0); x.len()];
            vals[free_idx[i / 2]] = if i % 2 == 0 { c64(1.0, 0.0) } else { c64(0.0, 1.0) };
            delta(&vals, n)
        })
        .collect();
    let mut start = vec![0.0; nparam];
    for j in 0..free_idx.len() {
        start[2 * j] = mean.re;
        start[2 * j + 1] = mean.im;
    }

    let (x0, basis) = feasible_affine_set(&model, &d0, &dirs, &start, lower.max(psi_y.max_modulus()))?;

    let w = model.from_quotient_map();
    let wl = |d: &CMatrix| w.adjoint() * d * model.factor();
    let mut d_start = d0.clone();
    for (c, d) in x0.iter().zip(&dirs) {
        d_start += d.map(|z| z * *c);
    }
    let a0 = wl(&d_start);
    let a_dirs: Vec<CMatrix> = (0..basis.ncols())
        .map(|kcol| {
            let mut acc = CMatrix::zeros(a0.nrows(), a0.ncols());
            for (i, d) in dirs.iter().enumerate() {
                let c = basis[(i, kcol)];
                if c != 0.0 {
                    acc += wl(d).map(|z| z * c);
                }
            }
            acc
        })
        .collect();

    let sol = minimize_spectral_norm(&a0, &a_dirs, tol, lower)?;
    let mut xs = x0.clone();
    for (kcol, zk) in sol.z.iter().enumerate() {
        for (i, xi) in xs.iter_mut().enumerate() {
            *xi += basis[(i, kcol)] * zk;
        }
    }
    let free_vals: Vec<C64> = (0..free_idx.len())
        .map(|j| c64(xs[2 * j], xs[2 * j + 1]))
        .collect();
    let minimizer = assemble(&free_vals);
    let value = multiplier_norm_in(&model, &minimizer)?.value;
    Ok(QuotientResult {
        value,
        minimizer,
        iterations: sol.iterations,
        gap: sol.gap,
        lower_bound: lower.max(sol.t - sol.gap),
    })
}

/// Affine set of real parameters `x` keeping `Δ(x) K` inside `range(K)`:
/// returns a point closest to `start` and an orthonormal basis of directions.
fn feasible_affine_set(
    model: &HilbertModel,
    d0: &CMatrix,
    dirs: &[CMatrix],
    start: &[f64],
    scale: f64,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let nparam = dirs.len();
    let null = model.null_basis();
    if null.ncols() == 0 {
        return Ok((start.to_vec(), DMatrix::identity(nparam, nparam)));
    }
    let l = model.factor();
    let c0 = null.adjoint() * d0 * l;
    let cs: Vec<CMatrix> = dirs.iter().map(|d| null.adjoint() * d * l).collect();
    let entries = c0.len();
    let mut m = DMatrix::<f64>::zeros(2 * entries, nparam);
    let mut rhs = nalgebra::DVector::<f64>::zeros(2 * entries);
    for e in 0..entries {
        rhs[2 * e] = -c0[e].re;
        rhs[2 * e + 1] = -c0[e].im;
        for (i, c) in cs.iter().enumerate() {
            m[(2 * e, i)] = c[e].re;
            m[(2 * e + 1, i)] = c[e].im;
        }
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let cut = 1e-10 * smax.max(f64::MIN_POSITIVE);
    let xp = svd
        .solve(&rhs, cut)
        .map_err(|e| Error::NumericalFailure {
            message: format!("range constraint solve failed: {e}"),
            lower: 0.0,
            upper: f64::INFINITY,
        })?;
    let resid = (&m * &xp - &rhs).amax();
    let threshold = RANGE_TOL * model.max_eigenvalue().sqrt() * (1.0 + scale);
    if resid > threshold {
        return Err(Error::UnboundedMultiplier {
            defect: resid,
            threshold,
        });
    }
    let vt = svd.v_t.expect("requested");
    let mut null_dirs: Vec<nalgebra::DVector<f64>> = Vec::new();
    let ranked: Vec<bool> = svd.singular_values.iter().map(|&s| s > cut).collect();
    // rows of v_t with negligible singular values, plus any missing rows
    let full = nalgebra::SVD::new(m.transpose() * &m, true, true);
    let _ = &full;
    for r in 0..vt.nrows() {
        if !ranked[r] {
            null_dirs.push(vt.row(r).transpose());
        }
    }
    if vt.nrows() < nparam {
        // thin SVD dropped directions: complete via the normal matrix
        let gram = m.transpose() * &m;
        let eig = nalgebra::SymmetricEigen::new(gram);
        let emax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
        null_dirs.clear();
        for (j, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam <= 1e-20 * emax.max(f64::MIN_POSITIVE) * 1e10 {
                null_dirs.push(eig.eigenvectors.column(j).into_owned());
            }
        }
    }
    let basis = if null_dirs.is_empty() {
        DMatrix::zeros(nparam, 0)
    } else {
        DMatrix::from_columns(&null_dirs)
    };
    let s = nalgebra::DVector::from_column_slice(start);
    let x0 = &xp + &basis * (basis.transpose() * (&s - &xp));
    Ok((x0.iter().copied().collect(), basis))
}

struct SpectralSolution {
    z: Vec<f64>,
    t: f64,
    gap: f64,
    iterations: usize,
}

/// Minimizes `σ_max(A0 + Σ z_k A_k)` over real `z` with a log-det barrier on
/// `B(t, z) = [[tI, A], [A*, tI]]`.
fn minimize_spectral_norm(
    a0: &CMatrix,
    dirs: &[CMatrix],
    rel_tol: f64,
    lower_hint: f64,
) -> Result<SpectralSolution> {
    // whiten the directions and drop those that leave A unchanged
    let nd = dirs.len();
    let mut gram = DMatrix::<f64>::zeros(nd, nd);
    for i in 0..nd {
        for j in i..nd {
            let v = dirs[i].zip_map(&dirs[j], |a, b| (a.conj() * b).re).sum();
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let (values, vectors) = if nd == 0 {
        (nalgebra::DVector::zeros(0), DMatrix::zeros(0, 0))
    } else {
        let eig = nalgebra::SymmetricEigen::new(gram);
        (eig.eigenvalues, eig.eigenvectors)
    };
    let emax = values.iter().fold(0.0f64, |a, &b| a.max(b));
    let kept: Vec<usize> = (0..nd).filter(|&j| values[j] > 1e-14 * emax).collect();
    let map = DMatrix::<f64>::from_fn(nd, kept.len(), |i, j| vectors[(i, kept[j])] / values[kept[j]].sqrt());
    let dirs: Vec<CMatrix> = (0..kept.len())
        .map(|j| {
            let mut acc = CMatrix::zeros(a0.nrows(), a0.ncols());
            for (i, d) in dirs.iter().enumerate() {
                acc += d.map(|z| z * map[(i, j)]);
            }
            acc
        })
        .collect();
    let unmap = |w: &[f64]| -> Vec<f64> {
        (0..nd).map(|i| (0..w.len()).map(|j| map[(i, j)] * w[j]).sum()).collect()
    };

    let d = dirs.len();
    let sigma0 = spectral_norm(a0);
    if d == 0 || sigma0 == 0.0 {
        return Ok(SpectralSolution {
            z: vec![0.0; nd],
            t: sigma0,
            gap: 0.0,
            iterations: 0,
        });
    }
    let (r, c) = (a0.nrows(), a0.ncols());
    let m = r + c;
    let embed = |a: &CMatrix, t: f64| -> CMatrix {
        let mut b = CMatrix::zeros(m, m);
        b.view_mut((0, c), (r, c)).copy_from(a);
        b.view_mut((r, 0), (c, r)).copy_from(&a.adjoint());
        for i in 0..m {
            b[(i, i)] += c64(t, 0.0);
        }
        b
    };
    let b0 = embed(a0, 0.0);
    let bdirs: Vec<CMatrix> = dirs.iter().map(|a| embed(a, 0.0)).collect();
    let assemble = |v: &[f64]| -> CMatrix {
        let mut b = b0.clone();
        for i in 0..m {
            b[(i, i)] += c64(v[0], 0.0);
        }
        for (k, bk) in bdirs.iter().enumerate() {
            if v[k + 1] != 0.0 {
                b += bk.map(|z| z * v[k + 1]);
            }
        }
        b
    };
    // log det B, or None outside the cone
    let logdet = |b: &CMatrix| -> Option<(f64, CMatrix)> {
        let l = hermitian_cholesky(b)?;
        let s: f64 = (0..m).map(|i| l[(i, i)].re.ln()).sum();
        if !s.is_finite() {
            return None;
        }
        let linv = l.solve_lower_triangular(&CMatrix::identity(m, m))?;
        Some((2.0 * s, linv.adjoint() * linv))
    };

    let floor = if lower_hint > 0.0 { lower_hint } else { sigma0 * 1e-12 };
    let mut v = vec![0.0; d + 1];
    v[0] = 1.5 * sigma0 + floor;
    let mut mu = m as f64 / v[0];
    let mut iterations = 0usize;
    loop {
        // centering
        for _ in 0..MAX_CENTERING_STEPS {
            iterations += 1;
            if iterations > MAX_NEWTON_ITERATIONS {
                return Err(Error::NumericalFailure {
                    message: "quotient-norm barrier solver hit its iteration cap".into(),
                    lower: (v[0] - m as f64 / mu).max(lower_hint),
                    upper: v[0],
                });
            }
            let b = assemble(&v);
            let (ld, s) = logdet(&b).ok_or_else(|| Error::NumericalFailure {
                message: "barrier iterate left the feasible cone".into(),
                lower: lower_hint,
                upper: v[0],
            })?;
            let mut ys: Vec<CMatrix> = Vec::with_capacity(d + 1);
            ys.push(s.clone());
            for bk in &bdirs {
                ys.push(&s * bk);
            }
            let mut g = nalgebra::DVector::<f64>::zeros(d + 1);
            g[0] = mu - s.trace().re;
            for k in 0..d {
                g[k + 1] = -ys[k + 1].trace().re;
            }
            let mut h = DMatrix::<f64>::zeros(d + 1, d + 1);
            for i in 0..=d {
                for j in i..=d {
                    let mut acc = 0.0;
                    for a in 0..m {
                        for bb in 0..m {
                            acc += (ys[i][(a, bb)] * ys[j][(bb, a)]).re;
                        }
                    }
                    h[(i, j)] = acc;
                    h[(j, i)] = acc;
                }
            }
            let step = match h.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => match h.clone().lu().solve(&(-&g)) {
                    Some(s) => s,
                    None => break,
                },
            };
            let decrement = -g.dot(&step);
            if decrement / 2.0 <= 1e-10 {
                break;
            }
            let mut s_len = 1.0;
            let mut moved = false;
            for _ in 0..80 {
                let cand: Vec<f64> = v.iter().zip(step.iter()).map(|(a, b)| a + s_len * b).collect();
                if let Some((ld2, _)) = logdet(&assemble(&cand)) {
                    // barrier change computed as a difference to keep precision at large μ
                    let change = mu * s_len * step[0] - (ld2 - ld);
                    if change <= -0.25 * s_len * decrement {
                        v = cand;
                        moved = true;
                        break;
                    }
                }
                s_len *= 0.5;
            }
            if !moved {
                break;
            }
        }
        let gap = m as f64 / mu;
        let lower = (v[0] - gap).max(floor);
        if gap <= rel_tol * lower {
            return Ok(SpectralSolution {
                z: unmap(&v[1..]),
                t: v[0],
                gap,
                iterations,
            });
        }
        mu *= 10.0;
    }
}
