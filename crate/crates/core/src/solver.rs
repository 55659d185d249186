//! Pick feasibility, the minimal bound `ρ`, one-point feasible regions and
//! the point-by-point extension of interpolation data to a finite set.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::family::KernelFamily;
use crate::kernel::{apply_pick_weights, kernel_gram, pick_gram, Kernel, Point, PointSet, ScalarFunction};
use crate::linalg::{c64, hermitian_eigen, psd_check, report_from_eigenvalues, CMatrix, C64, DEFAULT_PSD_TOL};
use crate::multiplier::family_norm;
use crate::{Error, Result};

/// Default inflation `ρ_used = ρ(1 + ε)` of [`extend`].
pub const DEFAULT_EPSILON: f64 = 1e-6;
/// Default number of grid cells per axis of a feasible region.
pub const DEFAULT_GRID: usize = 101;
/// Levels of 2×2 subdivision applied to boundary cells.
pub const REFINEMENT_DEPTH: usize = 3;
/// Relative tolerance used when `minimal_rho` is called internally.
pub const RHO_TOL: f64 = 1e-9;
/// Cutting-plane steps of the 2-D polish in [`extend`].
pub const POLISH_ITERATIONS: usize = 400;
/// Diagonal blocks with Frobenius norm at or below this vanish.
const DIAGONAL_TOL: f64 = 1e-12;

/// Outcome of [`pick_feasible`].
#[derive(Debug, Clone, PartialEq)]
pub struct PickCertificate {
    pub feasible: bool,
    /// Smallest eigenvalue of each generator's Pick matrix.
    pub min_eigenvalues: Vec<f64>,
}

/// True when `(ρ² − g(x)conj(g(y)))k(x, y)` is positive semi-definite on `Y`
/// for every generator `k`.
pub fn pick_feasible(
    family: &KernelFamily,
    y: &PointSet,
    g: &ScalarFunction,
    rho: f64,
) -> Result<PickCertificate> {
    let mut feasible = true;
    let mut min_eigenvalues = Vec::with_capacity(family.generators().len());
    for k in family.generators() {
        let report = psd_check(&pick_gram(k, g, rho, y)?, DEFAULT_PSD_TOL)?;
        feasible &= report.is_psd;
        min_eigenvalues.push(report.min_eigenvalue);
    }
    Ok(PickCertificate {
        feasible,
        min_eigenvalues,
    })
}

/// The least `ρ` for which the Pick condition holds on `Y` for the whole
/// family: the family norm of `g`, refined by bisection if needed so that
/// the condition holds at `ρ(1 + tol)` and fails at `ρ(1 − tol)`.
pub fn minimal_rho(family: &KernelFamily, y: &PointSet, g: &ScalarFunction, tol: f64) -> Result<f64> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::invalid("tolerance must lie in (0, 1)"));
    }
    let g = g.restrict(y)?;
    let mut rho = family_norm(family, y, &g)?;
    let feasible = |r: f64| pick_feasible(family, y, &g, r).map(|c| c.feasible);
    if rho == 0.0 {
        return Ok(0.0);
    }
    if !feasible(rho * (1.0 + tol))? {
        let mut lo = rho;
        let mut hi = 2.0 * rho;
        let mut guard = 0;
        while !feasible(hi)? {
            lo = hi;
            hi *= 2.0;
            guard += 1;
            if guard > 200 {
                return Err(Error::NumericalFailure {
                    message: "no feasible rho found".into(),
                    lower: lo,
                    upper: f64::INFINITY,
                });
            }
        }
        while hi - lo > 0.25 * tol * hi {
            let mid = 0.5 * (lo + hi);
            if feasible(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        rho = hi;
    }
    if feasible(rho * (1.0 - tol))? {
        let mut lo = 0.0;
        let mut hi = rho * (1.0 - tol);
        if feasible(lo)? {
            return Ok(0.0);
        }
        while hi - lo > 0.25 * tol * hi {
            let mid = 0.5 * (lo + hi);
            if feasible(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        rho = hi;
    }
    Ok(rho)
}

/// Pick data for extending `f` from `F` to one new point `z`, per generator.
struct OnePointProblem {
    rho: f64,
    /// Gram over `F ∪ {z}` (z last), block size and `λ_max` of each generator.
    grams: Vec<(CMatrix, usize, f64)>,
    values: Vec<C64>,
}

/// Margins of a candidate value: per-generator `λ_min/(1 + λ_max)` of the
/// extended Pick matrix.
#[derive(Debug, Clone)]
struct Evaluation {
    margins: Vec<f64>,
    feasible: bool,
}

impl Evaluation {
    fn margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl OnePointProblem {
    fn new(family: &KernelFamily, x: &PointSet, f: &ScalarFunction, z: &Point, rho: f64) -> Result<Self> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::invalid("rho must be a nonnegative number"));
        }
        if x.contains(z.label()) {
            return Err(Error::invalid(format!("point {} already belongs to the set", z.label())));
        }
        let values = x
            .iter()
            .map(|p| f.require(p.label()).copied())
            .collect::<Result<Vec<_>>>()?;
        family.check_point(z)?;
        let mut nonzero = false;
        for k in family.generators() {
            nonzero |= k.diagonal_norm(z)? > DIAGONAL_TOL;
        }
        if !nonzero {
            return Err(Error::DegeneratePoint(String::from(z.label())));
        }
        let ext = x.with_point(z.clone())?;
        let grams = family
            .generators()
            .iter()
            .map(|k: &Kernel| {
                let g = kernel_gram(k, &ext)?;
                let lmax = hermitian_eigen(&g).max().max(0.0);
                Ok((g, k.dim(), lmax))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(OnePointProblem { rho, grams, values })
    }

    fn pick_matrix(&self, i: usize, u: C64) -> CMatrix {
        let (g, n, _) = &self.grams[i];
        let mut vals = self.values.clone();
        vals.push(u);
        apply_pick_weights(g, *n, &vals, self.rho)
    }

    fn evaluate(&self, u: C64) -> Evaluation {
        let mut margins = Vec::with_capacity(self.grams.len());
        let mut feasible = true;
        for i in 0..self.grams.len() {
            let eig = self.pick_matrix(i, u).symmetric_eigenvalues();
            let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
            let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            feasible &= report_from_eigenvalues(min, max, DEFAULT_PSD_TOL).is_psd;
            margins.push(min / (1.0 + max.max(0.0)));
        }
        Evaluation { margins, feasible }
    }

    /// Concave objective `min_k λ_min(P_k(u))/(1 + ρ²λ_max(K_k))` with a
    /// supergradient in `(Re u, Im u)`.
    fn concave(&self, u: C64) -> (f64, [f64; 2]) {
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        for i in 0..self.grams.len() {
            let (k, n, lmax) = &self.grams[i];
            let scale = 1.0 + self.rho * self.rho * lmax;
            let eig = hermitian_eigen(&self.pick_matrix(i, u));
            let val = eig.min() / scale;
            if val < best.0 {
                let v = eig.vectors.column(0);
                let size = k.nrows();
                let zi = size / n - 1;
                // w = Δ* v with Δ = diag(values, u) ⊗ I_n
                let w = CMatrixColumn::from_fn(size, |r, _| {
                    let d = if r / n == zi { u } else { self.values[r / n] };
                    d.conj() * v[r]
                });
                let kw = k * &w;
                let mut s = c64(0.0, 0.0);
                for a in zi * n..(zi + 1) * n {
                    s += v[a].conj() * kw[a];
                }
                best = (val, [-2.0 * s.re / scale, 2.0 * s.im / scale]);
            }
        }
        best
    }
}

type CMatrixColumn = crate::linalg::CVector;

/// One evaluated cell of a [`FeasibleRegion`].
#[derive(Debug, Clone)]
pub struct RegionCell {
    pub center: C64,
    /// Side length.
    pub size: f64,
    /// Subdivision level (0 for the base grid).
    pub level: usize,
    /// Per-generator `λ_min/(1 + λ_max)` of the extended Pick matrix at `center`.
    pub margins: Vec<f64>,
    pub margin: f64,
    pub feasible: bool,
}

/// Grid description of the set of values admissible at a new point.
#[derive(Debug, Clone)]
pub struct FeasibleRegion {
    pub point: String,
    pub rho: f64,
    /// Radius of the disc containing the region.
    pub center_bound: f64,
    /// Half-width of the square covered by the grid.
    pub half_width: f64,
    pub grid_n: usize,
    /// Side of a base-grid cell.
    pub cell_size: f64,
    pub refinement_depth: usize,
    pub tol: f64,
    /// Leaf cells meeting the bounding disc.
    pub cells: Vec<RegionCell>,
}

impl FeasibleRegion {
    pub fn feasible_cells(&self) -> impl Iterator<Item = &RegionCell> {
        self.cells.iter().filter(|c| c.feasible)
    }

    pub fn is_empty(&self) -> bool {
        self.feasible_cells().next().is_none()
    }

    /// Feasible cell of largest margin; ties go to the smallest `(Re, Im)`.
    pub fn best_cell(&self) -> Option<&RegionCell> {
        self.feasible_cells().fold(None, |acc: Option<&RegionCell>, c| match acc {
            None => Some(c),
            Some(b) => {
                let better = c.margin > b.margin
                    || (c.margin == b.margin
                        && (c.center.re, c.center.im) < (b.center.re, b.center.im));
                Some(if better { c } else { b })
            }
        })
    }

    /// Largest `|u|` over centers of feasible cells.
    pub fn max_feasible_modulus(&self) -> f64 {
        self.feasible_cells().fold(0.0, |m, c| m.max(c.center.norm()))
    }
}

/// The set of `u` such that extending `f` by `f(z) = u` keeps every Pick
/// matrix positive semi-definite at `rho`, sampled on a `grid_n × grid_n`
/// grid over `[−ρ, ρ]²` with adaptive refinement at the boundary.
pub fn one_point_region(
    family: &KernelFamily,
    x: &PointSet,
    f: &ScalarFunction,
    z: &Point,
    rho: f64,
    grid_n: usize,
) -> Result<FeasibleRegion> {
    one_point_region_in(family, x, f, z, rho, rho, grid_n, REFINEMENT_DEPTH)
}

/// [`one_point_region`] over the square `[−half_width, half_width]²`.
#[allow(clippy::too_many_arguments)]
pub fn one_point_region_in(
    family: &KernelFamily,
    x: &PointSet,
    f: &ScalarFunction,
    z: &Point,
    rho: f64,
    half_width: f64,
    grid_n: usize,
    depth: usize,
) -> Result<FeasibleRegion> {
    if grid_n == 0 {
        return Err(Error::invalid("grid must have at least one cell"));
    }
    if !(half_width >= 0.0) || !half_width.is_finite() {
        return Err(Error::invalid("grid half-width must be a nonnegative number"));
    }
    if depth > 12 {
        return Err(Error::invalid("refinement depth is limited to 12"));
    }
    let problem = OnePointProblem::new(family, x, f, z, rho)?;
    let mut region = FeasibleRegion {
        point: String::from(z.label()),
        rho,
        center_bound: rho,
        half_width,
        grid_n,
        cell_size: 2.0 * half_width / grid_n as f64,
        refinement_depth: depth,
        tol: DEFAULT_PSD_TOL,
        cells: Vec::new(),
    };
    if half_width == 0.0 {
        let e = problem.evaluate(c64(0.0, 0.0));
        region.cells.push(RegionCell {
            center: c64(0.0, 0.0),
            size: 0.0,
            level: 0,
            margin: e.margin(),
            margins: e.margins,
            feasible: e.feasible,
        });
        return Ok(region);
    }

    // lattice of half-steps of the finest level; a base cell spans `unit` steps
    let unit: i64 = 1 << (depth + 1);
    let step = region.cell_size / unit as f64;
    let at = |a: i64, b: i64| c64(-half_width + a as f64 * step, -half_width + b as f64 * step);
    let mut cache: BTreeMap<(i64, i64), Evaluation> = BTreeMap::new();
    let mut eval = |a: i64, b: i64| -> Evaluation {
        cache.entry((a, b)).or_insert_with(|| problem.evaluate(at(a, b))).clone()
    };
    let bound = region.center_bound;
    let outside = |a: i64, b: i64, s: i64| -> bool {
        // distance from the origin to the closest point of the cell
        let lo = at(a, b);
        let hi = at(a + s, b + s);
        let dx = if lo.re > 0.0 { lo.re } else if hi.re < 0.0 { -hi.re } else { 0.0 };
        let dy = if lo.im > 0.0 { lo.im } else if hi.im < 0.0 { -hi.im } else { 0.0 };
        (dx * dx + dy * dy).sqrt() > bound
    };

    let mut stack: Vec<(i64, i64, usize)> = Vec::new();
    for i in (0..grid_n as i64).rev() {
        for j in (0..grid_n as i64).rev() {
            stack.push((i * unit, j * unit, 0));
        }
    }
    while let Some((a, b, level)) = stack.pop() {
        let s = unit >> level;
        if outside(a, b, s) {
            continue;
        }
        let center = eval(a + s / 2, b + s / 2);
        if level < depth {
            let corners = [(a, b), (a + s, b), (a, b + s), (a + s, b + s)];
            let mixed = corners.iter().any(|&(p, q)| eval(p, q).feasible != center.feasible);
            if mixed {
                let h = s / 2;
                for (da, db) in [(h, h), (0, h), (h, 0), (0, 0)] {
                    stack.push((a + da, b + db, level + 1));
                }
                continue;
            }
        }
        region.cells.push(RegionCell {
            center: at(a + s / 2, b + s / 2),
            size: s as f64 * step,
            level,
            margin: center.margin(),
            margins: center.margins,
            feasible: center.feasible,
        });
    }
    Ok(region)
}

/// Data of an extension problem.
#[derive(Debug, Clone)]
pub struct InterpolationInstance {
    pub x: PointSet,
    pub y: PointSet,
    pub g: ScalarFunction,
    pub family: KernelFamily,
    /// Bound to extend at; the minimal one when absent.
    pub rho: Option<f64>,
}

impl InterpolationInstance {
    pub fn new(
        x: PointSet,
        y: PointSet,
        g: ScalarFunction,
        family: KernelFamily,
        rho: Option<f64>,
    ) -> Result<Self> {
        if !y.is_ordered_sublist_of(&x) {
            return Err(Error::invalid("Y must be an ordered sublist of X"));
        }
        if !g.points().same_labels(&y) {
            return Err(Error::invalid("g must be defined exactly on Y"));
        }
        if let Some(r) = rho {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::invalid("rho must be a nonnegative number"));
            }
        }
        Ok(InterpolationInstance { x, y, g, family, rho })
    }
}

/// Certificates of one extension step.
#[derive(Debug, Clone)]
pub struct StepMargins {
    pub point: String,
    pub value: C64,
    /// Per-generator `λ_min/(1 + λ_max)` of the extended Pick matrix.
    pub margins: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExtensionResult {
    /// The extension, on `X` in the order of `X`.
    pub f: ScalarFunction,
    pub rho: f64,
    pub rho_used: f64,
    pub margins: Vec<StepMargins>,
    /// Per-generator minimal eigenvalue of the final Pick matrix over `X`.
    pub certificates: Vec<f64>,
    pub order: Vec<String>,
}

/// Cutting-plane maximization of the concave objective over the square
/// `[−radius, radius]²`: each step queries the centroid of the remaining
/// polygon and keeps the half-plane where the supergradient points.
fn polish(problem: &OnePointProblem, start: C64, radius: f64) -> C64 {
    let mut best = (problem.concave(start).0, start);
    let mut poly: Vec<[f64; 2]> = alloc::vec![
        [-radius, -radius],
        [radius, -radius],
        [radius, radius],
        [-radius, radius],
    ];
    for _ in 0..POLISH_ITERATIONS {
        let Some(c) = centroid(&poly) else { break };
        let u = c64(c[0], c[1]);
        let (val, g) = problem.concave(u);
        if val > best.0 {
            best = (val, u);
        }
        if !(g[0].is_finite() && g[1].is_finite()) || (g[0] == 0.0 && g[1] == 0.0) {
            break;
        }
        // keep {x : g·(x − c) ≥ 0}
        poly = clip(&poly, g, g[0] * c[0] + g[1] * c[1]);
        if poly.len() < 3 {
            break;
        }
    }
    best.1
}

fn centroid(poly: &[[f64; 2]]) -> Option<[f64; 2]> {
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    let o = poly[0];
    for i in 1..poly.len().saturating_sub(1) {
        let (p, q) = (poly[i], poly[i + 1]);
        let cross = (p[0] - o[0]) * (q[1] - o[1]) - (q[0] - o[0]) * (p[1] - o[1]);
        a += cross;
        cx += cross * (o[0] + p[0] + q[0]);
        cy += cross * (o[1] + p[1] + q[1]);
    }
    if !(a > 0.0) || !a.is_finite() {
        return None;
    }
    Some([cx / (3.0 * a), cy / (3.0 * a)])
}

/// Sutherland–Hodgman clip of a convex polygon to `n·x ≥ b`.
fn clip(poly: &[[f64; 2]], n: [f64; 2], b: f64) -> Vec<[f64; 2]> {
    let side = |p: &[f64; 2]| n[0] * p[0] + n[1] * p[1] - b;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let (sp, sq) = (side(&p), side(&q));
        if sp >= 0.0 {
            out.push(p);
        }
        if (sp >= 0.0) != (sq >= 0.0) {
            let t = sp / (sp - sq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// Extends `g` from `Y` to `X` one point at a time (in the order of `X`),
/// keeping every Pick matrix positive semi-definite at `ρ(1 + ε)`.
///
/// Each step computes the one-point region, takes its best cell, polishes
/// that value by maximizing the (concave) smallest Pick eigenvalue and keeps
/// whichever candidate has the larger margin.
pub fn extend(instance: &InterpolationInstance, epsilon: f64, grid_n: usize) -> Result<ExtensionResult> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid("epsilon must be a nonnegative number"));
    }
    let family = &instance.family;
    let g = instance.g.restrict(&instance.y)?;
    let rho = match instance.rho {
        Some(r) => r,
        None => minimal_rho(family, &instance.y, &g, RHO_TOL)?,
    };
    let pre = pick_feasible(family, &instance.y, &g, rho)?;
    if !pre.feasible {
        return Err(Error::PreconditionViolated(format!(
            "the data on Y is not Pick-feasible at rho = {rho} (min eigenvalues {:?})",
            pre.min_eigenvalues
        )));
    }
    let rho_used = rho * (1.0 + epsilon);
    let mut current = g.clone();
    let mut margins = Vec::new();
    let mut order = Vec::new();
    for p in instance.x.difference(&instance.y).iter() {
        let region = one_point_region(family, current.points(), &current, p, rho_used, grid_n)?;
        let problem = OnePointProblem::new(family, current.points(), &current, p, rho_used)?;
        let start = region.best_cell().map(|c| c.center).unwrap_or(c64(0.0, 0.0));
        let mut candidates: Vec<(C64, Evaluation)> = Vec::new();
        if let Some(c) = region.best_cell() {
            candidates.push((c.center, problem.evaluate(c.center)));
        }
        let polished = polish(&problem, start, rho_used.max(f64::MIN_POSITIVE) * 1.01);
        candidates.push((polished, problem.evaluate(polished)));
        let chosen = candidates
            .into_iter()
            .filter(|(_, e)| e.feasible)
            .fold(None, |acc: Option<(C64, Evaluation)>, c| match acc {
                Some(b) if b.1.margin() >= c.1.margin() => Some(b),
                _ => Some(c),
            });
        match chosen {
            Some((u, e)) => {
                current = current.with_value(p.clone(), u)?;
                margins.push(StepMargins {
                    point: String::from(p.label()),
                    value: u,
                    margins: e.margins,
                });
                order.push(String::from(p.label()));
            }
            None => {
                let worst = problem.evaluate(polished).margins;
                return Err(Error::ExtensionFailure {
                    point: String::from(p.label()),
                    partial: alloc::boxed::Box::new(current),
                    worst_margins: worst,
                });
            }
        }
    }
    let f = current.restrict(&instance.x)?;
    let mut certificates = Vec::new();
    for k in family.generators() {
        let report = psd_check(&pick_gram(k, &f, rho_used, &instance.x)?, DEFAULT_PSD_TOL)?;
        if !report.is_psd {
            return Err(Error::NumericalFailure {
                message: "extended Pick matrix failed its final check".into(),
                lower: report.min_eigenvalue,
                upper: report.max_eigenvalue,
            });
        }
        certificates.push(report.min_eigenvalue);
    }
    Ok(ExtensionResult {
        f,
        rho,
        rho_used,
        margins,
        certificates,
        order,
    })
}

/// Classical two-point test: some analytic `f : 𝔻 → 𝔻̄` maps `w_j ↦ v_j`
/// iff the pseudo-hyperbolic distance of the values does not exceed that of
/// the nodes.
pub fn two_point_disc_oracle(w1: C64, w2: C64, v1: C64, v2: C64) -> Result<bool> {
    if !(w1.norm() < 1.0 && w2.norm() < 1.0) {
        return Err(Error::invalid("nodes must lie in the open unit disc"));
    }
    if w1 == w2 {
        return Err(Error::invalid("nodes must be distinct"));
    }
    if v1.norm() > 1.0 || v2.norm() > 1.0 {
        return Ok(false);
    }
    if v1 == v2 {
        return Ok(true);
    }
    let one = c64(1.0, 0.0);
    let dv = ((v1 - v2) / (one - v1 * v2.conj())).norm();
    let dw = ((w1 - w2) / (one - w1 * w2.conj())).norm();
    Ok(dv <= dw)
}
