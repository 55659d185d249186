//! Sampled verification of the four family axioms on a finite point set.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FamilyKind, KernelFamily};
use crate::kernel::{PointSet, ScalarFunction};
use crate::linalg::{c64, CVector, C64};
use crate::multiplier::family_norm;
use crate::Error;

/// Compression residual accepted for the closed-form disc rule.
pub const DISC_COMPRESSION_TOL: f64 = 1e-10;
/// Compression residual accepted for the fitted annulus rule.
pub const ANNULUS_COMPRESSION_TOL: f64 = 1e-4;
/// Family norms of unit-bounded data above this count as unbounded.
pub const MULTIPLIER_BOUND: f64 = 1e12;
/// Diagonal blocks with Frobenius norm at or below this vanish.
pub const DIAGONAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Unverifiable,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Unverifiable => "unverifiable",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AxiomReport {
    /// (i) closure under direct sums, structural.
    pub direct_sums: Verdict,
    pub generator_count: usize,
    /// (ii) one-point compressions factor through the family.
    pub compressions: Verdict,
    pub compression_samples: usize,
    pub compression_max_residual: Option<f64>,
    pub compression_threshold: Option<f64>,
    /// Errors raised by the compression rule, one line per failed sample.
    pub compression_errors: Vec<String>,
    /// (iii) functions on the point set have finite family norm.
    pub multipliers: Verdict,
    pub multiplier_samples: usize,
    pub multiplier_max_norm: f64,
    pub multiplier_bound: f64,
    /// (iv) some generator is nonzero on the diagonal at every point.
    pub nonvanishing: Verdict,
    pub vanishing_points: Vec<String>,
}

impl AxiomReport {
    pub fn all_pass(&self) -> bool {
        [self.direct_sums, self.compressions, self.multipliers, self.nonvanishing]
            .iter()
            .all(|v| *v == Verdict::Pass)
    }
}

fn unit_disc_sample(rng: &mut ChaCha8Rng) -> C64 {
    let rad = rng.gen::<f64>().sqrt();
    let ang = 2.0 * core::f64::consts::PI * rng.gen::<f64>();
    c64(rad * ang.cos(), rad * ang.sin())
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller
    let u1 = 1.0 - rng.gen::<f64>();
    let u2 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * core::f64::consts::PI * u2).cos()
}

fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    loop {
        let v = CVector::from_fn(n, |_, _| c64(gaussian(rng), gaussian(rng)));
        let norm = v.norm();
        if norm > 1e-6 {
            return v.map(|c| c / norm);
        }
    }
}

/// Checks the family axioms on `points` with `samples` random draws per
/// sampled axiom. Failures are verdicts in the report, never errors.
pub fn verify_family_axioms(
    family: &KernelFamily,
    points: &PointSet,
    samples: usize,
    seed: u64,
) -> AxiomReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gens = family.generators();

    let mut vanishing_points = Vec::new();
    for p in points.iter() {
        let nonzero = gens
            .iter()
            .any(|k| k.diagonal_norm(p).map(|v| v > DIAGONAL_TOL).unwrap_or(false));
        if !nonzero {
            vanishing_points.push(String::from(p.label()));
        }
    }

    let threshold = match family.kind() {
        FamilyKind::Disc { .. } => Some(DISC_COMPRESSION_TOL),
        FamilyKind::Annulus { .. } => Some(ANNULUS_COMPRESSION_TOL),
        FamilyKind::Explicit => None,
    };
    let mut compression_samples = 0;
    let mut max_residual: Option<f64> = None;
    let mut compression_errors = Vec::new();
    let compressions = if threshold.is_none() {
        Verdict::Unverifiable
    } else {
        let mut ok = true;
        if !points.is_empty() {
            for s in 0..samples {
                let gi = rng.gen_range(0..gens.len());
                let z = points.get(rng.gen_range(0..points.len())).expect("index in range").clone();
                let gamma = unit_vector(&mut rng, gens[gi].dim());
                match family.compress(gi, points, &z, &gamma) {
                    Ok(Some(cert)) => {
                        compression_samples += 1;
                        let r = cert.relative_residual;
                        max_residual = Some(max_residual.map_or(r, |m: f64| m.max(r)));
                    }
                    Ok(None) => {}
                    // the hypothesis γ*k(z,z)γ ≠ 0 fails: nothing to check
                    Err(Error::DegenerateCompression { .. }) => {}
                    Err(e) => {
                        ok = false;
                        compression_errors.push(format!("sample {s} (generator {gi}, point {}): {e}", z.label()));
                    }
                }
            }
        }
        let within = max_residual.map_or(true, |m| m <= threshold.unwrap_or(0.0));
        if ok && within {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    };

    let mut multiplier_max_norm = 0.0f64;
    let mut multipliers = Verdict::Pass;
    let mut multiplier_samples = 0;
    for _ in 0..samples {
        let f = ScalarFunction::from_fn(points.clone(), |_| unit_disc_sample(&mut rng));
        multiplier_samples += 1;
        match family_norm(family, points, &f) {
            Ok(v) if v.is_finite() && v <= MULTIPLIER_BOUND => {
                multiplier_max_norm = multiplier_max_norm.max(v);
            }
            Ok(v) => {
                multiplier_max_norm = multiplier_max_norm.max(v);
                multipliers = Verdict::Fail;
            }
            Err(_) => {
                multiplier_max_norm = f64::INFINITY;
                multipliers = Verdict::Fail;
            }
        }
    }

    AxiomReport {
        direct_sums: if gens.is_empty() { Verdict::Fail } else { Verdict::Pass },
        generator_count: gens.len(),
        compressions,
        compression_samples,
        compression_max_residual: max_residual,
        compression_threshold: threshold,
        compression_errors,
        multipliers,
        multiplier_samples,
        multiplier_max_norm,
        multiplier_bound: MULTIPLIER_BOUND,
        nonvanishing: if vanishing_points.is_empty() { Verdict::Pass } else { Verdict::Fail },
        vanishing_points,
    }
}
