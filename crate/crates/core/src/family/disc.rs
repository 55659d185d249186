//! The disc family `K_n = {I_n ⊗ s}` and its closed-form compressions.

use alloc::format;
use alloc::vec::Vec;

use super::{FamilyKind, KernelFamily};
use crate::kernel::{Kernel, MatrixField, PointSet};
use crate::linalg::{c64, CMatrix, CVector, C64};
use crate::{Error, Result};

/// `{I_n ⊗ s : 1 ≤ n ≤ n_max}`.
pub fn disc_family(n_max: usize) -> KernelFamily {
    assert!(n_max >= 1, "n_max must be positive");
    let generators: Vec<Kernel> = (1..=n_max).map(Kernel::szego).collect();
    KernelFamily::from_parts(FamilyKind::Disc { n_max }, generators)
}

/// The disc automorphism `φ_λ(z) = (z − λ)/(1 − conj(λ) z)`.
pub fn mobius(lambda: C64, z: C64) -> C64 {
    (z - lambda) / (c64(1.0, 0.0) - lambda.conj() * z)
}

/// `(κ, G)` factoring the compression of `I_n ⊗ s` at `(λ, γ)`:
/// `κ = I_n ⊗ s` and `G(z) = φ_λ(z) γγ* + (I − γγ*)`, evaluated on `points`.
pub fn disc_compression(
    lambda: C64,
    gamma: &CVector,
    points: &PointSet,
) -> Result<(Kernel, MatrixField)> {
    if !(lambda.norm() < 1.0) {
        return Err(Error::invalid(format!("lambda = {lambda} is outside the open unit disc")));
    }
    let n = gamma.len();
    if n == 0 {
        return Err(Error::invalid("gamma must be nonempty"));
    }
    if (gamma.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::invalid("gamma must be a unit vector"));
    }
    let proj = gamma * gamma.adjoint();
    let q = CMatrix::identity(n, n) - &proj;
    let g = MatrixField::try_from_fn(points.clone(), |p| {
        let z = p.require_coordinate()?;
        if !(z.norm() < 1.0) {
            return Err(Error::invalid(format!(
                "point {} is outside the open unit disc",
                p.label()
            )));
        }
        let phi = mobius(lambda, z);
        Ok(proj.map(|v| v * phi) + &q)
    })?;
    Ok((Kernel::szego(n), g))
}
