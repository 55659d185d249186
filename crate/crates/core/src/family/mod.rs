//! Agler interpolation families: a finite list of generating kernels whose
//! direct-sum closure is the family, plus a compression rule producing the
//! factorization `k′(x, y) = G(x)·κ(x, y)·G(y)*` for one-point compressions.

pub mod annulus;
pub mod axioms;
pub mod disc;

use alloc::format;
use alloc::vec::Vec;

use crate::hilbert::{isometry_check, rank_one_compress, CompressedKernel};
use crate::kernel::{Kernel, MatrixField, Point, PointSet};
use crate::linalg::{max_abs, CMatrix, CVector};
use crate::{Error, Result};

pub use annulus::{
    annulus_family, annulus_kernel_eval, annulus_tail_bound, default_truncation,
    fit_annulus_compression, AnnulusKernel, CompressionFit, FIT_GRID,
};
pub use axioms::{verify_family_axioms, AxiomReport, Verdict};
pub use disc::{disc_compression, disc_family, mobius};

/// Default θ grid of annulus families.
pub const DEFAULT_THETA_GRID: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum FamilyKind {
    /// `{I_n ⊗ s : 1 ≤ n ≤ n_max}`.
    Disc { n_max: usize },
    /// Scalar annulus kernels `k_θ` on a uniform grid of `[0, 1)`.
    Annulus {
        r: f64,
        theta_grid: usize,
        truncation: Option<usize>,
    },
    /// A user-supplied generator list without a compression rule.
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelFamily {
    kind: FamilyKind,
    generators: Vec<Kernel>,
}

/// Output of a family's compression rule, with its isometry certificate.
#[derive(Debug, Clone)]
pub struct CompressionCertificate {
    pub kprime: CompressedKernel,
    pub kappa: Kernel,
    pub g: MatrixField,
    /// `isometry_check` residual divided by `1 + max |k′|`.
    pub relative_residual: f64,
}

impl KernelFamily {
    pub(crate) fn from_parts(kind: FamilyKind, generators: Vec<Kernel>) -> Self {
        KernelFamily { kind, generators }
    }

    /// An explicit family generated by `generators`.
    pub fn explicit(generators: Vec<Kernel>) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::invalid("a family needs at least one generator"));
        }
        Ok(KernelFamily {
            kind: FamilyKind::Explicit,
            generators,
        })
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    /// Short identifier: `disc`, `annulus` or `explicit`.
    pub fn id(&self) -> &'static str {
        match self.kind {
            FamilyKind::Disc { .. } => "disc",
            FamilyKind::Annulus { .. } => "annulus",
            FamilyKind::Explicit => "explicit",
        }
    }

    pub fn generators(&self) -> &[Kernel] {
        &self.generators
    }

    pub fn has_compression_rule(&self) -> bool {
        !matches!(self.kind, FamilyKind::Explicit)
    }

    /// Checks that every generator can be evaluated at `p`.
    pub fn check_point(&self, p: &Point) -> Result<()> {
        self.generators.iter().try_for_each(|k| k.check_point(p))
    }

    /// Compresses generator `index` at `(z, γ)` over `points` and produces
    /// the family's `(κ, G)`. Returns `Ok(None)` for explicit families.
    pub fn compress(
        &self,
        index: usize,
        points: &PointSet,
        z: &Point,
        gamma: &CVector,
    ) -> Result<Option<CompressionCertificate>> {
        let k = self
            .generators
            .get(index)
            .ok_or_else(|| Error::invalid(format!("no generator {index}")))?;
        let (kprime, kappa, g) = match &self.kind {
            FamilyKind::Explicit => return Ok(None),
            FamilyKind::Disc { .. } => {
                let norm = gamma.norm();
                if !(norm > 0.0) {
                    return Err(Error::invalid("gamma must be nonzero"));
                }
                let unit = gamma.map(|c| c / norm);
                let kprime = rank_one_compress(k, points, z, &unit)?;
                let (kappa, g) = disc_compression(z.require_coordinate()?, &unit, points)?;
                (kprime, kappa, g)
            }
            FamilyKind::Annulus { r, truncation, .. } => {
                let kprime = rank_one_compress(k, points, z, gamma)?;
                let fit = fit_annulus_compression(&kprime.gram, points, *r, FIT_GRID, *truncation)?;
                let kappa = Kernel::annulus(AnnulusKernel::new(*r, fit.theta_best, *truncation)?);
                let g = MatrixField::from_fn(points.clone(), |p| {
                    CMatrix::from_element(1, 1, fit.phi.value(p.label()).expect("fit covers points"))
                });
                (kprime, kappa, g)
            }
        };
        let residual = isometry_check(&kprime, &kappa, &g, points)?;
        let relative_residual = residual / (1.0 + max_abs(&kprime.gram));
        Ok(Some(CompressionCertificate {
            kprime,
            kappa,
            g,
            relative_residual,
        }))
    }
}
