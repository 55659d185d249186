//! Pick-type interpolation over Agler families of matrix-valued positive
//! semi-definite kernels on finite point sets.
//!
//! The crate is `no_std` and only needs an allocator. It covers:
//!
//! - [`kernel`]: points, scalar functions, matrix-valued kernels, Gram
//!   assembly, PSD certification, direct sums, restriction, Pick kernels and
//!   scalarization.
//! - [`hilbert`]: the finite reproducing space `H²(k)`, the `Q_x`
//!   idempotents, kernel compressions and factorization certificates.
//! - [`multiplier`]: multiplier norms, family norms and quotient norms.
//! - [`family`]: the family abstraction, the disc (Szegő) and annulus
//!   families, compression fitting and an axiom verifier.
//! - [`solver`]: Pick feasibility, minimal `ρ`, one-point feasible regions
//!   and the finite extension procedure.
//!
//! ```
//! use agler_core::{c64, family::disc_family, kernel::{PointSet, ScalarFunction}};
//! use agler_core::solver::minimal_rho;
//!
//! let y = PointSet::from_coordinates(&[c64(0.0, 0.0), c64(0.5, 0.0)]);
//! let g = ScalarFunction::new(y.clone(), vec![c64(0.0, 0.0), c64(0.9, 0.0)]).unwrap();
//! let rho = minimal_rho(&disc_family(1), &y, &g, 1e-9).unwrap();
//! assert!((rho - 1.8).abs() < 1e-6);
//! ```
#![no_std]

extern crate alloc;

mod error;
pub mod family;
pub mod hilbert;
pub mod kernel;
pub mod linalg;
pub mod multiplier;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::{c64, CMatrix, CVector, C64};
