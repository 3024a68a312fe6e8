//! Solver-agnostic conic programs.
//!
//! A [`ConicProgram`] holds named variable blocks (scalars, vectors and
//! symmetric matrices), a linear objective and constraints over the
//! nonnegative orthant, second-order cones, dual-norm balls and the PSD
//! cone. Programs are lowered to a [`StandardForm`] and handed to a
//! [`ConicBackend`]; [`validate`] re-checks any returned point without
//! trusting the backend.
//!
//! Symmetric matrix variables use the column-major upper-triangle svec
//! layout with off-diagonal entries scaled by `sqrt(2)`, so the Euclidean
//! inner product of two svecs equals the Frobenius inner product of the
//! matrices.

mod backend;
mod clarabel_backend;
mod error;
pub mod expr;
mod program;
mod reference;
mod solution;
mod standard;
mod validate;

pub use backend::{solve, ConicBackend, RawSolution, SolveOptions};
pub use clarabel_backend::ClarabelBackend;
pub use error::{ConicError, Result};
pub use expr::{LinExpr, ScalarVar, SymMatrixVar, VectorVar};
pub use program::{Block, BlockKind, ConicProgram, Constraint, ConstraintId, ConstraintKind, MatrixExpr, NormOrder};
pub use reference::DenseReferenceBackend;
pub use solution::{BlockValue, ConicSolution, Residuals, SolveStatus};
pub use standard::{Cone, StandardForm};
pub use validate::{validate, validate_point, ClassSummary, ConstraintCheck, ValidationReport};
