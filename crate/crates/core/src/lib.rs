//! Backward quantum Markov chains for the Ising model with competing XY
//! interactions on the binary Cayley tree.
//!
//! The crate builds the per-vertex interaction operators, solves the
//! translation-invariant boundary equations, evaluates the resulting states
//! on local observables (recursively at any depth, and by dense brute force
//! on small balls), and reproduces the analytic quantities describing the
//! ordered phase.

// `!(x < tol)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod boundary;
pub mod error;
pub mod linalg;
pub mod model;
pub mod state;
pub mod tree;
pub mod verify;

pub use boundary::{BoundarySolution, Branch, Classification, PhaseRegion};
pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, SiteOperator, C64};
pub use model::{ModelParams, OperatorCoeffs, Pauli, TransferCoeffs, XYOnlyCoeffs};
pub use state::{EvalContext, Observable, Term};
pub use tree::TreeCoord;
