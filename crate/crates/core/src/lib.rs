//! Matrix-free finite elements with runtime-composable Krylov solvers.
//!
//! Operators carry the PDE-level description they were built from, so
//! preconditioners can reach past the algebra: assemble a block, extract
//! the pressure space, build a low-order coarse problem. The solver tree
//! itself is assembled at runtime from a prefixed options database.

pub mod drivers;
pub mod error;
pub mod fem;
pub mod forms;
pub mod krylov;
pub mod linalg;
pub mod mesh;
pub mod nonlinear;
pub mod operators;
pub mod options;
pub mod precond;

pub use error::{Error, Result};
