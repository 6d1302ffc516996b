//! Floquet-Bloch band structures of 3D periodic magnetic Schrödinger
//! operators with variable metric, quantized magnetic flux and reflection
//! symmetry, together with the Dirichlet-Neumann pencil reduction of the
//! slab boundary-value problem and its cross-validation against directly
//! computed bands.
//!
//! Modules follow the pipeline: [`problem`] defines and validates the
//! coefficients, [`grid`] discretizes the twisted cell, [`fiber`] assembles
//! the discrete forms, [`bands`] computes band functions, and [`pencil`]
//! carries the boundary reduction and the Floquet multipliers.

pub mod bands;
pub mod eigen;
pub mod error;
pub mod fiber;
pub mod grid;
pub mod linalg;
pub mod pencil;
pub mod problem;
pub mod sparse;

pub use error::{CoreError, Result};
