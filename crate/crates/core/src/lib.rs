//! A laboratory for random quantum satisfiability (k-QSAT).
//!
//! Generates random k-uniform Erdős hypergraphs, attaches Haar-random (or
//! classical diagonal) rank-r projector frames, computes exact satisfying
//! manifold dimensions and ground-state energies at desk scale, constructs
//! zero-energy product states by transfer matrices, and drives Monte Carlo
//! sweeps over the clause-density axis.

pub mod bounds;
pub mod ensemble;
pub mod error;
pub mod hypergraph;
pub mod instance;
pub mod rng;
pub mod solver;
pub mod transfer;

pub use error::{Error, Result};

/// Complex amplitude type used throughout.
pub type C64 = num_complex::Complex64;
