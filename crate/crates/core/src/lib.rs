//! Desk-scale quantum computation and swarm simulation.
//!
//! Basis convention: qubit 0 is the most significant bit of a basis index.

pub mod born;
pub mod control;
pub mod error;
pub mod fock;
pub mod fourier;
pub mod grid;
pub mod linalg;
pub mod qec;
pub mod rng;
pub mod search;
pub mod selection;
pub mod statevec;
pub mod stats;
pub mod swarm;

pub use error::{Error, Result};
