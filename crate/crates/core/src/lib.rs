//! Markov entropy decomposition (MED) relaxation of the free energy of local
//! quantum spin Hamiltonians, an exact-diagonalization oracle to check it
//! against, and rotated Petz recovery maps for rounding local marginals back to
//! a global state.

pub mod error;
pub mod lattice;
pub mod med;
pub mod models;
pub mod operator;
pub mod oracle;
pub mod petz;
pub mod rounding;
pub mod runner;

pub use error::{Error, Result};
