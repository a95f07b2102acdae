//! Exact dynamics of long-range Bose-Hubbard models, discrete Wasserstein-1 distances on
//! lattices, and the transport speed limits that bound how fast bosons can move.

pub mod bounds;
pub mod error;
pub mod evolve;
pub mod fock;
pub mod hamiltonian;
pub mod lattice;
pub mod protocols;
pub mod spectral;
pub mod transport;

pub use error::{Error, Result};
