//! Exact diagonalization and entanglement-structure census for chains of
//! dipole-coupled NV-center qubits.
//!
//! Pipeline: [`model`] builds the chain and its Hamiltonian, [`spectra`]
//! diagonalizes it and labels excitation manifolds, [`entanglement`] profiles
//! each eigenstate, [`classify`] turns a profile into a structure class and
//! [`ensemble`] aggregates classes over seeded disorder realizations.

pub mod bits;
pub mod classify;
pub mod cli;
pub mod ensemble;
pub mod entanglement;
pub mod error;
pub mod model;
pub mod oracles;
pub mod spectra;

pub use classify::{StructureClass, StructureLabel, Thresholds};
pub use ensemble::{EnsembleConfig, OccurrenceTable};
pub use entanglement::{EntanglementProfile, StateVector};
pub use error::{Error, Result};
pub use model::{ChainRealization, ChainSpec};
pub use spectra::{EigenSystem, HamiltonianMatrix};
