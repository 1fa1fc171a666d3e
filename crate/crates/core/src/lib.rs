//! Desk-scale machinery for mixed-path extremization over discrete
//! phase-space lattices: endpoint-pinned path ensembles, action matrices
//! S_jk = S\[p_j, q_k\], signed affinity distributions with the
//! (Σα)² + (Σβ)² normalization, the trial-family variational problems,
//! complex path amplitudes, and analytic propagator references.
//!
//! ```
//! use mixedpath_core::{
//!     build_action_matrix, enumerate_paths, equal_component_pair,
//!     generalized_action, Hamiltonian, LatticeConfig,
//! };
//!
//! // two fan-out steps of a harmonic oscillator, pinned back to the start
//! let h = Hamiltonian::harmonic(1.0, 1.0)?;
//! let cfg = LatticeConfig::new(0.1, 2, vec![-2.0, -1.0, 0.0, 1.0, 2.0], 0.0).pinned(0.0, 5e-3);
//! let ensemble = enumerate_paths(&h, &cfg)?;
//! assert_eq!(ensemble.len(), 3);
//!
//! // the generalized action of the equal-component pair
//! let matrix = build_action_matrix(&h, &ensemble)?;
//! let pair = equal_component_pair(matrix.n(), 1.0)?;
//! let v = generalized_action(&pair, &matrix)?;
//! assert!(v.is_finite());
//! # Ok::<(), mixedpath_core::Error>(())
//! ```

pub mod action;
pub mod amplitude;
pub mod error;
pub mod hamiltonian;
pub mod lattice;
pub mod mixedpath;
pub mod reference;
pub mod tabular;
pub mod variational;

pub use num_complex::Complex64;

pub use action::{build_action_matrix, ActionMatrix};
pub use amplitude::{amplitudes_from_pair, AmplitudeSet};
pub use error::{Error, Result};
pub use hamiltonian::{Hamiltonian, HamiltonianKind};
pub use lattice::{enumerate_paths, LatticeConfig, PathEnsemble, PhasePath};
pub use mixedpath::{equal_component_pair, generalized_action, MixedPathPair};
pub use reference::QuadratureSpec;
pub use variational::ContractedProfiles;
