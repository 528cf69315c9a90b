//! Simulation toolkit for fast preparation of tree-type three-dimensional
//! entanglement among three atoms held in fiber-linked cavities.
//!
//! Two shortcut schemes are modeled: pulses engineered from a
//! Lewis-Riesenfeld invariant (LRI) of the Zeno-effective three-level system,
//! and transitionless quantum driving (TQD) realized through detuned
//! transitions. Both can be propagated under the full 20-state Hamiltonian,
//! the effective models, or a Lindblad master equation with atomic decay and
//! photon leakage.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod hamiltonians;
pub mod lri;
pub mod output;
pub mod pulses;
pub mod statespace;
pub mod svg;

pub use error::{Error, Result};
pub use hamiltonians::CouplingParams;
pub use pulses::{Method, PulseSchedule};
pub use statespace::{DensityMatrix, OrderedBasis, StateVector};
