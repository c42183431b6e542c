//! Two-photon Rydberg excitation of alkali qubits, Rydberg-blockade C_Z gate
//! phases, two-qubit circuit observables and a pulse-level Schrödinger solver.
//!
//! Internally all frequencies are angular (rad/s) and everything else is SI.
//! The [`units`] module holds the conversions used at the reporting boundary.

pub mod angular;
pub mod atomdata;
pub mod circuits;
pub mod dynamics;
pub mod excitation;
pub mod gatephase;
pub mod units;

pub use angular::HalfInt;
pub use atomdata::SpeciesData;
