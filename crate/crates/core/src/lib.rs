//! Dark-state dynamics of a resonantly driven Λ-type three-level system
//! coupled to two zero-temperature Ornstein-Uhlenbeck baths, including the
//! counter-rotating part of the system-bath coupling.
//!
//! The primary propagation path is a deterministic hierarchy of 9-component
//! Bloch vectors truncated at tier `N` ([`hierarchy`], [`integrator`]). Two
//! independent routes cross-check it: a single-tier Markov closure valid at
//! large bath bandwidth and an explicit Schrödinger propagation of system and
//! discretized baths in a truncated Fock space ([`oracle`]). All of them are
//! exposed through the [`registry`] so a driver can select one by name.

pub mod analysis;
pub mod error;
pub mod generator;
pub mod hierarchy;
pub mod integrator;
pub mod model;
pub mod oracle;
pub mod registry;

pub use error::{Error, Result};
pub use generator::{coupling_matrices, markov_limit_generator, system_matrix, Generator9};
pub use hierarchy::{init_state, rhs, top_density, HierarchyLayout, HierarchyState};
pub use integrator::{propagate, propagate_markov, FidelityTrace, RunConfig, TraceRow};
pub use model::{
    bloch_to_density, bright_state, dark_state, db_basis_coefficients, density_to_bloch, fidelity,
    BathParams, Baths, BlochVector, Component, DensityMatrix, PulseTrain, SystemParams, C64,
};
pub use registry::{MethodOptions, MethodOutput, Propagator, Registry};
