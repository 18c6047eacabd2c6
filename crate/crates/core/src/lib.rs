//! Truncated Fock-space simulation of coupled Kerr parametric oscillators.
//!
//! The crate builds multimode cat and Bell-cat states, the nearest-neighbour
//! KPO chain Hamiltonian, time-dependent drive schedules, and propagates
//! states under them with an adaptive Runge-Kutta integrator. The
//! [`analysis`] module extracts fidelities, geometric phases and phase-space
//! maps from the results.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod evolver;
pub mod fockspace;
pub mod hamiltonian;
pub mod par;
pub mod protocol;
pub mod states;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use par::Execution;
