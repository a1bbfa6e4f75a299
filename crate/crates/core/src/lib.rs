//! Pulse design and simulation for two-qubit Rydberg-blockade CZ gates driven
//! by off-resonant modulated driving.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs: waveform bases and their Fourier truncation
//! ([`basis`]), the level-system Hamiltonians ([`levels`]), an adaptive
//! Schrödinger propagator ([`propagate`]), CZ gate metrics ([`metrics`]) and
//! a derivative-free waveform optimizer ([`optimize`]).
//!
//! Units follow the usual laboratory convention: waveform values are stored as
//! frequency/2π in MHz, times are in µs, and Hamiltonians are returned in
//! rad/µs.

#![no_std]

extern crate alloc;

pub mod basis;
mod error;
pub mod levels;
pub mod linalg;
pub mod metrics;
pub mod optimize;
pub mod propagate;
pub mod quadrature;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
