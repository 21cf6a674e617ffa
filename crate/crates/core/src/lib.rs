//! Coherent exciton trapping on topologically disordered quantum networks.
//!
//! The crate builds random (or regular chain) node geometries, the long-range
//! trap-free coupling matrix `H0`, and the non-Hermitian trapped Hamiltonian
//! `H = H0 - iΓ`. It diagonalizes both, evaluates survival probabilities of an
//! exciton against absorption at the trap, averages them over disorder
//! realizations, and post-processes the results (power-law exponents, size
//! scaling, decay-rate densities).
//!
//! Everything here is pure computation and is `no_std` with `alloc`. File
//! formats, the command line and the parallel ensemble runner live in the
//! `exciton` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod chain;
pub mod dynamics;
pub mod ensemble;
mod error;
pub mod hamiltonian;
pub mod network;
pub mod rng;
pub mod spectra;

pub use error::{Error, Result};

/// Complex double used throughout (shared with `faer`).
pub type C64 = num_complex::Complex<f64>;
