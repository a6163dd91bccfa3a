//! Simulation of the thermally extended biexciton-exciton decay cascade in a
//! semiconductor quantum dot.
//!
//! The crate is organised bottom-up:
//!
//! - [`levels`]: the seven-level scheme, physical parameters and the
//!   temperature-dependent rate catalog (radiative and phonon-assisted).
//! - [`kinetics`]: classical rate equations, emission traces, instrument
//!   response convolution and lifetime fits.
//! - [`qdynamics`]: Lindblad dynamics on the seven-level Hilbert space and
//!   polarization-resolved two-time correlators via the quantum regression
//!   theorem.
//! - [`pairstate`]: time-bin filtered two-photon polarization density
//!   matrices, concurrence and Bell-state fidelity.
//! - [`tomography`]: synthetic coincidence counts and maximum-likelihood
//!   state reconstruction.
//!
//! Units are fixed throughout: energies in meV (level scheme) or µeV
//! (Hamiltonian), times in ns, rates in ns⁻¹, temperatures in K.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod kinetics;
pub mod levels;
pub mod linalg;
pub mod ode;
pub mod pairstate;
pub mod qdynamics;
pub mod tomography;

/// Boltzmann constant in meV/K.
pub const K_B: f64 = 0.0861733;

/// Reduced Planck constant in µeV·ns.
pub const HBAR: f64 = 0.6582119;

/// Laser repetition period at 80 MHz, in ns.
pub const REPETITION_PERIOD: f64 = 12.5;

pub type C64 = num_complex::Complex64;
