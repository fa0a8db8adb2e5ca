//! Pair-excitation theory of a trapped Bose gas, realized numerically.
//!
//! The crate discretizes a one-dimensional harmonic trap in a Hermite basis,
//! solves the Hartree equation for the condensate, builds the quadratic
//! model kernels, solves the operator Riccati equation for the pair kernel k,
//! computes the excitation spectrum, and checks the many-body statements by
//! exact diagonalization on small Fock sectors.

pub mod condensate;
pub mod csym;
pub mod error;
pub mod excitations;
pub mod focksector;
pub mod linalg;
pub mod model;
pub mod riccati;
pub mod spectral;

pub use error::{Error, Result};
