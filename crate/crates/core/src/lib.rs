//! Spectral and scattering analysis of block Laurent and Toeplitz operators
//! on lattice windows, with decaying perturbations.
//!
//! The crate is organised around the symbol `h(p) = sum_j coeff(j) e^{ijp}`:
//! band structure and thresholds ([`symbol`]), finite lattice sections
//! ([`lattice`]), certified eigenvalue extraction ([`eig`]), commutator
//! estimates ([`mourre`]), weighted resolvent bounds ([`lap`]), decay
//! classification of perturbations ([`perturb`]) and time-dependent
//! scattering ([`scatter`]).

pub mod eig;
pub mod error;
pub mod formats;
pub mod lap;
pub mod lattice;
pub mod linalg;
pub mod model;
pub mod mourre;
pub mod perturb;
pub mod scatter;
pub mod special;
pub mod symbol;

pub use error::{Error, Result};
pub use model::LatticeModel;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Default seed for every randomized start vector.
pub const DEFAULT_SEED: u64 = 0x5EED;
