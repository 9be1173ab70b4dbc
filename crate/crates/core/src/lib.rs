//! Steady states and photon correlation functions of driven-dissipative
//! nonlinear cavity lattices with geometric frustration.
//!
//! The crate covers the three-cavity cell and the one- and two-dimensional
//! Lieb lattices under partial (or uniform) coherent driving. Four solver
//! routes cross-check each other:
//!
//! - [`steady`]: exact Lindblad steady state (Krylov null-space solve and
//!   time integration) in a truncated Fock space,
//! - [`meanfield`]: the non-equilibrium Gross-Pitaevskii fixed point,
//! - [`weakpump`]: the perturbative pure-state expansion for `F -> 0`,
//! - [`corner`]: corner-space renormalization for extended lattices.
//!
//! Every frequency is expressed in units of the loss rate `gamma`.

pub mod acceptance;
pub mod config;
pub mod corner;
pub mod error;
pub mod fock;
pub mod lattice;
pub mod linalg;
pub mod liouvillian;
pub mod meanfield;
pub mod observables;
pub mod ode;
pub mod sparse;
pub mod spectra;
pub mod steady;
pub mod weakpump;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex vector.
pub type CVector = nalgebra::DVector<C64>;
