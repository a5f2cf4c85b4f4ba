//! Transient electron pumping in a donor–bridge–acceptor molecular junction.
//!
//! The molecule is a set of spinless orbitals on three sites (donor, bridge,
//! acceptor), optionally with one bridge vibration. It is coupled to two
//! tight-binding leads, and the reduced density matrix is propagated with a
//! time-dependent second-order (Redfield) equation. [`oracle`] solves the
//! purely electronic junction exactly for comparison.

pub mod bath;
pub mod config;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod output;
pub mod quadrature;
pub mod redfield;
pub mod sweep;

pub use error::{Error, Result};

/// Complex scalar used for every matrix in the crate.
pub type C64 = num_complex::Complex<f64>;
