//! Rotational–hyperfine structure and dynamic polarizabilities of ¹Σ⁺ polar
//! diatomic molecules in static electric and magnetic fields plus an optical
//! trap, and searches for magic trapping conditions.

pub mod angular;
pub mod error;
pub mod hamiltonian;
pub mod magic;
pub mod molecule;
pub mod pendular;
pub mod scenario;
pub mod spectrum;

pub use error::{Error, Result};
