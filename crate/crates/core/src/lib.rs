//! Numerical toolkit for quantum steering in star networks.
//!
//! A star network couples one trusted central observer (Bob) to `n`
//! untrusted edge observers (the Alices) through `n` independent two-qubit
//! sources. This crate builds the network states, measurement assemblages
//! and correlation tables, and certifies `n -> 1` steering through three
//! sufficient criteria (a nonlinear steering inequality, a linear steering
//! inequality with a fixed joint measurement for Bob, and a Bell
//! inequality), each cross-checked against brute-force finite classical
//! models.

pub mod assemblage;
pub mod classical;
pub mod criteria;
pub mod error;
pub mod linalg;
pub mod qubit;
pub mod sampling;
pub mod states;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, SubsystemLayout};
pub use states::DensityMatrix;
