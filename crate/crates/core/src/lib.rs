//! Constructive eigenpair computation for a third-order boundary value
//! problem with functional boundary conditions, through its perturbed
//! Hammerstein integral equation.
//!
//! The crate checks the applicability hypotheses for a user-defined
//! nonlinearity and boundary functionals, computes positive and negative
//! eigenpairs on the C^2-sphere of a chosen radius, and certifies each
//! computed pair against the original differential equation.

pub mod error;
pub mod grid;
pub mod hypotheses;
pub mod kernel;
pub mod operator;
pub mod problem;
pub mod quadrature;
pub mod report;
pub mod solver;
pub mod verify;

pub use error::{Error, Result, SolverFailure};
