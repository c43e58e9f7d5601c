//! Non-overlapping optimized Schwarz solver for the 2D Helmholtz cavity
//! problem, written as the skeleton equation `(Id + ΠS) q = f` with a
//! non-local exchange operator Π, plus a harness that checks the algebraic
//! identities and the stability estimates of the formulation numerically.

pub mod assembly;
pub mod boundary_conditions;
pub mod cli;
pub mod config;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod impedance;
pub mod linalg;
pub mod problem;
pub mod skeleton;
pub mod solver;
pub mod spectral;
pub mod traces;
pub mod verify;

pub use error::{Error, Result};
pub use problem::{Problem, ProblemSpec};
