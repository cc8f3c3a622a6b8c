//! Cooperative optimization in three regimes.
//!
//! * [`discrete`]: min-sum lower-bound tables with optimality certificates.
//! * [`soft`]: exponentiated tables, max-product and sum-product forms.
//! * [`continuous`]: 1-D grid fields whose stationary state solves the
//!   time-independent Schrödinger equation.
//!
//! [`oracle`] holds the brute-force and eigensolver references the solvers
//! are checked against; [`cli`] wires everything to the `coopt` binary.

pub mod cli;
pub mod continuous;
pub mod discrete;
pub mod energy;
pub mod error;
pub mod gen;
pub mod oracle;
pub mod par;
pub mod problem;
pub mod report;
pub mod soft;

pub use error::{Error, Result};
