//! Numerical laboratory for self-similar shock formation in the
//! three-dimensional Euler-Poisson system for electrons.

pub mod error;
pub mod grid;
pub mod initdata;
pub mod config;
pub mod diagnostics;
pub mod jet;
pub mod ledger;
pub mod poisson;
pub mod profile;
pub mod renorm;
pub mod runner;
pub mod solver;

pub use error::{Result, ShockError};
