//! Resonant-state (Gamow) expansion of the nonescape probability `P(t)` for a
//! particle initially confined in a finite-range radial potential, with the
//! machinery to measure its long-time behaviour and a direct time-dependent
//! reference solver.
//!
//! Units are ħ = 2m = 1 throughout.

pub mod acceptance;
pub mod asymptote;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod gamow;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod poles;
pub mod specfn;

pub use error::{Error, Result};
