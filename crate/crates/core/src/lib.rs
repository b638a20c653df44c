//! Pauli-path diagnostics for parameterized quantum circuits.
//!
//! The crate backs the `plateau` binary. It covers exact Pauli algebra, a flat
//! circuit IR with JSON I/O, gadget-layer transforms, discrete-angle
//! Monte Carlo and exact estimators for loss and gradient variance, closed-form
//! lower bounds, a dense simulator used as an independent check, and the
//! transverse-field Ising benchmark harness.

pub mod bench;
pub mod circuit;
pub mod error;
pub mod estimator;
pub mod io;
pub mod mpqc;
pub mod oracle;
pub mod pauli;

pub use error::{Error, Result};
