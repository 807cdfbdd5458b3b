//! Projected-ensemble certification toolkit.
//!
//! States are dense and small (at most 16 qubits). Qubit 0 is the most
//! significant bit of a basis index, and every outcome string is printed
//! with qubit 0 first.
//!
//! The crate is organised bottom-up: [`qstate`] holds the linear algebra,
//! [`ensemble`] and [`freeset`] compute localizable quantumness, [`estimator`]
//! and [`protocol`] run the sampling certification, [`models`] generates the
//! state families, [`spectral`] builds fidelity observables, and [`scans`]
//! sweeps model parameters. [`config`] describes experiments for the CLI.

pub mod config;
pub mod ensemble;
pub mod error;
pub mod estimator;
pub mod freeset;
pub mod linalg;
pub mod models;
pub mod protocol;
pub mod qstate;
pub mod rng;
pub mod runner;
pub mod scans;
pub mod spectral;
pub mod suites;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Toolkit version embedded in every output artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Outcomes with Born probability below this are treated as unobservable.
pub const ZERO_PROB: f64 = 1e-14;
