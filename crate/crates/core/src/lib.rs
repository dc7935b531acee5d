//! Simulation of path-dependent stochastic Volterra equations
//!
//! ```text
//! X_t = x0(t) + int_0^t K1(t, s) b(s, X) ds + int_0^t K2(t, s) sigma(s, X) dW_s
//! ```
//!
//! with an interpolated, kernel-integrated Euler scheme: kernel integrals over
//! each step are exact (deterministic weights for the drift, jointly Gaussian
//! stochastic integrals for the noise), while coefficients are frozen at step
//! starts and evaluated on the piecewise-affine lift of past node values.
//!
//! The crate also provides kernel regularity diagnostics and a Monte Carlo
//! strong-rate study based on exact `(n, 2n)` coupling of the Gaussian driver.

// reference constants in tests carry every digit of the oracle value
#![cfg_attr(test, allow(clippy::excessive_precision))]

pub mod coefficients;
pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod kernels;
pub mod linalg;
pub mod quadrature;
pub mod rng;
pub mod scheme;
pub mod stats;

pub use coefficients::{CoefficientModel, DelayAtom, InitialCondition};
pub use diagnostics::{diagnose, KernelDiagnostics};
pub use driver::{DriverMatrices, DriverTag, GaussianSample, SampleScratch};
pub use error::{Error, Result};
pub use experiments::{
    emit_report, fit_loglog, run_rate_study, run_rate_study_with, ConfigFile, LoglogFit,
    RateConfig, RatePoint, RateReport,
};
pub use grid::{NodePath, TimeGrid};
pub use kernels::{KernelKind, KernelSpec, TabulatedKernel};
pub use linalg::{tdt_decompose, SquareMatrix, TdtFactor};
pub use rng::PathStream;
pub use scheme::{classical_euler, simulate_path, SchemePath, SchemeWorkspace};
