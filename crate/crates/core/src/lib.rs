//! Convex similarity index (CSIM) and the tools built around it.
//!
//! CSIM scores a residual `e = x - y` as `k1 * mean(e)^2 + k2 * var(e)`,
//! which is the quadratic form `e^T W e` with `W = theta1 I + theta2 11^T`.
//! The crate covers the kernel algebra, the choice of `k2 / k1`, sparse
//! recovery of missing samples with an ADMM solver (CSIM-ALM), FISTA and
//! hard-thresholding baselines, CSIM-optimal FIR denoising, quality metrics,
//! and an experiment harness that writes CSV results.

pub mod baselines;
pub mod denoise;
pub mod dictionary;
pub mod error;
pub mod exec;
pub mod harness;
pub mod io;
pub mod kernel;
pub mod metrics;
pub mod params;
pub mod signal;
pub mod solver;

pub use dictionary::{Dictionary, DictionaryKind};
pub use error::{Error, Result};
pub use exec::Execution;
pub use kernel::{CsimKernel, CsimParams};
pub use signal::SamplingMask;
pub use solver::{RecoveryResult, SolverConfig};
