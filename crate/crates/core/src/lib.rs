//! Numerical laboratory for effective-medium limits of oscillatory and
//! lattice models.
//!
//! The crate collects a set of small, cross-validating solvers around one
//! theme: what a fine-scale model (oscillatory coefficient, fine lattice,
//! resolved dynamics) looks like after averaging, projection, or
//! coarse-graining, and in particular when the reduced description becomes
//! nonlocal in space or time.
//!
//! Subsystems:
//! - [`classical`]: 1D oscillatory elliptic solutions, harmonic-mean
//!   effective coefficients, cell problems and effective tensors.
//! - [`memory`]: weak limits of oscillatory decay and the induced
//!   memory-kernel evolution equations.
//! - [`symbol`]: homogenized Fourier symbols and a numerical
//!   non-polynomiality certificate.
//! - [`bloch`]: band structures of periodic media, kernel synthesis from
//!   dispersion relations, and wave-model comparisons.
//! - [`schur`]: coarse operators by block elimination and by subspace
//!   correctors, with an exact-equivalence check.
//! - [`lattice`]: coarse-graining of next-nearest-neighbor chains to
//!   nonlocal kernels and their diagnostics.
//! - [`mz`]: exact reduction of linear autonomous systems to Markov term,
//!   memory kernel, and fluctuation forcing.
//! - [`ac`]: scaled nonlocal diffusion operators and joint mesh/horizon
//!   convergence diagrams.
//!
//! Shared substrate: periodic coefficient profiles, grids, discrete and
//! time kernels, atomic measures, and a Volterra integro-differential
//! stepper ([`volterra`]).
//!
//! All types are immutable after construction and all operations are pure;
//! sweep-style operations parallelize over independent work items when the
//! `parallel` feature (default) is enabled.

// Validation guards are written `!(x > 0.0)` so NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ac;
pub mod bloch;
pub mod classical;
pub mod csv;
pub mod dft;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod lattice;
pub mod linalg;
pub mod measure;
pub mod memory;
pub mod mz;
pub mod par;
pub mod profile;
pub mod schur;
pub mod symbol;
pub mod time_kernel;
pub mod volterra;

pub use error::{Error, Result};
pub use grid::UniformGrid;
pub use kernel::DiscreteKernel;
pub use measure::AtomicMeasure;
pub use profile::PeriodicProfile;
pub use time_kernel::TimeKernel;
