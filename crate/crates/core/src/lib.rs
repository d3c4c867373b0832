//! Work statistics for sudden quantum quenches in which the final (and
//! optionally the initial) Hamiltonian is drawn from a Gaussian unitary
//! ensemble.
//!
//! * [`rmt`] and [`eigen`]: sampling GUE matrices and diagonalizing them.
//! * [`work`]: two-point-measurement work distributions for a fixed pair of
//!   Hamiltonians and the Jarzynski identity.
//! * [`ensemble`]: ensemble-averaged densities of states and work densities.
//! * [`twolevel`]: closed forms and quadratures for two-level systems.
//! * [`montecarlo`]: sampling estimators with reproducible parallel streams.
//! * [`verify`]: the acceptance checks, shared by the test suite and the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigen;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod montecarlo;
pub mod numerics;
pub mod parallel;
pub mod rmt;
pub mod twolevel;
pub mod verify;
pub mod work;

pub use eigen::{eigendecompose, eigenvalues, ComplexMatrix, Spectrum};
pub use error::{Error, Result};
pub use numerics::{DensityGrid, GridSpec, QuadSpec};
pub use parallel::{Execution, SamplingPlan};
pub use rmt::{GueParams, HermitianMatrix, LevelSampler};
