//! Shared numerical utilities: adaptive quadrature, uniform density grids,
//! Kolmogorov–Smirnov style distances and the complementary error function.

pub mod grid;
pub mod ks;
pub mod quad;
pub mod special;

pub use grid::{cross_correlate, DensityGrid, GridSpec};
pub use ks::{ks_distance, ks_statistic, Cdf};
pub use quad::{integrate, integrate_centered, QuadSpec};
pub use special::{erf, erfc};
