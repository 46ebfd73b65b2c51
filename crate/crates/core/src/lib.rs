//! Information geometry of Gaussian statistical manifolds with
//! macro-correlations between the mean and the standard deviation.
//!
//! The manifold has `l` independent blocks, each with coordinates `(μ, σ)`
//! and Fisher metric `(1/σ²)[[1, r], [r, 2]]`. The crate provides the metric
//! and its connection and curvature, the eigen-charts that decouple each
//! block, geodesic integration and closed-form geodesics, and the
//! information geometric complexity and entropy of the geodesic flow.

pub mod complexity;
pub mod diagonal;
pub mod error;
pub mod geodesic;
pub mod geometry;
pub mod manifold;
pub mod mat2;
pub mod ode;
pub mod quadrature;

pub use error::{Error, Result};
pub use manifold::{Chart, DensityMode, Macrostate, ModelParams};
