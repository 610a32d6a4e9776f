//! Forward solvers, Carleman weight diagnostics, stability experiments and
//! regularized source reconstruction for hyperbolic and parabolic inverse
//! source problems on intervals and rectangles.

pub mod analysis;
pub mod carleman;
pub mod error;
pub mod expr;
pub mod field;
pub mod geometry;
pub mod harness;
pub mod reconstruction;
pub mod solvers;
pub mod weights;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
