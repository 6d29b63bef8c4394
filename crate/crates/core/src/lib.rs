//! Numerical laboratory for weighted Bergman spaces on the unit disk.

pub mod carleson;
pub mod error;
pub mod estimate;
pub mod geometry;
pub mod kernel;
pub mod lab;
pub mod measures;
pub mod quad;
pub mod toeplitz;
pub mod weights;

pub use error::{Error, Result};
