//! Nonlocal perimeter energies of polygonal and fractal domains, Minkowski
//! dimension estimates, and number-variance experiments for the Ginibre
//! ensemble.

pub mod dimension;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod ginibre;
pub mod harness;
pub mod kernel;
pub mod numerics;
pub mod rng;

pub use error::{Error, Result};
pub use geometry::{Point2, Polygon, ShapeSpec, SnowflakeSpec};
pub use kernel::{Family, Part, RadialKernel};
pub use numerics::{Estimate, LineFit};
