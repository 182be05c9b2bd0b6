pub mod fit;
pub mod quad;
pub mod stats;

pub use fit::{linear_fit, LineFit};
pub use stats::{Estimate, Moments};
