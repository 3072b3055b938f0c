//! Planning toolkit that turns a transmission expansion plan into a hybrid
//! AC/HVDC grid whose AC branches form a spanning tree.

pub mod canonical;
pub mod cost;
pub mod dcopf;
pub mod error;
pub mod grid;
pub mod harness;
pub mod lp;
pub mod pipeline;
pub mod planner;
pub mod preprocess;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision LP used by the power-flow model.
pub type LinearProgram = lp::LinearProgram<f64>;
/// Exact rational LP, for cross-checking small instances.
pub type ExactLinearProgram = lp::LinearProgram<num_rational::BigRational>;
