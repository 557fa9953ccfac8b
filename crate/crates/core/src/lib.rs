//! Bilevel optimization via value-function barrier approximation, with
//! gradient-based baselines, numeric verification and trace I/O.

pub mod baselines;
pub mod bench;
pub mod bvfim;
pub mod counters;
pub mod error;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod problems;
pub mod scalar;
pub mod trace;
pub mod verify;

pub use counters::OracleCounters;
pub use error::{Error, Result};
pub use problems::{BoxConstraint, KnownOptimum, Problem};
pub use scalar::Scalar;

pub type ToySin64 = problems::ToySin<f64>;
pub type ToySin32 = problems::ToySin<f32>;
pub type Quadratic64 = problems::Quadratic<f64>;
pub type Quadratic32 = problems::Quadratic<f32>;
pub type HyperClean64 = problems::HyperClean<f64>;
pub type HyperClean32 = problems::HyperClean<f32>;
