//! Physics-informed neural networks over element-partitioned domains.
//!
//! The crate is generic over the floating-point type through [`Scalar`];
//! the `*64` aliases below fix it to `f64`, which is what the training and
//! verification pipelines use.

pub mod diff;
pub mod error;
pub mod geometry;
pub mod losses;
pub mod models;
pub mod optim;
pub mod pde;
pub mod scalar;
pub mod theory;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type DiffScalar64 = diff::DiffScalar<f64>;
pub type JetTensor64 = diff::JetTensor<f64>;
pub type ParamVector64 = diff::ParamVector<f64>;
pub type Tape64<'p> = diff::Tape<'p, f64>;
