//! Domains, element partitions and collocation samplers.

pub mod domain;
pub mod io;
pub mod partition;
pub mod rng;
pub mod sampling;

pub use domain::{Domain, Region};
pub use io::{fmt_real, read_points_csv, write_points_csv};
pub use partition::{partition_uniform, Element, Partition};
pub use rng::{rng_for, stream_id, Rng};
pub use sampling::{
    resolve_allocation, sample_eas, sample_gus, sample_lhs, sample_rad, Allocation, PointBatch,
    RadConfig,
};
