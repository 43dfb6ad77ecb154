//! Likelihood-ratio, union-intersection and related tests of a multivariate
//! normal mean against closed convex cone alternatives, with the covariance
//! matrix unknown.

pub mod bayesweights;
pub mod cones;
pub mod error;
pub mod matkit;
pub mod mcengine;
pub mod nulldist;
pub mod scalar;
pub mod special;
pub mod teststats;

pub use cones::{Cone, Metric, ProjectionAlgorithm, ProjectionResult};
pub use error::{Error, Result};
pub use matkit::{PartitionIndex, SampleStats, SeedSpec, SymPd};
pub use scalar::Scalar;
pub use teststats::{Components, StatKind, StatisticResult};

/// Concrete `f64` aliases; the experiment harness and CLI work in `f64`.
pub type SymPd64 = SymPd<f64>;
pub type SampleStats64 = SampleStats<f64>;
pub type Metric64 = Metric<f64>;
pub type StatisticResult64 = StatisticResult<f64>;
