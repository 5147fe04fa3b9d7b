//! Online service with delay on hierarchically separated trees.
//!
//! The crate simulates the preemptive service algorithm for a single server,
//! its `k`-server generalization, paging-with-delay reductions, adversarial
//! instance families and exact offline optima for small instances. All
//! computations are generic over [`Scalar`]; [`Rational`] gives exact results.

pub mod adversary;
pub mod error;
pub mod instance;
pub mod kosd;
pub mod metric_hst;
pub mod oracle;
pub mod paging;
pub mod ps;
pub mod scalar;
pub mod sim;

pub use error::{OsdError, Result};
pub use scalar::{Extended, Scalar};

/// Exact arbitrary-precision rational numbers.
pub type Rational = num_rational::BigRational;

pub type ExactInstance = instance::Instance<Rational>;
pub type ExactTreeInstance = instance::TreeInstance<Rational>;

pub type ApproxInstance = instance::Instance<f64>;

pub type ExactReport = sim::CostReport<Rational>;
pub type ApproxReport = sim::CostReport<f64>;
