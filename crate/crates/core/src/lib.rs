//! Unbiased single-query stochastic gradients for combinatorial objectives
//! under the product-Bernoulli relaxation.
//!
//! A black-box objective `Q: {0,1}^d → ℝ` is relaxed to its multilinear
//! extension `v(x) = E_{Y~Bernoulli(x)}[Q(Y)]`. The estimators in
//! [`estimators`] return, from a single evaluation of `Q`, a random value and
//! gradient whose expectations are `v(x)` and `∇v(x)`. [`exact`] provides the
//! brute-force ground truth, [`descent`] the optimization loops and
//! [`harness`] the multi-trial benchmark driver.

pub mod descent;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod exact;
pub mod harness;
pub mod oracles;
pub mod quadrature;
pub mod rng;
pub mod tuples;

pub use descent::{DescentConfig, Direction, Schedule, Trajectory};
pub use distributions::SymmetricDistribution;
pub use error::{Error, Result};
pub use estimators::{EncodedState, EstimatorSample, EstimatorSpec};
pub use exact::{BinaryVector, ProbVector};
pub use harness::{AggregateSeries, ExperimentSpec};
pub use oracles::{Oracle, ProblemSpec};
pub use tuples::GoodTuple;
