//! Learning linear models from aggregate (bagged) responses.
//!
//! Samples are grouped into non-overlapping bags of equal size and only each
//! bag's mean response is observed. This crate provides:
//!
//! - [`bagging`]: bag construction, aggregation, and the streaming bag
//!   operators;
//! - [`losses`]: bag-level, instance-level, and interpolating losses for
//!   pluggable scalar losses, with the bound checks relating them;
//! - [`estimator`]: the closed-form interpolating fit and its exact
//!   conditional bias/variance;
//! - [`theory`]: the asymptotic risk in the proportional regime via scalar
//!   fixed points, closed-form endpoints, the SNR crossover threshold, and
//!   the risk-optimal interpolation weight;
//! - [`privacy`]: the clip–aggregate–Laplace release mechanism, its limiting
//!   risk, and the risk-optimal bag size;
//! - [`simulation`]: seed-reproducible experiments comparing theory against
//!   finite-size runs;
//! - [`selfcheck`]: built-in consistency checks.

// Domain guards are written as negated comparisons (`!(x > 0.0)`) so that NaN
// inputs fail them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bagging;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod losses;
pub mod privacy;
pub mod rng;
mod roots;
pub mod selfcheck;
pub mod simulation;
pub mod theory;

pub use error::{Error, Result};
