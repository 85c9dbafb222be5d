//! Exact and Monte Carlo computation for the weaver distribution W(n, p),
//! the law of the conditional sample mean under exponential sampling from
//! two populations, and for its limit, the p-model binomial measure.
//!
//! - [`exact`]: masses, realizations, the geometric triangle, dyadic
//!   distribution-function values and jump heights, all as exact rationals.
//! - [`sampler`]: exponential sampling with pluggable parent populations and
//!   reproducible Monte Carlo ensembles.
//! - [`analysis`]: closed-form moments, the weaving/merging variance split,
//!   and roughness diagnostics of the limit.
//! - [`cli`]: the `weaver` command-line tool and its CSV/JSON tables.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod exact;
pub mod rational;
pub mod sampler;

pub use error::{Result, WeaverError};
pub use exact::{DyadicPoint, SelectionPath, WeaverDist, WeaverParams};
pub use rational::Rational;
