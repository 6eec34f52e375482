//! Exact-arithmetic core for synthesizing approximately optimal Bayesian
//! truthful mechanisms for scheduling objectives from bi-criterion
//! approximation algorithms.
//!
//! The crate is organized bottom-up:
//!
//! - [`num`]: big-rational scalars, extended values with explicit `±inf`
//!   sentinels, and exact sampling helpers.
//! - [`sched`]: scheduling instances and the makespan / fairness / cost
//!   evaluators.
//! - [`lp`]: an exact rational simplex solver and maximum-weight bipartite
//!   matching, the kernel behind every linear program in the crate.
//! - [`geometry`]: the ellipsoid method, the weird separation oracle built
//!   from an `(alpha, beta, S)`-approximation algorithm, optimization through
//!   that oracle, and Caratheodory decomposition.
//! - [`makespan`]: the `(1, 1/2)`-approximation for makespan with costs.
//! - [`fairness`]: the two fairness-with-costs approximations (configuration
//!   LP pipeline and the matching-based algorithm).
//! - [`bmed`]: the mechanism-design layer reducing truthful optimization to
//!   the algorithms above.
//! - [`oracle`]: brute-force certifiers used by tests and verification.
//!
//! All algorithmic state is exact rational; floating point never enters an
//! objective evaluation or a certificate check.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bmed;
pub mod error;
pub mod fairness;
pub mod geometry;
pub mod lp;
pub mod makespan;
pub mod num;
pub mod oracle;
pub mod sched;

pub use error::{Error, Result};
pub use num::{Ext, Rat};
