//! Minimum relative entropy estimation of quantum states from linear
//! measurement data.
//!
//! The pipeline orthonormalizes the constraints ([`constraints`]), decides
//! feasibility through a minimum-eigenvalue problem solved with a log-det
//! barrier ([`feasibility`]), relaxes infeasible data, restricts singular
//! problems to their common support ([`reduction`]) and finally solves the
//! Lagrange dual of the entropy problem with Newton's method ([`entropy`]).
//! [`io`] holds the JSON formats, a measurement simulator and the `qre`
//! command-line driver.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constraints;
pub mod entropy;
pub mod error;
pub mod feasibility;
pub mod hermitian;
pub mod io;
pub mod reduction;

pub use error::{Error, Result};
