//! Monte Carlo laboratory for stochastic control barrier functions.
//!
//! * [`sde`]: control-affine SDEs, Euler–Maruyama paths and exit detection.
//! * [`barrier`]: barrier functions, barrier conditions and min-norm controllers.
//! * [`feller`]: scale/speed functions and Feller boundary classification.
//! * [`montecarlo`]: exit probabilities, stopping times, local time and the
//!   upper-bound process of a reciprocal barrier.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod error;
pub mod feller;
pub mod montecarlo;
pub mod rng;
pub mod sde;

pub use error::{LabError, Result};
