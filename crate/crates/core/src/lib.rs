//! Exploration laboratory for overactuated control systems.
//!
//! The crate simulates a planar two-link arm driven either by joint torques
//! (`torquearm`) or by six Hill-type muscles (`arm26`), plus the continuous
//! mountain car. On top of those plants it provides the differential
//! extrinsic plasticity (DEP) controller, baseline noise processes, virtual
//! action-space inflation, a DEP/policy switching scheduler and the metrics
//! used to compare how well each strategy explores.

// `!(x > 0.0)` is how parameter checks reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actions;
pub mod config;
pub mod dep;
pub mod dynamics;
pub mod envs;
pub mod error;
pub mod metrics;
pub mod muscle;
pub mod noise;
pub mod par;
pub mod runner;
pub mod scheduler;

pub use error::{Error, Result};
