//! Sampling-based parking path planner for car-like vehicles.
//!
//! The planner grows a rapidly-exploring random tree from the initial pose
//! toward a set of feasible slot entry configurations, then shortens the
//! result with a graph search over Reeds-Shepp shortcuts.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod campaign;
pub mod cli;
pub mod follow;
pub mod geom;
pub mod optimize;
pub mod par;
pub mod rrt;
pub mod scenario;
pub mod slot;
pub mod steer;
pub mod svg;
