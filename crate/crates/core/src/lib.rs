//! Mobile resonant-beam communication: link model, frame horizon and throughput optimisation.

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod channel;
pub mod error;
pub mod frame_sim;
pub mod gain_medium;
pub mod horizon;
pub mod kinematics;
pub mod link_budget;
pub mod scenario;
pub mod spca;

pub use error::{Error, Result};
