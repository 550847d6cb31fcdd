//! Joint sub-channel assignment and power allocation for downlink NOMA.
//!
//! Sub-channel assignment is a many-to-many matching game with peer effects,
//! solved by swap-based search ([`usma::usma1_run`]) or simulated annealing
//! ([`usma::usma2_run`]). For a fixed matching, powers come from a convex
//! program in rate space ([`power::solve_gp`]). [`jspa::jspa_run`] alternates
//! the two until the weighted sum-rate converges.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod jspa;
pub mod model;
pub mod power;
pub mod swap;
pub mod usma;

pub use error::{Error, Result};
pub use model::{
    decoding_order, subchannel_rate, total_utility, user_interference, user_rate, validate,
    Allocation, ChannelRealization, Grid, Matching, PhasePowerRule, PowerAllocation, SystemConfig,
    UserWeights, Violation,
};
