//! Offline optimum for small instances and a ball-growing online baseline.
//!
//! The optimum is a dynamic program over decision epochs. Between epochs
//! nothing happens: penalties never decrease, so serving a request as early as
//! its arrival epoch allows is never worse.

mod ball;
mod dp;
mod steiner;

pub use ball::{Ball, Threshold};
pub use dp::{offline_opt, replay_witness, EpochStep, Grid, OracleConfig, OracleResult, Tour};
pub use steiner::{steiner_edges, steiner_tour_cost, steiner_weight, tour_order};
