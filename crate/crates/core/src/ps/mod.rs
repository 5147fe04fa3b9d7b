//! Preemptive service for a single server on an HST.
//!
//! Each edge carries a counter fed by waiting requests. A serving phase starts
//! when some request's major edge (the longest edge on its way to the server)
//! saturates; the server then serves the critical requests behind that edge
//! and, through recursive time forwarding, requests that would become
//! critical soon.

mod accrual;
mod algorithm;
mod plan;
mod subset;

pub use accrual::{major_index, path_to_server, server_below, Advance, Counter, Elem, Flow, Part, Track};
pub use algorithm::Ps;
pub(crate) use algorithm::{advance_waiting, saturated_major, waiting_flows};
pub use plan::{build_plan, check_provenance, key_edges, time_forward, Forwarded, Plan, Scope, ServiceEdge};
pub use subset::subset_exact;
