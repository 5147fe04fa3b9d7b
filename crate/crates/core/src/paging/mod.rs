//! Paging with delay.
//!
//! On a uniform metric, requests for each page are cut into intervals of unit
//! penalty and replaced by one classical request at the end of each interval.
//! Any classical policy then serves the original requests at most twice as
//! expensively. Weighted pages map to a star with power-of-two edges.

mod delay;
mod policies;
mod reduce;
mod weighted;

pub use delay::{cold_start_instance, paging_with_delay, DelayPagingReport};
pub use policies::{classical_paging, Access, PagingRun, Policy};
pub use reduce::{reduce_stream, PageRequest, ReducedStream};
pub use weighted::weighted_star_instance;
