//! Requests, delay penalties, instances and the instance file format.

mod format;
mod model;
mod penalty;

pub use format::{instance_to_json, parse_instance, parse_quantity, serialize_instance};
pub use model::{ClairvoyanceMode, Instance, Origin, Request, Space, TreeInstance};
pub use penalty::PenaltyFn;
