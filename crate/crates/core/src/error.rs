use thiserror::Error;

pub type Result<T, E = OsdError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OsdError {
    #[error("metric has no points")]
    EmptyMetric,
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error("unknown edge {0}")]
    UnknownEdge(usize),
    #[error("unknown server {0}")]
    UnknownServer(usize),
    #[error("not a tree: {0}")]
    NonTree(String),
    #[error("edge {edge}: length ratio to parent edge {parent} is below 2")]
    RatioViolation { edge: usize, parent: usize },
    #[error("edge {0}: length is not representable as 2^i with i >= 0")]
    InvalidLength(usize),
    #[error("negative delay")]
    NegativeDelay,
    #[error("invalid penalty function: {0}")]
    InvalidPenalty(String),
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("algorithm contract violation: {0}")]
    AlgorithmContract(String),
    #[error("clairvoyance violation: request {request} queried at delay {delay} beyond current delay {current}")]
    ClairvoyanceViolation { request: usize, delay: String, current: String },
    #[error("time {requested} is before the current clock {clock}")]
    PastTime { requested: String, clock: String },
    #[error("edge {0} is not saturated")]
    NotSaturated(usize),
    #[error("subset target {target} exceeds total {total}")]
    InsufficientSum { target: String, total: String },
    #[error("value {0} is not a power of two below the target")]
    NonPowerOfTwo(String),
    #[error("instance too large for the exact oracle: {0}")]
    TooLarge(String),
    #[error("cache capacity must be positive")]
    CapacityZero,
    #[error("instance space is not a uniform page set")]
    NonUniformMetric,
    #[error("page {0} has non-positive weight")]
    ZeroWeight(usize),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("no servers")]
    NoServers,
    #[error("the adaptive adversary requires a nonclairvoyant algorithm")]
    ClairvoyantAlgorithm,
    #[error("plan does not match state: {0}")]
    PlanStateMismatch(String),
    #[error("internal consistency failure: {0}")]
    Internal(String),
}
