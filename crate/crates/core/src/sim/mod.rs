//! Event-driven simulation of online algorithms on an HST.
//!
//! The engine owns the clock, the request list and the server positions. An
//! [`OnlineAlgorithm`] sees them through a [`Ctx`], which enforces the
//! clairvoyance mode, and answers with [`ServiceAction`]s that the engine
//! validates and charges.

mod engine;
mod position;
mod report;

pub use engine::{compare, run, Comparison, Horizon, Simulation};
pub use position::{distance, next_junction, step_toward, walk, Position, Walk};
pub use report::{CostReport, PhaseRecord, Trace, TraceEvent};

use crate::error::{OsdError, Result};
use crate::instance::{ClairvoyanceMode, PenaltyFn, Request};
use crate::metric_hst::{EdgeId, Hst, NodeId};
use crate::scalar::{Extended, Scalar};

/// One server's movement through a sequence of positions, each reached from
/// the previous one along the tree path.
#[derive(Clone, Debug, PartialEq)]
pub struct ServerRoute<T> {
    pub server: usize,
    pub waypoints: Vec<Position<T>>,
}

/// Labels attached to a serving phase for reporting.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhaseInfo {
    pub trigger_server: Option<usize>,
    pub major: Option<EdgeId>,
    pub key_edges: Vec<EdgeId>,
    pub service_edges: Vec<EdgeId>,
    pub resets: Vec<EdgeId>,
}

/// An instantaneous serving phase. Routes run one after another; requests in
/// `served` must sit at a node some route passes (or a server already occupies).
#[derive(Clone, Debug, PartialEq)]
pub struct ServiceAction<T> {
    pub routes: Vec<ServerRoute<T>>,
    pub served: Vec<usize>,
    pub info: PhaseInfo,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    /// Failed invariants that the algorithm is supposed to maintain.
    pub violations: Vec<String>,
    /// Observations that are not failures (diagnostic bounds, fallbacks).
    pub notes: Vec<String>,
}

pub trait OnlineAlgorithm<T: Scalar> {
    fn name(&self) -> String;

    fn start(&mut self, ctx: &Ctx<'_, T>) -> Result<()>;

    fn on_arrival(&mut self, ctx: &Ctx<'_, T>, request: usize) -> Result<()>;

    /// Earliest time at or after `ctx.now()` when the algorithm wants to act,
    /// assuming no further arrivals.
    fn next_decision_time(&mut self, ctx: &Ctx<'_, T>) -> Result<Option<T>>;

    fn on_decision(&mut self, ctx: &Ctx<'_, T>) -> Result<Option<ServiceAction<T>>>;

    fn diagnostics(&self) -> Diagnostics {
        Diagnostics::default()
    }
}

impl<T: Scalar, A: OnlineAlgorithm<T> + ?Sized> OnlineAlgorithm<T> for Box<A> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn start(&mut self, ctx: &Ctx<'_, T>) -> Result<()> {
        (**self).start(ctx)
    }
    fn on_arrival(&mut self, ctx: &Ctx<'_, T>, request: usize) -> Result<()> {
        (**self).on_arrival(ctx, request)
    }
    fn next_decision_time(&mut self, ctx: &Ctx<'_, T>) -> Result<Option<T>> {
        (**self).next_decision_time(ctx)
    }
    fn on_decision(&mut self, ctx: &Ctx<'_, T>) -> Result<Option<ServiceAction<T>>> {
        (**self).on_decision(ctx)
    }
    fn diagnostics(&self) -> Diagnostics {
        (**self).diagnostics()
    }
}

/// Penalty rate of one request as a function of absolute time, valid from
/// `from` onward: `pieces[j] = (start, slope)`, then `+inf` at `deadline`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateSchedule<T> {
    pub pieces: Vec<(T, T)>,
    pub deadline: Option<T>,
}

impl<T: Scalar> RateSchedule<T> {
    pub fn slope_at(&self, t: &T) -> T {
        self.pieces.iter().rev().find(|(s, _)| s <= t).map(|(_, r)| r.clone()).unwrap_or_else(T::zero)
    }

    /// First piece start or deadline strictly after `t`.
    pub fn next_change_after(&self, t: &T) -> Option<T> {
        let piece = self.pieces.iter().map(|(s, _)| s).find(|s| *s > t).cloned();
        let dl = self.deadline.clone().filter(|d| d > t);
        match (piece, dl) {
            (Some(a), Some(b)) => Some(T::min_of(a, b)),
            (a, b) => a.or(b),
        }
    }

    /// Accrued weight over `[a, b]`, ignoring the deadline.
    pub fn integral(&self, a: &T, b: &T) -> T {
        let mut total = T::zero();
        let mut t = a.clone();
        while t < *b {
            let next = self.pieces.iter().map(|(s, _)| s).find(|s| *s > &t).cloned();
            let end = match next {
                Some(n) if n < *b => n,
                _ => b.clone(),
            };
            total = total + self.slope_at(&t) * (end.clone() - t.clone());
            t = end;
        }
        total
    }
}

/// Read-only view of the simulation handed to algorithms.
pub struct Ctx<'a, T> {
    pub(crate) now: &'a T,
    pub(crate) mode: ClairvoyanceMode,
    pub(crate) hst: &'a Hst,
    pub(crate) k: usize,
    pub(crate) requests: &'a [Request<T>],
    pub(crate) arrived: usize,
    pub(crate) served: &'a [Option<T>],
    pub(crate) positions: &'a [Position<T>],
}

impl<'a, T: Scalar> Ctx<'a, T> {
    pub fn now(&self) -> &T {
        self.now
    }

    pub fn mode(&self) -> ClairvoyanceMode {
        self.mode
    }

    pub fn hst(&self) -> &Hst {
        self.hst
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn positions(&self) -> &[Position<T>] {
        self.positions
    }

    /// Requests `0..arrived()` have arrived.
    pub fn arrived(&self) -> usize {
        self.arrived
    }

    fn request(&self, rid: usize) -> Result<&Request<T>> {
        if rid >= self.arrived {
            return Err(OsdError::AlgorithmContract(format!("request {rid} has not arrived")));
        }
        Ok(&self.requests[rid])
    }

    pub fn location(&self, rid: usize) -> Result<NodeId> {
        Ok(self.request(rid)?.loc)
    }

    pub fn arrival(&self, rid: usize) -> Result<&T> {
        Ok(&self.request(rid)?.arrival)
    }

    pub fn is_served(&self, rid: usize) -> bool {
        self.served.get(rid).is_some_and(|s| s.is_some())
    }

    pub fn unserved(&self) -> Vec<usize> {
        (0..self.arrived).filter(|&r| !self.is_served(r)).collect()
    }

    pub fn current_delay(&self, rid: usize) -> Result<T> {
        Ok(self.now.clone() - self.request(rid)?.arrival.clone())
    }

    /// Full penalty function; clairvoyant mode only.
    pub fn penalty_fn(&self, rid: usize) -> Result<&PenaltyFn<T>> {
        let r = self.request(rid)?;
        if self.mode == ClairvoyanceMode::Nonclairvoyant {
            return Err(OsdError::ClairvoyanceViolation {
                request: rid,
                delay: "entire function".into(),
                current: (self.now.clone() - r.arrival.clone()).to_decimal_string(),
            });
        }
        Ok(&r.penalty)
    }

    fn guard(&self, rid: usize, delay: &T) -> Result<&Request<T>> {
        let r = self.request(rid)?;
        let current = self.now.clone() - r.arrival.clone();
        if self.mode == ClairvoyanceMode::Nonclairvoyant && *delay > current {
            return Err(OsdError::ClairvoyanceViolation {
                request: rid,
                delay: delay.to_decimal_string(),
                current: current.to_decimal_string(),
            });
        }
        Ok(r)
    }

    pub fn penalty_at(&self, rid: usize, delay: &T) -> Result<Extended<T>> {
        self.guard(rid, delay)?.penalty.penalty_at(delay)
    }

    pub fn rate_at(&self, rid: usize, delay: &T) -> Result<Extended<T>> {
        self.guard(rid, delay)?.penalty.penalty_rate_at(delay)
    }

    pub fn current_penalty(&self, rid: usize) -> Result<Extended<T>> {
        let d = self.current_delay(rid)?;
        self.penalty_at(rid, &d)
    }

    pub fn current_rate(&self, rid: usize) -> Result<Extended<T>> {
        let d = self.current_delay(rid)?;
        self.rate_at(rid, &d)
    }

    /// Rate schedule from now on. Clairvoyant mode reads the whole function;
    /// nonclairvoyant mode extrapolates the current rate, which stays exact
    /// because the engine wakes the algorithm at every true breakpoint.
    pub fn schedule(&self, rid: usize) -> Result<RateSchedule<T>> {
        let now = self.now.clone();
        match self.mode {
            ClairvoyanceMode::Clairvoyant => {
                let r = self.request(rid)?;
                let p = self.penalty_fn(rid)?;
                let mut pieces: Vec<(T, T)> = Vec::new();
                for (off, slope) in p.segments() {
                    let s = r.arrival.clone() + off.clone();
                    if s <= now {
                        pieces.clear();
                        pieces.push((now.clone(), slope.clone()));
                    } else {
                        pieces.push((s, slope.clone()));
                    }
                }
                let deadline = p.deadline().map(|d| T::max_of(r.arrival.clone() + d.clone(), now.clone()));
                Ok(RateSchedule { pieces, deadline })
            }
            ClairvoyanceMode::Nonclairvoyant => match self.current_rate(rid)? {
                Extended::Finite(rate) => Ok(RateSchedule { pieces: vec![(now, rate)], deadline: None }),
                Extended::Infinite => Ok(RateSchedule { pieces: vec![(now.clone(), T::zero())], deadline: Some(now) }),
            },
        }
    }
}
