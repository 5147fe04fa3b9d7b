use std::collections::BTreeSet;
use std::sync::Arc;

use serde_json::{json, Value};

use super::position::{walk, Position};
use super::report::{mode_name, CostReport, PhaseRecord, Trace, TraceEvent};
use super::{Ctx, OnlineAlgorithm, ServiceAction};
use crate::error::{OsdError, Result};
use crate::instance::{ClairvoyanceMode, Origin, PenaltyFn, Request, TreeInstance};
use crate::metric_hst::{Hst, NodeId};
use crate::scalar::Scalar;

/// Decisions allowed at a single instant before the run is declared stuck.
const MAX_DECISIONS_PER_INSTANT: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub enum Horizon<T> {
    /// Stop at this time; requests still waiting are charged up to it.
    At(T),
    /// Run until no event remains.
    Completion,
}

struct World<T> {
    hst: Arc<Hst>,
    scale: T,
    origin: Origin<T>,
    k: usize,
    mode: ClairvoyanceMode,
    requests: Vec<Request<T>>,
    delivered: usize,
    served: Vec<Option<T>>,
    positions: Vec<Position<T>>,
    clock: T,
    processed: bool,
    frontier: T,
    phases: Vec<PhaseRecord<T>>,
    service_cost: T,
    physical: Option<T>,
    trace: Trace<T>,
    end: Option<T>,
}

impl<T: Scalar> World<T> {
    fn ctx(&self) -> Ctx<'_, T> {
        Ctx {
            now: &self.clock,
            mode: self.mode,
            hst: &self.hst,
            k: self.k,
            requests: &self.requests,
            arrived: self.delivered,
            served: &self.served,
            positions: &self.positions,
        }
    }

    fn check_position(&self, p: &Position<T>) -> Result<()> {
        match p {
            Position::Node(v) if self.hst.contains(*v) => Ok(()),
            Position::Node(v) => Err(OsdError::AlgorithmContract(format!("unknown node {v}"))),
            Position::Mid { edge, from_child } => {
                if !self.hst.is_edge(*edge) {
                    return Err(OsdError::AlgorithmContract(format!("unknown edge {edge}")));
                }
                if *from_child <= T::zero() || *from_child >= self.hst.len::<T>(*edge) {
                    return Err(OsdError::AlgorithmContract(format!("offset outside edge {edge}")));
                }
                Ok(())
            }
        }
    }

    fn physical_point(&self, p: &Position<T>) -> Option<usize> {
        let node = match p {
            Position::Node(v) => *v,
            Position::Mid { edge, .. } => *edge,
        };
        match &self.origin {
            Origin::Metric { point_leaf, .. } => {
                let leaf = self.hst.subtree(node).into_iter().filter(|&v| self.hst.is_leaf(v)).min()?;
                point_leaf.iter().position(|&l| l == leaf)
            }
            _ => None,
        }
    }

    fn apply(&mut self, action: ServiceAction<T>) -> Result<()> {
        let time = self.clock.clone();
        let index = self.phases.len();
        self.trace.events.push(TraceEvent::Phase {
            time: time.clone(),
            index,
            server: action.info.trigger_server,
            major: action.info.major,
        });
        let mut visited: BTreeSet<NodeId> = self.positions.iter().filter_map(|p| p.node()).collect();
        let mut edges = Vec::new();
        let mut cost = T::zero();
        for route in &action.routes {
            if route.server >= self.k {
                return Err(OsdError::AlgorithmContract(format!("unknown server {}", route.server)));
            }
            let Some(first) = route.waypoints.first() else {
                return Err(OsdError::AlgorithmContract("empty route".into()));
            };
            let first = first.clone().normalized(&self.hst);
            if first != self.positions[route.server] {
                return Err(OsdError::AlgorithmContract(format!(
                    "route for server {} starts at {} but the server is at {}",
                    route.server,
                    first.describe(),
                    self.positions[route.server].describe()
                )));
            }
            for w in route.waypoints.windows(2) {
                self.check_position(&w[1])?;
                let from = w[0].clone().normalized(&self.hst);
                let to = w[1].clone().normalized(&self.hst);
                let step = walk(&self.hst, &from, &to);
                if step.length.is_zero() {
                    continue;
                }
                visited.extend(step.nodes.iter().copied());
                edges.extend(step.edges.iter().copied());
                cost = cost + step.length.clone();
                if let (Some(a), Some(b)) = (self.physical_point(&from), self.physical_point(&to)) {
                    if let Origin::Metric { metric, .. } = &self.origin {
                        let d = metric.dist(a, b).clone();
                        self.physical = Some(self.physical.clone().unwrap_or_else(T::zero) + d);
                    }
                }
                self.trace.events.push(TraceEvent::Move {
                    time: time.clone(),
                    server: route.server,
                    from,
                    to: to.clone(),
                    distance: step.length / self.scale.clone(),
                });
                self.positions[route.server] = to;
            }
        }
        let mut served = Vec::new();
        for &rid in &action.served {
            if rid >= self.delivered {
                return Err(OsdError::AlgorithmContract(format!("request {rid} has not arrived")));
            }
            if self.served[rid].is_some() {
                return Err(OsdError::AlgorithmContract(format!("request {rid} is already served")));
            }
            let r = &self.requests[rid];
            if !visited.contains(&r.loc) {
                return Err(OsdError::AlgorithmContract(format!("request {rid} at node {} is not on any route", r.loc)));
            }
            self.served[rid] = Some(time.clone());
            let delay = time.clone() - r.arrival.clone();
            let penalty = r.penalty.finite_value(&delay) / self.scale.clone();
            self.trace.events.push(TraceEvent::Serve { time: time.clone(), request: rid, delay, penalty });
            served.push(rid);
        }
        for &edge in &action.info.resets {
            self.trace.events.push(TraceEvent::Reset { time: time.clone(), edge });
        }
        self.service_cost = self.service_cost.clone() + cost.clone();
        self.phases.push(PhaseRecord {
            time,
            server: action.info.trigger_server,
            major: action.info.major,
            key_edges: action.info.key_edges,
            edges,
            served,
            cost: cost / self.scale.clone(),
        });
        Ok(())
    }
}

/// A run in progress. Drivers may add requests and tighten deadlines between
/// calls to [`Simulation::run_until`], which is how adaptive adversaries work.
pub struct Simulation<T: Scalar, A: OnlineAlgorithm<T>> {
    world: World<T>,
    alg: A,
    started: bool,
}

impl<T: Scalar, A: OnlineAlgorithm<T>> Simulation<T, A> {
    pub fn new(inst: &TreeInstance<T>, alg: A, mode: ClairvoyanceMode) -> Result<Self> {
        if inst.k == 0 || inst.start.len() != inst.k {
            return Err(OsdError::NoServers);
        }
        let positions = inst.start.iter().map(|&v| Position::Node(v)).collect();
        let physical = match inst.origin {
            Origin::Metric { .. } => Some(T::zero()),
            _ => None,
        };
        Ok(Simulation {
            world: World {
                hst: inst.hst.clone(),
                scale: inst.scale.clone(),
                origin: inst.origin.clone(),
                k: inst.k,
                mode,
                requests: inst.requests.clone(),
                delivered: 0,
                served: vec![None; inst.requests.len()],
                positions,
                clock: T::zero(),
                processed: false,
                frontier: T::zero(),
                phases: Vec::new(),
                service_cost: T::zero(),
                physical,
                trace: Trace { events: Vec::new() },
                end: None,
            },
            alg,
            started: false,
        })
    }

    pub fn now(&self) -> &T {
        &self.world.clock
    }

    pub fn hst(&self) -> &Hst {
        &self.world.hst
    }

    pub fn positions(&self) -> &[Position<T>] {
        &self.world.positions
    }

    pub fn request(&self, rid: usize) -> Option<&Request<T>> {
        self.world.requests.get(rid)
    }

    pub fn request_count(&self) -> usize {
        self.world.requests.len()
    }

    pub fn served_at(&self, rid: usize) -> Option<&T> {
        self.world.served.get(rid).and_then(|s| s.as_ref())
    }

    pub fn trace(&self) -> &Trace<T> {
        &self.world.trace
    }

    pub fn phases(&self) -> &[PhaseRecord<T>] {
        &self.world.phases
    }

    pub fn algorithm(&self) -> &A {
        &self.alg
    }

    fn check_future(&self, t: &T) -> Result<()> {
        let w = &self.world;
        if *t < w.frontier || (w.processed && *t <= w.clock) {
            return Err(OsdError::PastTime { requested: t.to_decimal_string(), clock: w.clock.to_decimal_string() });
        }
        Ok(())
    }

    /// Appends a request; its arrival may not precede unprocessed time.
    pub fn add_request(&mut self, loc: NodeId, arrival: T, penalty: PenaltyFn<T>) -> Result<usize> {
        self.check_future(&arrival)?;
        if !self.world.hst.contains(loc) || !self.world.hst.is_leaf(loc) {
            return Err(OsdError::InvariantViolation(format!("node {loc} is not a leaf")));
        }
        if let Some(last) = self.world.requests.last() {
            if arrival < last.arrival {
                return Err(OsdError::InvariantViolation("arrivals must be nondecreasing".into()));
            }
        }
        let id = self.world.requests.len();
        self.world.requests.push(Request { id, loc, arrival, penalty });
        self.world.served.push(None);
        Ok(id)
    }

    /// Makes the penalty of `rid` infinite from absolute time `at` on.
    pub fn set_deadline(&mut self, rid: usize, at: T) -> Result<()> {
        self.check_future(&at)?;
        if self.served_at(rid).is_some() {
            return Err(OsdError::InvariantViolation(format!("request {rid} is already served")));
        }
        let r = self.world.requests.get_mut(rid).ok_or_else(|| OsdError::InvariantViolation(format!("unknown request {rid}")))?;
        let delay = at - r.arrival.clone();
        r.penalty.set_deadline(Some(delay))
    }

    fn ensure_started(&mut self) -> Result<()> {
        if !self.started {
            self.started = true;
            self.alg.start(&self.world.ctx())?;
        }
        Ok(())
    }

    fn next_event_time(&mut self) -> Result<Option<T>> {
        let w = &self.world;
        let mut best: Option<T> = w.requests.get(w.delivered).map(|r| r.arrival.clone());
        let consider = |t: T, best: &mut Option<T>| {
            if best.as_ref().is_none_or(|b| t < *b) {
                *best = Some(t);
            }
        };
        if let Some(d) = self.alg.next_decision_time(&w.ctx())? {
            if d < w.clock || (w.processed && d == w.clock) {
                return Err(OsdError::AlgorithmContract(format!(
                    "decision time {} is not after the processed clock {}",
                    d.to_decimal_string(),
                    w.clock.to_decimal_string()
                )));
            }
            consider(d, &mut best);
        }
        if w.mode == ClairvoyanceMode::Nonclairvoyant {
            for r in &w.requests[..w.delivered] {
                if w.served[r.id].is_some() {
                    continue;
                }
                let delay = w.clock.clone() - r.arrival.clone();
                if let Some(b) = r.penalty.next_breakpoint_after(&delay) {
                    consider(r.arrival.clone() + b, &mut best);
                }
            }
        }
        Ok(best)
    }

    fn process_instant(&mut self, t: T) -> Result<()> {
        self.world.clock = t.clone();
        self.world.processed = true;
        if self.world.frontier < t {
            self.world.frontier = t.clone();
        }
        while self.world.delivered < self.world.requests.len() && self.world.requests[self.world.delivered].arrival <= t {
            let rid = self.world.delivered;
            self.world.delivered += 1;
            self.world.trace.events.push(TraceEvent::Arrival { time: t.clone(), request: rid });
            self.alg.on_arrival(&self.world.ctx(), rid)?;
        }
        let mut count = 0;
        while let Some(action) = self.alg.on_decision(&self.world.ctx())? {
            self.world.apply(action)?;
            count += 1;
            if count > MAX_DECISIONS_PER_INSTANT {
                return Err(OsdError::AlgorithmContract(format!(
                    "more than {MAX_DECISIONS_PER_INSTANT} serving phases at time {}",
                    t.to_decimal_string()
                )));
            }
        }
        Ok(())
    }

    /// Processes every event strictly before `t`.
    pub fn run_until(&mut self, t: T) -> Result<()> {
        if t < self.world.frontier {
            return Err(OsdError::PastTime { requested: t.to_decimal_string(), clock: self.world.frontier.to_decimal_string() });
        }
        self.ensure_started()?;
        while let Some(next) = self.next_event_time()? {
            if next >= t {
                break;
            }
            self.process_instant(next)?;
        }
        self.world.frontier = t;
        Ok(())
    }

    pub fn run(&mut self, horizon: Horizon<T>) -> Result<()> {
        self.ensure_started()?;
        match horizon {
            Horizon::At(end) => {
                if end < self.world.frontier {
                    return Err(OsdError::PastTime { requested: end.to_decimal_string(), clock: self.world.frontier.to_decimal_string() });
                }
                while let Some(next) = self.next_event_time()? {
                    if next > end {
                        break;
                    }
                    self.process_instant(next)?;
                }
                self.world.end = Some(end);
            }
            Horizon::Completion => {
                while let Some(next) = self.next_event_time()? {
                    self.process_instant(next)?;
                }
                let last = self.world.requests[..self.world.delivered].last().map(|r| r.arrival.clone());
                let mut end = T::max_of(self.world.clock.clone(), self.world.frontier.clone());
                if let Some(a) = last {
                    end = T::max_of(end, a);
                }
                self.world.end = Some(end);
            }
        }
        Ok(())
    }

    pub fn report(&self) -> CostReport<T> {
        let w = &self.world;
        let end = w.end.clone().unwrap_or_else(|| T::max_of(w.clock.clone(), w.frontier.clone()));
        let mut delay_penalty = T::zero();
        let mut misses = 0;
        let mut unserved = Vec::new();
        let mut served = 0;
        for r in &w.requests[..w.delivered] {
            let at = match &w.served[r.id] {
                Some(t) => {
                    served += 1;
                    t.clone()
                }
                None => {
                    unserved.push(r.id);
                    end.clone()
                }
            };
            let delay = at - r.arrival.clone();
            if r.penalty.deadline().is_some_and(|d| delay > *d) {
                misses += 1;
            }
            delay_penalty = delay_penalty + r.penalty.finite_value(&delay);
        }
        let diag = self.alg.diagnostics();
        CostReport {
            algorithm: self.alg.name(),
            mode: w.mode,
            service_cost: w.service_cost.clone() / w.scale.clone(),
            delay_penalty: delay_penalty / w.scale.clone(),
            deadline_misses: misses,
            served,
            unserved,
            phases: w.phases.clone(),
            physical_service_cost: w.physical.clone(),
            violations: diag.violations,
            notes: diag.notes,
            end_time: end,
            scale: w.scale.clone(),
        }
    }

    pub fn finish(self) -> (CostReport<T>, Trace<T>) {
        let report = self.report();
        (report, self.world.trace)
    }
}

/// Runs `alg` on `inst` to the horizon.
pub fn run<T: Scalar, A: OnlineAlgorithm<T>>(
    inst: &TreeInstance<T>,
    alg: A,
    mode: ClairvoyanceMode,
    horizon: Horizon<T>,
) -> Result<(CostReport<T>, Trace<T>)> {
    if let Horizon::At(end) = &horizon {
        if let Some(last) = inst.requests.last() {
            if *end < last.arrival {
                return Err(OsdError::BadParams("horizon precedes the last arrival".into()));
            }
        }
    }
    let mut sim = Simulation::new(inst, alg, mode)?;
    sim.run(horizon)?;
    Ok(sim.finish())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison<T> {
    pub reports: Vec<CostReport<T>>,
    pub opt: Option<T>,
}

impl<T: Scalar> Comparison<T> {
    pub fn ratio(&self, i: usize) -> Option<T> {
        let opt = self.opt.as_ref()?;
        if opt.is_zero() {
            return None;
        }
        Some(self.reports[i].total() / opt.clone())
    }

    /// Total cost of run `i` over that of the first run.
    pub fn relative(&self, i: usize) -> Option<T> {
        let base = self.reports.first()?.total();
        (!base.is_zero()).then(|| self.reports[i].total() / base)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "opt": self.opt.as_ref().map(|o| o.to_decimal_string()),
            "runs": self.reports.iter().enumerate().map(|(i, r)| json!({
                "report": r.to_json(),
                "ratio": self.ratio(i).map(|x| x.to_decimal_string()),
                "relative": self.relative(i).map(|x| x.to_decimal_string()),
            })).collect::<Vec<_>>(),
        })
    }

    pub fn to_table(&self) -> String {
        let mut rows = vec![vec![
            "algorithm".to_string(),
            "mode".into(),
            "service".into(),
            "delay".into(),
            "total".into(),
            "ratio".into(),
            "relative".into(),
        ]];
        for (i, r) in self.reports.iter().enumerate() {
            rows.push(vec![
                r.algorithm.clone(),
                mode_name(r.mode).into(),
                r.service_cost.to_decimal_string(),
                r.delay_penalty.to_decimal_string(),
                r.total().to_decimal_string(),
                self.ratio(i).map(|x| fmt_ratio(&x)).unwrap_or_else(|| "-".into()),
                self.relative(i).map(|x| fmt_ratio(&x)).unwrap_or_else(|| "-".into()),
            ]);
        }
        if let Some(opt) = &self.opt {
            rows.push(vec!["opt".into(), "offline".into(), "-".into(), "-".into(), opt.to_decimal_string(), "1".into(), "-".into()]);
        }
        render_rows(&rows)
    }
}

fn fmt_ratio<T: Scalar>(x: &T) -> String {
    format!("{:.4}", x.to_f64().unwrap_or(f64::NAN))
}

pub(crate) fn render_rows(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols).map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r.iter().enumerate().map(|(c, s)| format!("{s:<w$}", w = widths[c])).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Runs every algorithm under the same configuration.
pub fn compare<T: Scalar>(
    inst: &TreeInstance<T>,
    algorithms: Vec<Box<dyn OnlineAlgorithm<T>>>,
    mode: ClairvoyanceMode,
    horizon: Horizon<T>,
    opt: Option<T>,
) -> Result<Comparison<T>> {
    if algorithms.is_empty() {
        return Err(OsdError::BadParams("no algorithms to compare".into()));
    }
    let mut reports = Vec::new();
    for alg in algorithms {
        reports.push(run(inst, alg, mode, horizon.clone())?.0);
    }
    Ok(Comparison { reports, opt })
}
