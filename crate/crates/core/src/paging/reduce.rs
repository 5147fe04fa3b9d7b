use std::collections::BTreeMap;

use crate::error::{OsdError, Result};
use crate::instance::{ClairvoyanceMode, Instance, Space};
use crate::scalar::{Extended, Scalar};
use crate::sim::{Ctx, Horizon, OnlineAlgorithm, ServiceAction, Simulation};

/// A classical request: `page` must be in the cache at `time`.
#[derive(Clone, Debug, PartialEq)]
pub struct PageRequest<T> {
    pub page: usize,
    pub time: T,
    /// Original requests whose interval ends here.
    pub covers: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedStream<T> {
    pub requests: Vec<PageRequest<T>>,
}

impl<T> ReducedStream<T> {
    pub fn pages(&self) -> Vec<usize> {
        self.requests.iter().map(|r| r.page).collect()
    }
}

/// Cuts each page's requests into intervals that close once their summed
/// penalty reaches one. Runs as a nonclairvoyant online algorithm, so it only
/// ever reads penalties up to the current delay.
struct Reducer<T> {
    threshold: T,
    open: BTreeMap<usize, Vec<usize>>,
    emitted: Vec<PageRequest<T>>,
}

impl<T: Scalar> Reducer<T> {
    fn volume(ctx: &Ctx<'_, T>, rids: &[usize]) -> Result<Option<T>> {
        let mut v = T::zero();
        for &r in rids {
            match ctx.current_penalty(r)? {
                Extended::Finite(x) => v = v + x,
                Extended::Infinite => return Ok(None),
            }
        }
        Ok(Some(v))
    }

    fn due(&self, ctx: &Ctx<'_, T>) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for (&leaf, rids) in &self.open {
            if rids.is_empty() {
                continue;
            }
            match Self::volume(ctx, rids)? {
                Some(v) if v < self.threshold => {}
                _ => out.push(leaf),
            }
        }
        Ok(out)
    }

    fn emit_due(&mut self, ctx: &Ctx<'_, T>) -> Result<()> {
        for leaf in self.due(ctx)? {
            let covers = std::mem::take(self.open.get_mut(&leaf).expect("due pages are open"));
            self.emitted.push(PageRequest { page: leaf - 1, time: ctx.now().clone(), covers });
        }
        Ok(())
    }
}

impl<T: Scalar> OnlineAlgorithm<T> for Reducer<T> {
    fn name(&self) -> String {
        "reduce".into()
    }

    fn start(&mut self, _ctx: &Ctx<'_, T>) -> Result<()> {
        Ok(())
    }

    fn on_arrival(&mut self, ctx: &Ctx<'_, T>, request: usize) -> Result<()> {
        // Intervals that close at this instant do not take the new request.
        self.emit_due(ctx)?;
        self.open.entry(ctx.location(request)?).or_default().push(request);
        Ok(())
    }

    fn next_decision_time(&mut self, ctx: &Ctx<'_, T>) -> Result<Option<T>> {
        if !self.due(ctx)?.is_empty() {
            return Ok(Some(ctx.now().clone()));
        }
        let now = ctx.now().clone();
        let mut best: Option<T> = None;
        for rids in self.open.values().filter(|r| !r.is_empty()) {
            let v = Self::volume(ctx, rids)?.unwrap_or_else(T::zero);
            let mut rate = T::zero();
            let mut t: Option<T> = None;
            for &r in rids {
                let s = ctx.schedule(r)?;
                rate = rate + s.slope_at(&now);
                if let Some(c) = s.next_change_after(&now) {
                    t = Some(t.map_or(c.clone(), |x| T::min_of(x, c)));
                }
            }
            if rate.is_positive() {
                let hit = now.clone() + (self.threshold.clone() - v) / rate;
                t = Some(t.map_or(hit.clone(), |x| T::min_of(x, hit)));
            }
            if let Some(t) = t {
                best = Some(best.map_or(t.clone(), |b| T::min_of(b, t)));
            }
        }
        Ok(best)
    }

    fn on_decision(&mut self, ctx: &Ctx<'_, T>) -> Result<Option<ServiceAction<T>>> {
        self.emit_due(ctx)?;
        Ok(None)
    }
}

/// Reduction from paging with delay to classical paging. Intervals that never
/// reach penalty one are closed at the last arrival or emission, whichever is
/// later.
pub fn reduce_stream<T: Scalar>(inst: &Instance<T>) -> Result<ReducedStream<T>> {
    if !matches!(inst.space, Space::Pages(_)) {
        return Err(OsdError::NonUniformMetric);
    }
    let tree = inst.to_tree(0)?;
    let reducer = Reducer { threshold: tree.scale.clone(), open: BTreeMap::new(), emitted: Vec::new() };
    let mut sim = Simulation::new(&tree, reducer, ClairvoyanceMode::Nonclairvoyant)?;
    sim.run(Horizon::Completion)?;
    let red = sim.algorithm();
    let mut requests = red.emitted.clone();
    let last_arrival = inst.requests.last().map(|r| r.arrival.clone());
    let last_emission = requests.last().map(|r| r.time.clone());
    let flush = match (last_arrival, last_emission) {
        (Some(a), Some(e)) => T::max_of(a, e),
        (a, e) => a.or(e).unwrap_or_else(T::zero),
    };
    for (&leaf, rids) in &red.open {
        if !rids.is_empty() {
            requests.push(PageRequest { page: leaf - 1, time: flush.clone(), covers: rids.clone() });
        }
    }
    Ok(ReducedStream { requests })
}
