use std::collections::BTreeMap;

use crate::error::Result;
use crate::metric_hst::NodeId;
use crate::scalar::{Extended, Scalar};
use crate::sim::{distance, Ctx, OnlineAlgorithm, PhaseInfo, Position, ServerRoute, ServiceAction};

/// What the accumulated penalty at a location is compared against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Threshold {
    /// Distance from the nearest server.
    Distance,
    /// Length of the edge above the location, regardless of where servers are.
    LeafWeight,
}

/// Serves all requests at a location once their summed penalty reaches a
/// threshold, using the nearest server.
#[derive(Clone, Debug)]
pub struct Ball {
    pub threshold: Threshold,
}

impl Default for Ball {
    fn default() -> Self {
        Ball { threshold: Threshold::Distance }
    }
}

impl Ball {
    pub fn new(threshold: Threshold) -> Self {
        Ball { threshold }
    }

    fn nearest<T: Scalar>(ctx: &Ctx<'_, T>, loc: NodeId) -> (usize, T) {
        let target = Position::Node(loc);
        let mut best = (0, distance(ctx.hst(), &ctx.positions()[0], &target));
        for (i, p) in ctx.positions().iter().enumerate().skip(1) {
            let d = distance(ctx.hst(), p, &target);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    fn level<T: Scalar>(&self, ctx: &Ctx<'_, T>, loc: NodeId) -> T {
        let (_, d) = Self::nearest(ctx, loc);
        match self.threshold {
            Threshold::Distance => d,
            Threshold::LeafWeight if d.is_zero() => d,
            Threshold::LeafWeight => ctx.hst().len(loc),
        }
    }

    fn balls<T: Scalar>(ctx: &Ctx<'_, T>) -> Result<BTreeMap<NodeId, Vec<usize>>> {
        let mut out: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        for r in ctx.unserved() {
            out.entry(ctx.location(r)?).or_default().push(r);
        }
        Ok(out)
    }

    /// Summed current penalty; `None` once a deadline has passed.
    fn volume<T: Scalar>(ctx: &Ctx<'_, T>, rids: &[usize]) -> Result<Option<T>> {
        let mut v = T::zero();
        for &r in rids {
            match ctx.current_penalty(r)? {
                Extended::Finite(x) => v = v + x,
                Extended::Infinite => return Ok(None),
            }
        }
        Ok(Some(v))
    }

    fn ready<T: Scalar>(&self, ctx: &Ctx<'_, T>) -> Result<Option<NodeId>> {
        for (loc, rids) in Self::balls(ctx)? {
            match Self::volume(ctx, &rids)? {
                None => return Ok(Some(loc)),
                Some(v) if v >= self.level(ctx, loc) => return Ok(Some(loc)),
                _ => {}
            }
        }
        Ok(None)
    }
}

impl<T: Scalar> OnlineAlgorithm<T> for Ball {
    fn name(&self) -> String {
        match self.threshold {
            Threshold::Distance => "ball".into(),
            Threshold::LeafWeight => "ball-leaf".into(),
        }
    }

    fn start(&mut self, _ctx: &Ctx<'_, T>) -> Result<()> {
        Ok(())
    }

    fn on_arrival(&mut self, _ctx: &Ctx<'_, T>, _request: usize) -> Result<()> {
        Ok(())
    }

    fn next_decision_time(&mut self, ctx: &Ctx<'_, T>) -> Result<Option<T>> {
        if self.ready(ctx)?.is_some() {
            return Ok(Some(ctx.now().clone()));
        }
        let now = ctx.now().clone();
        let mut best: Option<T> = None;
        for (loc, rids) in Self::balls(ctx)? {
            let v = Self::volume(ctx, &rids)?.unwrap_or_else(T::zero);
            let mut rate = T::zero();
            let mut change: Option<T> = None;
            for &r in &rids {
                let s = ctx.schedule(r)?;
                rate = rate + s.slope_at(&now);
                if let Some(c) = s.next_change_after(&now) {
                    change = Some(change.map_or(c.clone(), |x| T::min_of(x, c)));
                }
            }
            let mut t = change;
            if rate.is_positive() {
                let hit = now.clone() + (self.level(ctx, loc) - v) / rate;
                t = Some(t.map_or(hit.clone(), |x| T::min_of(x, hit)));
            }
            if let Some(t) = t {
                best = Some(best.map_or(t.clone(), |b| T::min_of(b, t)));
            }
        }
        Ok(best)
    }

    fn on_decision(&mut self, ctx: &Ctx<'_, T>) -> Result<Option<ServiceAction<T>>> {
        let Some(loc) = self.ready(ctx)? else { return Ok(None) };
        let (s, _) = Self::nearest(ctx, loc);
        let served = Self::balls(ctx)?.remove(&loc).unwrap_or_default();
        Ok(Some(ServiceAction {
            routes: vec![ServerRoute { server: s, waypoints: vec![ctx.positions()[s].clone(), Position::Node(loc)] }],
            served,
            info: PhaseInfo { trigger_server: Some(s), ..PhaseInfo::default() },
        }))
    }
}
