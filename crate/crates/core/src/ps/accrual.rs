//! Counter accrual shared by the single- and multi-server algorithms.
//!
//! Every unserved request feeds the first unsaturated counter on its path.
//! A counter that reaches capacity becomes pending; pending counters are
//! committed one at a time (lowest first) so callers can test a stopping
//! condition after each saturation.

use std::collections::BTreeMap;

use crate::metric_hst::{EdgeId, Hst, NodeId};
use crate::scalar::Scalar;
use crate::sim::{Position, RateSchedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Part {
    Whole,
    /// Segment of a server's own edge between the server and the child endpoint.
    Lower,
    /// Segment between the server and the parent endpoint.
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Elem {
    pub edge: EdgeId,
    pub part: Part,
}

impl Elem {
    pub fn whole(edge: EdgeId) -> Self {
        Elem { edge, part: Part::Whole }
    }

    pub fn describe(&self) -> String {
        match self.part {
            Part::Whole => format!("{}", self.edge),
            Part::Lower => format!("{}(lower)", self.edge),
            Part::Upper => format!("{}(upper)", self.edge),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Counter<T> {
    pub cap: T,
    pub w: T,
    /// Weight added by each request since the last reset.
    pub contrib: BTreeMap<usize, T>,
    pub sat: bool,
}

impl<T: Scalar> Counter<T> {
    pub fn new(cap: T) -> Self {
        Counter { cap, w: T::zero(), contrib: BTreeMap::new(), sat: false }
    }

    fn pending(&self) -> bool {
        !self.sat && self.w >= self.cap
    }

    fn add(&mut self, rid: usize, amount: T) {
        if amount.is_zero() {
            return;
        }
        self.w = self.w.clone() + amount.clone();
        let c = self.contrib.entry(rid).or_insert_with(T::zero);
        *c = c.clone() + amount;
    }

    pub fn reset(&mut self) {
        self.w = T::zero();
        self.sat = false;
        self.contrib.clear();
    }
}

/// One request's accrual route.
#[derive(Clone, Debug, PartialEq)]
pub struct Flow<T> {
    pub rid: usize,
    /// Elements from the request toward the sink, with capacities.
    pub path: Vec<(Elem, T)>,
    /// Only `path[..stop]` can receive weight.
    pub stop: usize,
    pub schedule: RateSchedule<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Advance<T> {
    /// The stop callback accepted a commit at this time.
    Stopped(T),
    ReachedLimit,
    /// No flow can ever add weight again.
    Exhausted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Track<T> {
    pub now: T,
    pub counters: BTreeMap<Elem, Counter<T>>,
    pub flows: Vec<Flow<T>>,
}

impl<T: Scalar> Track<T> {
    pub fn new(now: T) -> Self {
        Track { now, counters: BTreeMap::new(), flows: Vec::new() }
    }

    pub fn is_sat(&self, e: &Elem) -> bool {
        self.counters.get(e).is_some_and(|c| c.sat)
    }

    pub fn weight(&self, e: &Elem) -> T {
        self.counters.get(e).map_or_else(T::zero, |c| c.w.clone())
    }

    /// Replaces the flows, creating counters for new path elements.
    pub fn set_flows(&mut self, flows: Vec<Flow<T>>) {
        for f in &flows {
            for (e, cap) in &f.path {
                self.counters.entry(*e).or_insert_with(|| Counter::new(cap.clone()));
            }
        }
        self.flows = flows;
    }

    /// Clears every counter on `edge`, segments included.
    pub fn reset_edge(&mut self, edge: EdgeId) {
        for part in [Part::Whole, Part::Lower, Part::Upper] {
            self.counters.remove(&Elem { edge, part });
        }
    }

    /// Removes `rid`'s contributions everywhere; returns the amount removed.
    pub fn remove_contributions(&mut self, rid: usize) -> T {
        let mut total = T::zero();
        for c in self.counters.values_mut() {
            if let Some(x) = c.contrib.remove(&rid) {
                c.w = c.w.clone() - x.clone();
                total = total + x;
                if c.w < c.cap {
                    c.sat = false;
                }
            }
        }
        total
    }

    fn target(&self, f: &Flow<T>) -> Option<Elem> {
        f.path[..f.stop].iter().map(|(e, _)| *e).find(|e| !self.is_sat(e))
    }

    /// Runs accrual forward. Events exactly at `limit` are processed.
    pub fn advance(&mut self, limit: Option<&T>, mut stop: impl FnMut(&Track<T>, Elem) -> bool) -> Advance<T> {
        loop {
            if let Some(e) = self.counters.iter().find(|(_, c)| c.pending()).map(|(e, _)| *e) {
                let c = self.counters.get_mut(&e).expect("pending counter exists");
                c.sat = true;
                c.w = c.cap.clone();
                if stop(self, e) {
                    return Advance::Stopped(self.now.clone());
                }
                continue;
            }
            // Requests past their deadline fill their target at once.
            let mut filled = false;
            let mut urgent: BTreeMap<Elem, usize> = BTreeMap::new();
            for f in &self.flows {
                if f.schedule.deadline.as_ref().is_some_and(|d| *d <= self.now) {
                    if let Some(e) = self.target(f) {
                        let r = urgent.entry(e).or_insert(f.rid);
                        *r = (*r).min(f.rid);
                    }
                }
            }
            if let Some((e, rid)) = urgent.into_iter().next() {
                let c = self.counters.get_mut(&e).expect("flow counters exist");
                let missing = c.cap.clone() - c.w.clone();
                c.add(rid, missing);
                c.w = c.cap.clone();
                filled = true;
            }
            if filled {
                continue;
            }

            let mut rates: BTreeMap<Elem, T> = BTreeMap::new();
            let mut next: Option<T> = limit.cloned();
            let consider = |t: T, next: &mut Option<T>| {
                if next.as_ref().is_none_or(|n| t < *n) {
                    *next = Some(t);
                }
            };
            let mut active = Vec::new();
            for (i, f) in self.flows.iter().enumerate() {
                let Some(e) = self.target(f) else { continue };
                if let Some(t) = f.schedule.next_change_after(&self.now) {
                    consider(t, &mut next);
                }
                let slope = f.schedule.slope_at(&self.now);
                if slope > T::zero() {
                    let r = rates.entry(e).or_insert_with(T::zero);
                    *r = r.clone() + slope.clone();
                    active.push((i, e, slope));
                }
            }
            let mut saturating: Option<(T, Vec<Elem>)> = None;
            for (e, rate) in &rates {
                let c = &self.counters[e];
                let dt = (c.cap.clone() - c.w.clone()) / rate.clone();
                let t = self.now.clone() + dt;
                match &mut saturating {
                    Some((best, list)) if t == *best => list.push(*e),
                    Some((best, _)) if t > *best => {}
                    _ => saturating = Some((t, vec![*e])),
                }
            }
            if let Some((t, _)) = &saturating {
                consider(t.clone(), &mut next);
            }
            let Some(t) = next else {
                return Advance::Exhausted;
            };
            let dt = t.clone() - self.now.clone();
            if !dt.is_zero() {
                for (i, e, slope) in active {
                    let rid = self.flows[i].rid;
                    let c = self.counters.get_mut(&e).expect("flow counters exist");
                    c.add(rid, slope * dt.clone());
                }
            }
            if let Some((st, list)) = saturating {
                if st == t {
                    for e in list {
                        let c = self.counters.get_mut(&e).expect("flow counters exist");
                        c.w = c.cap.clone();
                    }
                }
            }
            for c in self.counters.values_mut() {
                if c.w > c.cap {
                    c.w = c.cap.clone();
                }
            }
            self.now = t.clone();
            if limit.is_some_and(|l| t == *l) && !self.counters.values().any(|c| c.pending()) && !self.has_urgent() {
                return Advance::ReachedLimit;
            }
        }
    }

    fn has_urgent(&self) -> bool {
        self.flows.iter().any(|f| f.schedule.deadline.as_ref().is_some_and(|d| *d <= self.now) && self.target(f).is_some())
    }
}

/// Whether a server position lies in the subtree hanging below edge `c`.
pub fn server_below<T: Scalar>(hst: &Hst, pos: &Position<T>, c: EdgeId) -> bool {
    match pos {
        Position::Node(v) => hst.is_ancestor(c, *v),
        Position::Mid { edge, .. } => hst.is_ancestor(c, *edge),
    }
}

/// Path elements from node `loc` to the server, with capacities.
pub fn path_to_server<T: Scalar>(hst: &Hst, loc: NodeId, server: &Position<T>) -> Vec<(Elem, T)> {
    match server {
        Position::Node(s) => hst.path(loc, *s).into_iter().map(|(e, _)| (Elem::whole(e), hst.len::<T>(e))).collect(),
        Position::Mid { edge, from_child } => {
            let (anchor, seg) = if hst.is_ancestor(*edge, loc) {
                (*edge, (Elem { edge: *edge, part: Part::Lower }, from_child.clone()))
            } else {
                let p = hst.parent(*edge).expect("edge has a parent");
                (p, (Elem { edge: *edge, part: Part::Upper }, hst.len::<T>(*edge) - from_child.clone()))
            };
            let mut out: Vec<(Elem, T)> = hst.path(loc, anchor).into_iter().map(|(e, _)| (Elem::whole(e), hst.len::<T>(e))).collect();
            out.push(seg);
            out
        }
    }
}

/// Index of the longest element; ties go to the one nearest the request.
pub fn major_index<T: Scalar>(path: &[(Elem, T)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (_, len)) in path.iter().enumerate() {
        if best.is_none_or(|b| *len > path[b].1) {
            best = Some(i);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    fn q(s: &str) -> Rational {
        Rational::parse_decimal(s).unwrap()
    }

    fn linear(now: &str, slope: &str) -> RateSchedule<Rational> {
        RateSchedule { pieces: vec![(q(now), q(slope))], deadline: None }
    }

    fn never(_: &Track<Rational>, _: Elem) -> bool {
        false
    }

    #[test]
    fn single_edge_accrues_linearly() {
        let mut t = Track::new(q("0"));
        let e = Elem::whole(1);
        t.set_flows(vec![Flow { rid: 0, path: vec![(e, q("4"))], stop: 1, schedule: linear("0", "1") }]);
        assert_eq!(t.advance(Some(&q("3")), never), Advance::ReachedLimit);
        assert_eq!(t.weight(&e), q("3"));
        let r = t.advance(None, |_, _| true);
        assert_eq!(r, Advance::Stopped(q("4")));
        assert_eq!(t.weight(&e), q("4"));
    }

    #[test]
    fn weight_moves_to_next_edge_on_saturation() {
        let mut t = Track::new(q("0"));
        let near = Elem::whole(2);
        let far = Elem::whole(1);
        t.set_flows(vec![Flow { rid: 0, path: vec![(near, q("1")), (far, q("4"))], stop: 2, schedule: linear("0", "1") }]);
        assert_eq!(t.advance(Some(&q("3")), never), Advance::ReachedLimit);
        assert_eq!(t.weight(&near), q("1"));
        assert_eq!(t.weight(&far), q("2"));
        assert_eq!(t.counters[&far].contrib[&0], q("2"));
    }

    #[test]
    fn deadline_fills_immediately() {
        let mut t = Track::new(q("0"));
        let a = Elem::whole(2);
        let b = Elem::whole(1);
        let sched = RateSchedule { pieces: vec![(q("0"), q("0"))], deadline: Some(q("1")) };
        t.set_flows(vec![Flow { rid: 3, path: vec![(a, q("1")), (b, q("2"))], stop: 2, schedule: sched }]);
        let r = t.advance(None, |_, e| e == b);
        assert_eq!(r, Advance::Stopped(q("1")));
        assert_eq!(t.counters[&b].contrib[&3], q("2"));
    }

    #[test]
    fn zero_rate_exhausts() {
        let mut t = Track::new(q("0"));
        t.set_flows(vec![Flow { rid: 0, path: vec![(Elem::whole(1), q("1"))], stop: 1, schedule: linear("0", "0") }]);
        assert_eq!(t.advance(None, never), Advance::Exhausted);
    }

    #[test]
    fn major_ties_go_to_the_request_side() {
        let p = vec![(Elem::whole(3), q("4")), (Elem::whole(2), q("4")), (Elem::whole(1), q("2"))];
        assert_eq!(major_index(&p), Some(0));
    }
}
