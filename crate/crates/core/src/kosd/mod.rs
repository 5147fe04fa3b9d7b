//! Preemptive service with `k` servers.
//!
//! Every server keeps its own counters, fed as if it were alone. The first
//! server whose major element saturates plans the phase with the single-server
//! machinery; key edges are then visited in depth-first order, shorter siblings
//! first, and each one is reached by moving all active servers toward it at
//! equal speed. Servers may come to rest inside an edge.

use std::collections::BTreeSet;

use crate::error::{OsdError, Result};
use crate::metric_hst::{EdgeId, Hst, NodeId};
use crate::ps::{advance_waiting, build_plan, check_provenance, waiting_flows, Advance, Elem, Part, Plan, Track};
use crate::scalar::Scalar;
use crate::sim::{
    distance, next_junction, step_toward, walk, Ctx, Diagnostics, OnlineAlgorithm, PhaseInfo, Position, ServerRoute, ServiceAction,
};

/// Result of one active-cover movement.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverMove<T> {
    /// Positions each server passed through, in order, after its start.
    pub legs: Vec<Vec<Position<T>>>,
    pub distances: Vec<T>,
    /// The server that reached the target first (lowest id on ties).
    pub arrived: usize,
}

/// Servers with no other server between them and `target`. Among servers
/// sharing a position only the lowest id is active.
pub fn active_servers<T: Scalar>(hst: &Hst, positions: &[Position<T>], target: &Position<T>) -> Vec<usize> {
    let d: Vec<T> = positions.iter().map(|p| distance(hst, p, target)).collect();
    (0..positions.len())
        .filter(|&i| {
            !(0..positions.len()).any(|j| {
                if j == i {
                    return false;
                }
                if positions[j] == positions[i] {
                    return j < i;
                }
                d[j].clone() + distance(hst, &positions[j], &positions[i]) == d[i]
            })
        })
        .collect()
}

/// Moves all active servers toward `target` at equal speed until one arrives.
pub fn active_cover_move<T: Scalar>(hst: &Hst, positions: &mut [Position<T>], target: &Position<T>) -> Result<CoverMove<T>> {
    if positions.is_empty() {
        return Err(OsdError::NoServers);
    }
    let k = positions.len();
    let mut legs = vec![Vec::new(); k];
    let mut distances = vec![T::zero(); k];
    loop {
        if let Some(i) = (0..k).find(|&i| positions[i] == *target) {
            return Ok(CoverMove { legs, distances, arrived: i });
        }
        let active = active_servers(hst, positions, target);
        let delta = active
            .iter()
            .map(|&i| next_junction(hst, &positions[i], target))
            .fold(None, |acc: Option<T>, x| Some(acc.map_or(x.clone(), |a| T::min_of(a, x))))
            .ok_or_else(|| OsdError::Internal("no active server".into()))?;
        if delta <= T::zero() {
            return Err(OsdError::Internal("active cover made no progress".into()));
        }
        for i in active {
            let next = step_toward(hst, &positions[i], target, &delta);
            distances[i] = distances[i].clone() + distance(hst, &positions[i], &next);
            legs[i].push(next.clone());
            positions[i] = next;
        }
    }
}

/// Multi-server preemptive service.
#[derive(Clone, Debug)]
pub struct Kosd<T> {
    tracks: Vec<Track<T>>,
    trigger: Option<(usize, Elem)>,
    diag: Diagnostics,
    pub c_diag: T,
}

impl<T: Scalar> Default for Kosd<T> {
    fn default() -> Self {
        Kosd::new()
    }
}

/// A phase's movement, accumulated per server.
struct Movement<T> {
    positions: Vec<Position<T>>,
    waypoints: Vec<Vec<Position<T>>>,
    visited: BTreeSet<NodeId>,
    edges: Vec<EdgeId>,
    /// Distance moved along each edge, piece by piece.
    pieces: Vec<(EdgeId, T)>,
}

/// Distance covered on each edge when moving from `a` to `b`.
fn walk_pieces<T: Scalar>(hst: &Hst, a: &Position<T>, b: &Position<T>) -> Vec<(EdgeId, T)> {
    let w = walk(hst, a, b);
    if w.nodes.is_empty() {
        return w.edges.iter().map(|&e| (e, w.length.clone())).collect();
    }
    let part = |p: &Position<T>, anchor: NodeId| match p {
        Position::Mid { edge, from_child } => {
            let d = if anchor == *edge { from_child.clone() } else { hst.len::<T>(*edge) - from_child.clone() };
            Some((*edge, d))
        }
        Position::Node(_) => None,
    };
    let mut out: Vec<(EdgeId, T)> = part(a, w.nodes[0]).into_iter().collect();
    out.extend(w.nodes.windows(2).map(|x| {
        let e = edge_of(hst, x[0], x[1]);
        (e, hst.len::<T>(e))
    }));
    out.extend(part(b, *w.nodes.last().expect("nonempty")));
    out
}

fn edge_of(hst: &Hst, a: NodeId, b: NodeId) -> EdgeId {
    if hst.parent(a) == Some(b) {
        a
    } else {
        b
    }
}

impl<T: Scalar> Movement<T> {
    fn new(positions: &[Position<T>]) -> Self {
        Movement {
            positions: positions.to_vec(),
            waypoints: positions.iter().map(|p| vec![p.clone()]).collect(),
            visited: positions.iter().filter_map(|p| p.node()).collect(),
            edges: Vec::new(),
            pieces: Vec::new(),
        }
    }

    fn go(&mut self, hst: &Hst, server: usize, to: Position<T>) {
        let w = walk(hst, &self.positions[server], &to);
        if w.length.is_zero() {
            return;
        }
        self.visited.extend(w.nodes.iter().copied());
        self.edges.extend(w.edges.iter().copied());
        self.pieces.extend(walk_pieces(hst, &self.positions[server], &to));
        self.waypoints[server].push(to.clone());
        self.positions[server] = to;
    }

    fn cover(&mut self, hst: &Hst, target: &Position<T>) -> Result<usize> {
        let start = self.positions.clone();
        let mv = active_cover_move(hst, &mut self.positions, target)?;
        for (i, leg) in mv.legs.into_iter().enumerate() {
            let mut cur = start[i].clone();
            for p in leg {
                let w = walk(hst, &cur, &p);
                self.visited.extend(w.nodes.iter().copied());
                self.edges.extend(w.edges.iter().copied());
                self.pieces.extend(walk_pieces(hst, &cur, &p));
                self.waypoints[i].push(p.clone());
                cur = p;
            }
        }
        Ok(mv.arrived)
    }
}

impl<T: Scalar> Kosd<T> {
    pub fn new() -> Self {
        Kosd { tracks: Vec::new(), trigger: None, diag: Diagnostics::default(), c_diag: T::of_usize(64) }
    }

    pub fn tracks(&self) -> &[Track<T>] {
        &self.tracks
    }

    fn sync(&mut self, ctx: &Ctx<'_, T>) -> Result<()> {
        if self.trigger.is_some() {
            return Ok(());
        }
        let now = ctx.now().clone();
        for (s, track) in self.tracks.iter_mut().enumerate() {
            if track.now < now {
                if let (Advance::Stopped(t), _) = advance_waiting(track, Some(&now)) {
                    if t < now {
                        return Err(OsdError::Internal(format!("server {s} missed a saturation at {}", t.to_decimal_string())));
                    }
                }
            }
            track.set_flows(waiting_flows(ctx, &ctx.positions()[s])?);
            advance_waiting(track, Some(&now));
        }
        // Simultaneous saturations: the shortest major goes first.
        let mut best: Option<(T, usize, Elem)> = None;
        for (s, t) in self.tracks.iter().enumerate() {
            if let Some((cap, e)) = crate::ps::saturated_major(t) {
                if best.as_ref().is_none_or(|(c, _, _)| cap < *c) {
                    best = Some((cap, s, e));
                }
            }
        }
        self.trigger = best.map(|(_, s, e)| (s, e));
        Ok(())
    }

    fn serve_in_place(&self, ctx: &Ctx<'_, T>) -> Result<Option<ServiceAction<T>>> {
        let here: BTreeSet<NodeId> = ctx.positions().iter().filter_map(|p| p.node()).collect();
        let served: Vec<usize> = ctx.unserved().into_iter().filter(|&r| ctx.location(r).is_ok_and(|l| here.contains(&l))).collect();
        if served.is_empty() {
            return Ok(None);
        }
        Ok(Some(ServiceAction { routes: Vec::new(), served, info: PhaseInfo::default() }))
    }

    /// Key elements in depth-first order over the critical tree, shorter
    /// siblings first.
    fn ordered_keys(hst: &Hst, plan: &Plan<T>) -> Vec<Elem> {
        if plan.key_edges == [plan.scope.top] {
            return plan.key_edges.clone();
        }
        let keys: BTreeSet<EdgeId> = plan.key_edges.iter().map(|k| k.edge).collect();
        let mut out = Vec::new();
        let mut stack: Vec<EdgeId> = sorted_desc(hst, plan.scope.first_layer.iter().copied(), &plan.critical_edges);
        while let Some(e) = stack.pop() {
            if keys.contains(&e) {
                out.push(Elem::whole(e));
                continue;
            }
            stack.extend(sorted_desc(hst, hst.children(e).iter().copied(), &plan.critical_edges));
        }
        out
    }

    fn serve(&mut self, ctx: &Ctx<'_, T>, s: usize, m: Elem) -> Result<ServiceAction<T>> {
        let hst = ctx.hst();
        let now = ctx.now().clone();
        let stamp = format!(" at t={}", now.to_decimal_string());
        for track in self.tracks.iter_mut() {
            track.advance(Some(&now), |_, _| false);
        }
        let server = ctx.positions()[s].clone();
        let track = &self.tracks[s];
        let mut violations = Vec::new();
        check_provenance(hst, ctx, track, &server, &mut violations);
        let plan = build_plan(hst, ctx, track, &server, m)?;
        for (i, p) in ctx.positions().iter().enumerate() {
            if p.within(hst, |v| plan.scope.contains(v)) {
                violations.push(format!("server {i} sits in the relevant subtree of {}", m.describe()));
            }
        }

        let mut mv = Movement::new(ctx.positions());
        let keys = Self::ordered_keys(hst, &plan);
        for k in &keys {
            let (base, bottom, first): (Position<T>, NodeId, Vec<EdgeId>) = if *k == plan.scope.top {
                let base = match m.part {
                    Part::Whole if plan.scope.x == m.edge => Position::Node(hst.parent(m.edge).expect("edge has a parent")),
                    Part::Whole => Position::Node(m.edge),
                    Part::Lower | Part::Upper => server.clone(),
                };
                (base, plan.scope.x, plan.scope.first_layer.clone())
            } else {
                (Position::Node(hst.parent(k.edge).expect("edge has a parent")), k.edge, hst.children(k.edge).to_vec())
            };
            let a = mv.cover(hst, &base)?;
            mv.go(hst, a, Position::Node(bottom));
            for v in dfs(hst, bottom, &first, &plan.edges).into_iter().skip(1) {
                mv.go(hst, a, Position::Node(v));
            }
            mv.go(hst, a, base);
        }

        let served: Vec<usize> = ctx.unserved().into_iter().filter(|&r| ctx.location(r).is_ok_and(|l| mv.visited.contains(&l))).collect();
        for r in &plan.critical {
            if !served.contains(r) {
                violations.push(format!("critical request {r} left unserved"));
            }
        }
        let mut resets = mv.edges.clone();
        resets.sort_unstable();
        resets.dedup();
        for track in self.tracks.iter_mut() {
            for &e in &resets {
                track.reset_edge(e);
            }
            for &r in &served {
                track.remove_contributions(r);
            }
        }
        let h = T::of_usize(hst.height().max(1));
        for se in &plan.service_edges {
            let travel = mv
                .pieces
                .iter()
                .filter(|(e, _)| se.nodes.contains(e) && se.nodes.contains(&hst.parent(*e).expect("edge has a parent")))
                .fold(T::zero(), |a, (_, d)| a + d.clone());
            let bound = self.c_diag.clone() * h.clone() * h.clone() * se.len.clone();
            if travel > bound {
                self.diag.notes.push(format!(
                    "travel {} inside the region of {} exceeds {}{stamp}",
                    travel.to_decimal_string(),
                    se.elem.describe(),
                    bound.to_decimal_string()
                ));
            }
        }
        self.diag.violations.extend(violations.into_iter().chain(plan.violations.iter().cloned()).map(|v| v + &stamp));
        self.diag.notes.extend(plan.notes.iter().map(|n| n.clone() + &stamp));

        let routes = mv
            .waypoints
            .into_iter()
            .enumerate()
            .filter(|(_, w)| w.len() > 1)
            .map(|(server, waypoints)| ServerRoute { server, waypoints })
            .collect();
        Ok(ServiceAction {
            routes,
            served,
            info: PhaseInfo {
                trigger_server: Some(s),
                major: Some(m.edge),
                key_edges: keys.iter().map(|k| k.edge).collect(),
                service_edges: plan.service_edges.iter().map(|e| e.elem.edge).collect(),
                resets,
            },
        })
    }
}

/// `edges` filtered to `keep`, sorted so that popping yields (len, id) ascending.
fn sorted_desc(hst: &Hst, edges: impl Iterator<Item = EdgeId>, keep: &BTreeSet<EdgeId>) -> Vec<EdgeId> {
    let mut v: Vec<EdgeId> = edges.filter(|e| keep.contains(e)).collect();
    v.sort_by_key(|&e| std::cmp::Reverse((hst.len_exp(e), e)));
    v
}

/// Depth-first node sequence over `edges` from `root`, shorter siblings first.
fn dfs(hst: &Hst, root: NodeId, first: &[EdgeId], edges: &BTreeSet<EdgeId>) -> Vec<NodeId> {
    fn go(hst: &Hst, v: NodeId, kids: &[EdgeId], edges: &BTreeSet<EdgeId>, out: &mut Vec<NodeId>) {
        out.push(v);
        let mut order: Vec<EdgeId> = kids.iter().copied().filter(|c| edges.contains(c)).collect();
        order.sort_by_key(|&e| (hst.len_exp(e), e));
        for c in order {
            go(hst, c, hst.children(c), edges, out);
            out.push(v);
        }
    }
    let mut out = Vec::new();
    go(hst, root, first, edges, &mut out);
    out
}

impl<T: Scalar> OnlineAlgorithm<T> for Kosd<T> {
    fn name(&self) -> String {
        "kosd".into()
    }

    fn start(&mut self, ctx: &Ctx<'_, T>) -> Result<()> {
        if ctx.k() == 0 {
            return Err(OsdError::NoServers);
        }
        self.tracks = (0..ctx.k()).map(|_| Track::new(ctx.now().clone())).collect();
        Ok(())
    }

    fn on_arrival(&mut self, ctx: &Ctx<'_, T>, _request: usize) -> Result<()> {
        self.sync(ctx)
    }

    fn next_decision_time(&mut self, ctx: &Ctx<'_, T>) -> Result<Option<T>> {
        self.sync(ctx)?;
        if self.trigger.is_some() || self.serve_in_place(ctx)?.is_some() {
            return Ok(Some(ctx.now().clone()));
        }
        let mut best: Option<T> = None;
        for track in &self.tracks {
            let mut probe = track.clone();
            if let (Advance::Stopped(t), _) = advance_waiting(&mut probe, None) {
                if best.as_ref().is_none_or(|b| t < *b) {
                    best = Some(t);
                }
            }
        }
        Ok(best)
    }

    fn on_decision(&mut self, ctx: &Ctx<'_, T>) -> Result<Option<ServiceAction<T>>> {
        self.sync(ctx)?;
        if let Some(a) = self.serve_in_place(ctx)? {
            for track in self.tracks.iter_mut() {
                for &r in &a.served {
                    track.remove_contributions(r);
                }
            }
            return Ok(Some(a));
        }
        match self.trigger.take() {
            Some((s, m)) => Ok(Some(self.serve(ctx, s, m)?)),
            None => Ok(None),
        }
    }

    fn diagnostics(&self) -> Diagnostics {
        self.diag.clone()
    }
}
