use std::collections::BTreeSet;

use super::accrual::{major_index, path_to_server, Advance, Elem, Flow, Track};
use super::plan::{build_plan, check_provenance, Plan};
use crate::error::{OsdError, Result};
use crate::metric_hst::{EdgeId, Hst, NodeId};
use crate::scalar::Scalar;
use crate::sim::{Ctx, Diagnostics, OnlineAlgorithm, PhaseInfo, Position, ServerRoute, ServiceAction};

/// Single-server preemptive service.
#[derive(Clone, Debug)]
pub struct Ps<T> {
    track: Track<T>,
    trigger: Option<Elem>,
    diag: Diagnostics,
    /// Constant in the per-service-edge travel diagnostic.
    pub c_diag: T,
}

impl<T: Scalar> Default for Ps<T> {
    fn default() -> Self {
        Ps::new()
    }
}

impl<T: Scalar> Ps<T> {
    pub fn new() -> Self {
        Ps { track: Track::new(T::zero()), trigger: None, diag: Diagnostics::default(), c_diag: T::of_usize(64) }
    }

    pub fn track(&self) -> &Track<T> {
        &self.track
    }
}

/// Accrual flows from every waiting request toward `server`, stopping at the
/// request's major element. Requests at the server itself get no flow.
pub(crate) fn waiting_flows<T: Scalar>(ctx: &Ctx<'_, T>, server: &Position<T>) -> Result<Vec<Flow<T>>> {
    let mut flows = Vec::new();
    for r in ctx.unserved() {
        let path = path_to_server(ctx.hst(), ctx.location(r)?, server);
        let Some(m) = major_index(&path) else { continue };
        flows.push(Flow { rid: r, path, stop: m + 1, schedule: ctx.schedule(r)? });
    }
    Ok(flows)
}

/// Advances until `limit` (or forever), stopping when a major saturates.
pub(crate) fn advance_waiting<T: Scalar>(track: &mut Track<T>, limit: Option<&T>) -> (Advance<T>, Option<Elem>) {
    let mut hit = None;
    let r = track.advance(limit, |t, e| {
        let is_major = t.flows.iter().any(|f| f.path[f.stop - 1].0 == e);
        if is_major {
            hit = Some(e);
        }
        is_major
    });
    (r, hit)
}

/// Shortest saturated major element with its capacity, lowest element on ties.
pub(crate) fn saturated_major<T: Scalar>(track: &Track<T>) -> Option<(T, Elem)> {
    let mut best: Option<(T, Elem)> = None;
    for e in track.flows.iter().map(|f| f.path[f.stop - 1].0).filter(|e| track.is_sat(e)) {
        let cap = track.counters[&e].cap.clone();
        if best.as_ref().is_none_or(|(c, b)| cap < *c || (cap == *c && e < *b)) {
            best = Some((cap, e));
        }
    }
    best
}

fn server_node<T: Scalar>(ctx: &Ctx<'_, T>) -> Result<NodeId> {
    ctx.positions()[0].node().ok_or_else(|| OsdError::AlgorithmContract("server left a node".into()))
}

/// Depth-first walk over `edges` from `root`, children in ascending id. Returns
/// the node sequence, returning to `root`.
pub(crate) fn dfs_nodes(hst: &Hst, root: NodeId, first: &[EdgeId], edges: &BTreeSet<EdgeId>) -> Vec<NodeId> {
    fn go(hst: &Hst, v: NodeId, kids: &[EdgeId], edges: &BTreeSet<EdgeId>, out: &mut Vec<NodeId>) {
        out.push(v);
        for &c in kids {
            if edges.contains(&c) {
                go(hst, c, hst.children(c), edges, out);
                out.push(v);
            }
        }
    }
    let mut out = Vec::new();
    go(hst, root, first, edges, &mut out);
    out
}

/// Edge joining two adjacent nodes.
pub(crate) fn edge_between(hst: &Hst, a: NodeId, b: NodeId) -> EdgeId {
    if hst.parent(a) == Some(b) {
        a
    } else {
        b
    }
}

/// Length of travel along `route` over edges with both endpoints in `nodes`.
pub(crate) fn travel_within<T: Scalar>(hst: &Hst, route: &[NodeId], nodes: &BTreeSet<NodeId>) -> T {
    route
        .windows(2)
        .filter(|w| nodes.contains(&w[0]) && nodes.contains(&w[1]))
        .fold(T::zero(), |a, w| a + hst.len::<T>(edge_between(hst, w[0], w[1])))
}

impl<T: Scalar> Ps<T> {
    fn sync(&mut self, ctx: &Ctx<'_, T>) -> Result<()> {
        if self.trigger.is_some() {
            return Ok(());
        }
        let now = ctx.now().clone();
        if self.track.now < now {
            if let (Advance::Stopped(t), _) = advance_waiting(&mut self.track, Some(&now)) {
                if t < now {
                    return Err(OsdError::Internal(format!(
                        "missed a saturation at {} before {}",
                        t.to_decimal_string(),
                        now.to_decimal_string()
                    )));
                }
            }
        }
        let server = Position::Node(server_node(ctx)?);
        self.track.set_flows(waiting_flows(ctx, &server)?);
        advance_waiting(&mut self.track, Some(&now));
        // Simultaneous saturations: the shortest major goes first.
        self.trigger = saturated_major(&self.track).map(|(_, e)| e);
        Ok(())
    }

    fn serve_in_place(&self, ctx: &Ctx<'_, T>) -> Result<Option<ServiceAction<T>>> {
        let s = server_node(ctx)?;
        let here: Vec<usize> = ctx.unserved().into_iter().filter(|&r| ctx.location(r).ok() == Some(s)).collect();
        if here.is_empty() {
            return Ok(None);
        }
        Ok(Some(ServiceAction {
            routes: vec![ServerRoute { server: 0, waypoints: vec![Position::Node(s)] }],
            served: here,
            info: PhaseInfo { trigger_server: Some(0), ..PhaseInfo::default() },
        }))
    }

    fn serve(&mut self, ctx: &Ctx<'_, T>, m: Elem) -> Result<ServiceAction<T>> {
        let hst = ctx.hst();
        let now = ctx.now().clone();
        let s = server_node(ctx)?;
        let server = Position::Node(s);
        // Commit every saturation of this instant before planning.
        self.track.advance(Some(&now), |_, _| false);
        let stamp = format!(" at t={}", now.to_decimal_string());
        let mut violations = Vec::new();
        check_provenance(hst, ctx, &self.track, &server, &mut violations);
        let plan = build_plan(hst, ctx, &self.track, &server, m)?;
        let route = self.route(hst, s, &plan);

        let visited: BTreeSet<NodeId> = route.iter().copied().collect();
        let served: Vec<usize> = ctx.unserved().into_iter().filter(|&r| ctx.location(r).is_ok_and(|l| visited.contains(&l))).collect();
        for r in &plan.critical {
            if !served.contains(r) {
                violations.push(format!("critical request {r} left unserved"));
            }
        }
        let mut resets: Vec<EdgeId> = route.windows(2).map(|w| edge_between(hst, w[0], w[1])).collect();
        resets.sort_unstable();
        resets.dedup();
        for &e in &resets {
            self.track.reset_edge(e);
        }
        for &r in &served {
            if !self.track.remove_contributions(r).is_zero() {
                violations.push(format!("served request {r} still held weight on an untraversed edge"));
            }
        }
        let h = T::of_usize(hst.height().max(1));
        for se in &plan.service_edges {
            let travel: T = travel_within(hst, &route, &se.nodes);
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

        Ok(ServiceAction {
            routes: vec![ServerRoute { server: 0, waypoints: route.into_iter().map(Position::Node).collect() }],
            served,
            info: PhaseInfo {
                trigger_server: Some(0),
                major: Some(m.edge),
                key_edges: plan.key_edges.iter().map(|k| k.edge).collect(),
                service_edges: plan.service_edges.iter().map(|k| k.elem.edge).collect(),
                resets,
            },
        })
    }

    /// Server to the far side of the major, then a depth-first walk over the
    /// plan's edges that stops below the last key edge visited.
    fn route(&self, hst: &Hst, s: NodeId, plan: &Plan<T>) -> Vec<NodeId> {
        let x = plan.scope.x;
        let mut route = hst.path_nodes(s, x);
        let dfs = dfs_nodes(hst, x, &plan.scope.first_layer, &plan.edges);
        let keys: BTreeSet<NodeId> = plan.key_edges.iter().filter(|k| **k != plan.scope.top).map(|k| k.edge).collect();
        // Bottom of the key edge entered last; the major's bottom is `x`.
        let last_key = dfs.iter().copied().rfind(|v| keys.contains(v)).unwrap_or(x);
        let cut = dfs.iter().rposition(|&v| v == last_key).unwrap_or(0);
        route.extend_from_slice(&dfs[1..=cut]);
        route
    }
}

impl<T: Scalar> OnlineAlgorithm<T> for Ps<T> {
    fn name(&self) -> String {
        "ps".into()
    }

    fn start(&mut self, ctx: &Ctx<'_, T>) -> Result<()> {
        if ctx.k() != 1 {
            return Err(OsdError::BadParams("the single-server algorithm needs k = 1".into()));
        }
        self.track = Track::new(ctx.now().clone());
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
        let mut probe = self.track.clone();
        match advance_waiting(&mut probe, None).0 {
            Advance::Stopped(t) => Ok(Some(t)),
            _ => Ok(None),
        }
    }

    fn on_decision(&mut self, ctx: &Ctx<'_, T>) -> Result<Option<ServiceAction<T>>> {
        self.sync(ctx)?;
        if let Some(a) = self.serve_in_place(ctx)? {
            return Ok(Some(a));
        }
        match self.trigger.take() {
            Some(m) => Ok(Some(self.serve(ctx, m)?)),
            None => Ok(None),
        }
    }

    fn diagnostics(&self) -> Diagnostics {
        self.diag.clone()
    }
}
