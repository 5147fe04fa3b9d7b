//! Serving-phase planning: relevant subtree, critical subtree, key edges and
//! recursive time forwarding.

use std::collections::{BTreeMap, BTreeSet};

use super::accrual::{major_index, path_to_server, server_below, Advance, Elem, Flow, Part, Track};
use super::subset::subset_exact;
use crate::error::{OsdError, Result};
use crate::metric_hst::{EdgeId, Hst, NodeId};
use crate::scalar::Scalar;
use crate::sim::{Ctx, Position};

/// The request region `X` attached to a service element `top`: the far
/// endpoint `x` plus the subtrees hanging from `x` through `first_layer`.
#[derive(Clone, Debug, PartialEq)]
pub struct Scope<T> {
    pub top: Elem,
    pub top_len: T,
    pub x: NodeId,
    pub first_layer: Vec<EdgeId>,
    pub nodes: BTreeSet<NodeId>,
}

impl<T: Scalar> Scope<T> {
    /// Region of requests whose major element is `m` for a server at `server`.
    pub fn for_major(hst: &Hst, server: &Position<T>, m: Elem, m_len: T) -> Self {
        let x = match m.part {
            Part::Whole if server_below(hst, server, m.edge) => hst.parent(m.edge).expect("edge has a parent"),
            Part::Whole | Part::Lower => m.edge,
            Part::Upper => hst.parent(m.edge).expect("edge has a parent"),
        };
        // The parent edge of `x` never qualifies: it is longer than every
        // child edge of `x`, and `m` is one of those or a piece of one.
        let first_layer: Vec<EdgeId> =
            hst.children(x).iter().copied().filter(|&c| !server_below(hst, server, c) && hst.len::<T>(c) < m_len).collect();
        let mut nodes = BTreeSet::from([x]);
        for &c in &first_layer {
            nodes.extend(hst.subtree(c));
        }
        Scope { top: m, top_len: m_len, x, first_layer, nodes }
    }

    /// The subtree below edge `k`.
    pub fn below(hst: &Hst, k: EdgeId) -> Self {
        Scope {
            top: Elem::whole(k),
            top_len: hst.len::<T>(k),
            x: k,
            first_layer: hst.children(k).to_vec(),
            nodes: hst.subtree(k).into_iter().collect(),
        }
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.nodes.contains(&v)
    }

    /// Children of `c` in the scope tree; `None` stands for the top.
    pub fn children<'a>(&'a self, hst: &'a Hst, c: Option<EdgeId>) -> &'a [EdgeId] {
        match c {
            None => &self.first_layer,
            Some(e) => hst.children(e),
        }
    }

    fn len_of(&self, hst: &Hst, c: Option<EdgeId>) -> T {
        match c {
            None => self.top_len.clone(),
            Some(e) => hst.len::<T>(e),
        }
    }

    fn elem_of(&self, c: Option<EdgeId>) -> Elem {
        match c {
            None => self.top,
            Some(e) => Elem::whole(e),
        }
    }

    /// Unserved arrived requests located in the scope.
    pub fn requests(&self, ctx: &Ctx<'_, T>) -> Vec<usize> {
        ctx.unserved().into_iter().filter(|&r| ctx.location(r).is_ok_and(|l| self.contains(l))).collect()
    }

    /// Scope edges from `loc` up to `x`.
    pub fn path_up(&self, hst: &Hst, loc: NodeId) -> Vec<EdgeId> {
        hst.path(loc, self.x).into_iter().map(|(e, _)| e).collect()
    }

    pub fn is_critical(&self, hst: &Hst, track: &Track<T>, loc: NodeId) -> bool {
        self.path_up(hst, loc).iter().all(|&e| track.is_sat(&Elem::whole(e)))
    }

    pub fn f_value(&self, hst: &Hst, track: &Track<T>, c: Option<EdgeId>) -> T {
        if !track.is_sat(&self.elem_of(c)) {
            return T::zero();
        }
        T::max_of(self.len_of(hst, c), self.children_f(hst, track, c))
    }

    fn children_f(&self, hst: &Hst, track: &Track<T>, c: Option<EdgeId>) -> T {
        self.children(hst, c).iter().fold(T::zero(), |acc, &ch| acc + self.f_value(hst, track, Some(ch)))
    }

    pub fn over_by_children(&self, hst: &Hst, track: &Track<T>, c: Option<EdgeId>) -> bool {
        track.is_sat(&self.elem_of(c)) && self.children_f(hst, track, c) >= self.len_of(hst, c)
    }
}

/// Key edges as a maximum-length cut of the critical tree; ties prefer the
/// deeper cut. Returns the cut and its total length.
pub fn key_edges<T: Scalar>(hst: &Hst, scope: &Scope<T>, c_edges: &BTreeSet<EdgeId>) -> (Vec<Elem>, T) {
    fn best<T: Scalar>(hst: &Hst, scope: &Scope<T>, c_edges: &BTreeSet<EdgeId>, c: Option<EdgeId>) -> (T, Vec<Elem>) {
        let kids: Vec<EdgeId> = scope.children(hst, c).iter().copied().filter(|e| c_edges.contains(e)).collect();
        let own = scope.len_of(hst, c);
        if kids.is_empty() {
            return (own, vec![scope.elem_of(c)]);
        }
        let mut sum = T::zero();
        let mut cut = Vec::new();
        for k in kids {
            let (v, mut sub) = best(hst, scope, c_edges, Some(k));
            sum = sum + v;
            cut.append(&mut sub);
        }
        if sum >= own {
            (sum, cut)
        } else {
            (own, vec![scope.elem_of(c)])
        }
    }
    let (total, cut) = best(hst, scope, c_edges, None);
    (cut, total)
}

/// Number of layers of the critical tree, counting the top.
fn layers<T: Scalar>(hst: &Hst, scope: &Scope<T>, c_edges: &BTreeSet<EdgeId>, c: Option<EdgeId>) -> usize {
    1 + scope.children(hst, c).iter().filter(|e| c_edges.contains(e)).map(|&e| layers(hst, scope, c_edges, Some(e))).max().unwrap_or(0)
}

/// A service element with its request region, kept for diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct ServiceEdge<T> {
    pub elem: Elem,
    pub len: T,
    pub nodes: BTreeSet<NodeId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plan<T> {
    pub scope: Scope<T>,
    pub critical: Vec<usize>,
    pub critical_edges: BTreeSet<EdgeId>,
    pub key_edges: Vec<Elem>,
    /// Scope edges to traverse below `x`.
    pub edges: BTreeSet<EdgeId>,
    pub service_edges: Vec<ServiceEdge<T>>,
    pub violations: Vec<String>,
    pub notes: Vec<String>,
}

/// Builds the serving plan for major element `m` from the counters in
/// `track`, which must have every pending saturation committed.
pub fn build_plan<T: Scalar>(hst: &Hst, ctx: &Ctx<'_, T>, track: &Track<T>, server: &Position<T>, m: Elem) -> Result<Plan<T>> {
    let m_len = track
        .counters
        .get(&m)
        .map(|c| c.cap.clone())
        .ok_or_else(|| OsdError::Internal(format!("major {} has no counter", m.describe())))?;
    if !track.is_sat(&m) {
        return Err(OsdError::NotSaturated(m.edge));
    }
    let scope = Scope::for_major(hst, server, m, m_len.clone());
    let mut violations = Vec::new();
    let mut notes = Vec::new();
    check_scope(hst, server, &scope, &mut violations);

    let in_scope = scope.requests(ctx);
    let mut critical = Vec::new();
    let mut critical_edges = BTreeSet::new();
    for &r in &in_scope {
        let loc = ctx.location(r)?;
        if scope.is_critical(hst, track, loc) {
            critical.push(r);
            critical_edges.extend(scope.path_up(hst, loc));
        }
    }
    if critical.is_empty() {
        violations.push(format!("major {} saturated without critical requests", m.describe()));
    }
    let (keys, key_sum) = key_edges(hst, &scope, &critical_edges);
    check_keys(hst, &scope, &critical_edges, &keys, &key_sum, &mut violations, &mut notes);

    let mut edges = BTreeSet::new();
    let mut service_edges = Vec::new();
    for k in &keys {
        let sub = if *k == m {
            scope.clone()
        } else {
            edges.extend(scope.path_up(hst, k.edge));
            Scope::below(hst, k.edge)
        };
        let out = time_forward(hst, ctx, track.clone(), &sub)?;
        edges.extend(out.edges);
        service_edges.extend(out.service_edges);
        violations.extend(out.violations);
        notes.extend(out.notes);
    }
    Ok(Plan { scope, critical, critical_edges, key_edges: keys, edges, service_edges, violations, notes })
}

fn check_scope<T: Scalar>(hst: &Hst, server: &Position<T>, scope: &Scope<T>, violations: &mut Vec<String>) {
    let m = scope.top;
    for v in 0..hst.node_count() {
        let path = path_to_server(hst, v, server);
        let is_major = major_index(&path).is_some_and(|i| path[i].0 == m);
        if is_major != scope.contains(v) {
            violations.push(format!("relevant subtree of {} disagrees at node {v}", m.describe()));
            return;
        }
    }
    if scope.x != m.edge && Some(scope.x) != hst.parent(m.edge) {
        violations.push(format!("relevant subtree of {} is not rooted at its endpoint", m.describe()));
    }
    if m.part == Part::Whole {
        let two = T::one() + T::one();
        for &v in &scope.nodes {
            if v != scope.x && hst.len::<T>(v) * two.clone() > scope.top_len {
                violations.push(format!("edge {v} is longer than half of major {}", m.describe()));
            }
        }
    }
}

fn check_keys<T: Scalar>(
    hst: &Hst,
    scope: &Scope<T>,
    c_edges: &BTreeSet<EdgeId>,
    keys: &[Elem],
    key_sum: &T,
    violations: &mut Vec<String>,
    notes: &mut Vec<String>,
) {
    let top = scope.top;
    let is_top_cut = keys == [top];
    if !is_top_cut {
        let set: BTreeSet<EdgeId> = keys.iter().map(|k| k.edge).collect();
        for &a in &set {
            for &b in &set {
                if a != b && hst.is_ancestor(a, b) {
                    violations.push(format!("key edges {a} and {b} are nested"));
                }
            }
        }
        // Every leaf of the critical tree must be cut exactly once.
        for &e in c_edges {
            let is_leaf = !hst.children(e).iter().any(|c| c_edges.contains(c));
            if is_leaf {
                let hits = scope.path_up(hst, e).iter().filter(|x| set.contains(x)).count();
                if hits != 1 {
                    violations.push(format!("critical branch at {e} crosses {hits} key edges"));
                }
            }
        }
    }
    if *key_sum < scope.top_len {
        violations.push(format!("key edges of {} are shorter than the major", top.describe()));
    }
    let total = c_edges.iter().fold(scope.top_len.clone(), |a, &e| a + hst.len::<T>(e));
    let depth = layers(hst, scope, c_edges, None);
    if key_sum.clone() * T::of_usize(depth) < total {
        violations.push(format!("key edges of {} cover less than one layer's share", top.describe()));
    }
    let h = hst.height().max(1);
    if key_sum.clone() * T::of_usize(h) < total {
        notes.push(format!(
            "key edges of {} total {} against critical tree {} at height {h}",
            top.describe(),
            key_sum.to_decimal_string(),
            total.to_decimal_string()
        ));
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forwarded<T> {
    pub edges: BTreeSet<EdgeId>,
    pub service_edges: Vec<ServiceEdge<T>>,
    pub violations: Vec<String>,
    pub notes: Vec<String>,
}

/// Forwards time in `scope` until its top is over-saturated and returns the
/// edges to traverse below `x`. `track` is a private copy of the counters.
pub fn time_forward<T: Scalar>(hst: &Hst, ctx: &Ctx<'_, T>, mut track: Track<T>, scope: &Scope<T>) -> Result<Forwarded<T>> {
    let mut out = Forwarded { edges: BTreeSet::new(), service_edges: Vec::new(), violations: Vec::new(), notes: Vec::new() };
    out.service_edges.push(ServiceEdge { elem: scope.top, len: scope.top_len.clone(), nodes: scope.nodes.clone() });
    let rids = scope.requests(ctx);
    let mut locs = BTreeMap::new();
    let mut flows = Vec::new();
    for &r in &rids {
        let loc = ctx.location(r)?;
        locs.insert(r, loc);
        let mut path: Vec<(Elem, T)> = scope.path_up(hst, loc).into_iter().map(|e| (Elem::whole(e), hst.len::<T>(e))).collect();
        path.push((scope.top, scope.top_len.clone()));
        let stop = path.len();
        flows.push(Flow { rid: r, path, stop, schedule: ctx.schedule(r)? });
    }
    track.set_flows(flows);

    let over = |t: &Track<T>| scope.over_by_children(hst, t, None) || locs.values().all(|&l| scope.is_critical(hst, t, l));
    let exhausted = if over(&track) {
        false
    } else {
        match track.advance(None, |t, _| over(t)) {
            Advance::Stopped(_) => false,
            Advance::Exhausted => true,
            Advance::ReachedLimit => return Err(OsdError::Internal("unbounded forwarding hit a limit".into())),
        }
    };

    let mut noncritical = false;
    for &loc in locs.values() {
        if scope.is_critical(hst, &track, loc) {
            out.edges.extend(scope.path_up(hst, loc));
        } else {
            noncritical = true;
        }
    }
    if exhausted {
        if noncritical {
            out.notes.push(format!("forwarding on {} ran out of accrual before over-saturation", scope.top.describe()));
        }
        return Ok(out);
    }
    if !noncritical {
        return Ok(out);
    }

    let mut g = Vec::new();
    let mut stack = vec![None];
    while let Some(c) = stack.pop() {
        for &ch in scope.children(hst, c) {
            if !track.is_sat(&Elem::whole(ch)) {
                continue;
            }
            if scope.over_by_children(hst, &track, Some(ch)) {
                stack.push(Some(ch));
            } else {
                g.push(ch);
            }
        }
    }
    g.sort_unstable();
    let lengths: Vec<T> = g.iter().map(|&e| hst.len::<T>(e)).collect();
    let g_sum = lengths.iter().cloned().fold(T::zero(), |a, b| a + b);
    let two = T::one() + T::one();
    if g_sum.clone() * two > scope.top_len.clone() * T::of_usize(3) {
        out.violations.push(format!(
            "frontier below {} totals {}, more than 1.5 times its length",
            scope.top.describe(),
            g_sum.to_decimal_string()
        ));
    }
    let target = T::pow2(scope.top_len.floor_log2().expect("lengths are positive"));
    let chosen: Vec<usize> = match lengths.iter().position(|l| *l == target) {
        Some(i) => vec![i],
        None => subset_exact(&lengths, &target)?,
    };
    let h_sum = chosen.iter().fold(T::zero(), |a, &i| a + lengths[i].clone());
    if h_sum != target {
        out.violations.push(format!("selected edges below {} do not sum to its length", scope.top.describe()));
    }
    for i in chosen {
        let h = g[i];
        out.edges.extend(scope.path_up(hst, h));
        let sub = time_forward(hst, ctx, track.clone(), &Scope::below(hst, h))?;
        out.edges.extend(sub.edges);
        out.service_edges.extend(sub.service_edges);
        out.violations.extend(sub.violations);
        out.notes.extend(sub.notes);
    }
    Ok(out)
}

/// Checks that each counter's weight comes from requests it may legitimately
/// hold for a server at `server`.
pub fn check_provenance<T: Scalar>(hst: &Hst, ctx: &Ctx<'_, T>, track: &Track<T>, server: &Position<T>, violations: &mut Vec<String>) {
    for (e, c) in &track.counters {
        let sum = c.contrib.values().cloned().fold(T::zero(), |a, b| a + b);
        if sum != c.w && T::EXACT {
            violations.push(format!("counter {} weight differs from its contributions", e.describe()));
        }
        if c.w < T::zero() || c.w > c.cap {
            violations.push(format!("counter {} is out of range", e.describe()));
        }
        for &r in c.contrib.keys() {
            let Ok(loc) = ctx.location(r) else { continue };
            let ok = match e.part {
                Part::Whole if server_below(hst, server, e.edge) => {
                    let path = path_to_server(hst, loc, server);
                    major_index(&path).is_some_and(|i| path[i].0 == *e)
                }
                Part::Whole | Part::Lower => hst.is_ancestor(e.edge, loc),
                Part::Upper => !hst.is_ancestor(e.edge, loc),
            };
            if !ok {
                violations.push(format!("counter {} holds weight of request {r} from outside its region", e.describe()));
            }
        }
    }
}
