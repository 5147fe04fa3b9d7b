use std::collections::{BTreeMap, BTreeSet};

use crate::error::{OsdError, Result};
use crate::metric_hst::{EdgeId, Hst, NodeId};
use crate::scalar::Scalar;

/// Edges of the smallest subtree spanning `nodes`.
pub fn steiner_edges(hst: &Hst, nodes: &[NodeId]) -> BTreeSet<EdgeId> {
    let mut out = BTreeSet::new();
    if let Some((&first, rest)) = nodes.split_first() {
        for &v in rest {
            out.extend(hst.path(first, v).into_iter().map(|(e, _)| e));
        }
    }
    out
}

pub fn steiner_weight<T: Scalar>(hst: &Hst, nodes: &[NodeId]) -> T {
    steiner_edges(hst, nodes).into_iter().fold(T::zero(), |a, e| a + hst.len::<T>(e))
}

/// Cheapest walk from `start` visiting every target. Returns the cost and the
/// end node: the farthest target, lowest id on ties.
pub fn steiner_tour_cost<T: Scalar>(hst: &Hst, start: NodeId, targets: &[NodeId]) -> Result<(T, NodeId)> {
    for &v in std::iter::once(&start).chain(targets) {
        if !hst.contains(v) {
            return Err(OsdError::UnknownNode(v));
        }
    }
    let mut best: Option<(T, NodeId)> = None;
    for &t in targets {
        let d: T = hst.distance(start, t);
        if best.as_ref().is_none_or(|(bd, bt)| d > *bd || (d == *bd && t < *bt)) {
            best = Some((d, t));
        }
    }
    let (far, end) = best.unwrap_or((T::zero(), start));
    let mut nodes = vec![start];
    nodes.extend_from_slice(targets);
    let total = steiner_weight::<T>(hst, &nodes);
    Ok((total.clone() + total - far, end))
}

/// Targets in the order a tour from `start` ending at `end` visits them: depth
/// first over the spanning subtree, the branch toward `end` last.
pub fn tour_order(hst: &Hst, start: NodeId, targets: &[NodeId], end: NodeId) -> Vec<NodeId> {
    let mut nodes = vec![start];
    nodes.extend_from_slice(targets);
    let edges = steiner_edges(hst, &nodes);
    let mut adj: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for e in edges {
        let p = hst.parent(e).expect("edge has a parent");
        adj.entry(e).or_default().push(p);
        adj.entry(p).or_default().push(e);
    }
    let toward_end: BTreeSet<NodeId> = hst.path_nodes(start, end).into_iter().collect();
    let wanted: BTreeSet<NodeId> = targets.iter().copied().collect();
    let mut order = Vec::new();
    let mut seen = BTreeSet::new();
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        if !seen.insert(v) {
            continue;
        }
        if wanted.contains(&v) && v != end {
            order.push(v);
        }
        let mut next: Vec<NodeId> = adj.get(&v).map(|n| n.iter().copied().filter(|u| !seen.contains(u)).collect()).unwrap_or_default();
        // Popped first = visited first; the branch toward `end` goes last.
        next.sort_by_key(|u| (toward_end.contains(u), *u));
        stack.extend(next.into_iter().rev());
    }
    if wanted.contains(&end) {
        order.push(end);
    }
    order
}
