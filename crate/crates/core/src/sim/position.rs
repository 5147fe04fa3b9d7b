use crate::metric_hst::{Dir, EdgeId, Hst, NodeId};
use crate::scalar::Scalar;

/// Where a server stands: at a node, or strictly inside an edge.
#[derive(Clone, Debug, PartialEq)]
pub enum Position<T> {
    Node(NodeId),
    /// On `edge` at distance `from_child` from its child endpoint.
    Mid {
        edge: EdgeId,
        from_child: T,
    },
}

impl<T: Scalar> Position<T> {
    /// Collapses offsets at an endpoint to the node itself.
    pub fn normalized(self, hst: &Hst) -> Self {
        match self {
            Position::Mid { edge, from_child } => {
                if from_child <= T::zero() {
                    Position::Node(edge)
                } else if from_child >= hst.len::<T>(edge) {
                    Position::Node(hst.parent(edge).expect("edge has a parent"))
                } else {
                    Position::Mid { edge, from_child }
                }
            }
            p => p,
        }
    }

    pub fn node(&self) -> Option<NodeId> {
        match self {
            Position::Node(v) => Some(*v),
            Position::Mid { .. } => None,
        }
    }

    /// Nearby nodes with the distance to reach each one.
    pub fn anchors(&self, hst: &Hst) -> Vec<(NodeId, T)> {
        match self {
            Position::Node(v) => vec![(*v, T::zero())],
            Position::Mid { edge, from_child } => {
                let up = hst.len::<T>(*edge) - from_child.clone();
                vec![(*edge, from_child.clone()), (hst.parent(*edge).expect("edge has a parent"), up)]
            }
        }
    }

    /// True if the position is `v` or inside an edge whose both endpoints
    /// satisfy `inside`.
    pub fn within(&self, hst: &Hst, inside: impl Fn(NodeId) -> bool) -> bool {
        match self {
            Position::Node(v) => inside(*v),
            Position::Mid { edge, .. } => inside(*edge) && inside(hst.parent(*edge).expect("edge has a parent")),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Position::Node(v) => format!("{v}"),
            Position::Mid { edge, from_child } => format!("{edge}@{}", from_child.to_decimal_string()),
        }
    }
}

/// Shortest movement between two positions.
#[derive(Clone, Debug, PartialEq)]
pub struct Walk<T> {
    pub length: T,
    /// Nodes passed, in order, endpoints included when they are nodes.
    pub nodes: Vec<NodeId>,
    /// Edges moved along, fully or partly, in order.
    pub edges: Vec<EdgeId>,
}

pub fn walk<T: Scalar>(hst: &Hst, a: &Position<T>, b: &Position<T>) -> Walk<T> {
    if let (Position::Mid { edge: ea, from_child: xa }, Position::Mid { edge: eb, from_child: xb }) = (a, b) {
        if ea == eb {
            let length = (xa.clone() - xb.clone()).abs();
            let edges = if length.is_zero() { vec![] } else { vec![*ea] };
            return Walk { length, nodes: vec![], edges };
        }
    }
    let mut best: Option<(T, NodeId, NodeId)> = None;
    for (pa, oa) in a.anchors(hst) {
        for (pb, ob) in b.anchors(hst) {
            let d = oa.clone() + hst.distance::<T>(pa, pb) + ob.clone();
            if best.as_ref().is_none_or(|(bd, _, _)| d < *bd) {
                best = Some((d, pa, pb));
            }
        }
    }
    let (length, pa, pb) = best.expect("positions have anchors");
    let mut edges = Vec::new();
    if let Position::Mid { edge, .. } = a {
        edges.push(*edge);
    }
    edges.extend(hst.path(pa, pb).into_iter().map(|(e, _)| e));
    if let Position::Mid { edge, .. } = b {
        edges.push(*edge);
    }
    Walk { length, nodes: hst.path_nodes(pa, pb), edges }
}

pub fn distance<T: Scalar>(hst: &Hst, a: &Position<T>, b: &Position<T>) -> T {
    walk(hst, a, b).length
}

/// Position reached after moving `delta` from `from` toward `to` (clamped at `to`).
pub fn step_toward<T: Scalar>(hst: &Hst, from: &Position<T>, to: &Position<T>, delta: &T) -> Position<T> {
    let w = walk(hst, from, to);
    if *delta >= w.length {
        return to.clone();
    }
    if let (Position::Mid { edge: ea, from_child: xa }, Position::Mid { edge: eb, from_child: xb }) = (from, to) {
        if ea == eb {
            let x = if xb > xa { xa.clone() + delta.clone() } else { xa.clone() - delta.clone() };
            return Position::Mid { edge: *ea, from_child: x }.normalized(hst);
        }
    }
    // Leave the current edge first if mid-edge.
    let mut left = delta.clone();
    let mut cur = match from {
        Position::Node(v) => *v,
        Position::Mid { edge, from_child } => {
            let first = w.nodes[0];
            let (off, toward_child) =
                if first == *edge { (from_child.clone(), true) } else { (hst.len::<T>(*edge) - from_child.clone(), false) };
            if left < off {
                let x = if toward_child { from_child.clone() - left } else { from_child.clone() + left };
                return Position::Mid { edge: *edge, from_child: x }.normalized(hst);
            }
            left = left - off;
            first
        }
    };
    let last = *w.nodes.last().expect("walk passes a node");
    for (e, dir) in hst.path(cur, last) {
        let len = hst.len::<T>(e);
        if left < len {
            let x = match dir {
                Dir::Up => left.clone(),
                Dir::Down => len - left.clone(),
            };
            return Position::Mid { edge: e, from_child: x }.normalized(hst);
        }
        left = left - len;
        cur = match dir {
            Dir::Up => hst.parent(e).expect("edge has a parent"),
            Dir::Down => e,
        };
    }
    match to {
        Position::Node(_) => to.clone(),
        Position::Mid { edge, from_child } => {
            let x = if cur == *edge { left } else { hst.len::<T>(*edge) - left };
            debug_assert!(x <= *from_child || cur != *edge);
            Position::Mid { edge: *edge, from_child: x }.normalized(hst)
        }
    }
}

/// Distance from the current position to the next node along the walk to `to`.
pub fn next_junction<T: Scalar>(hst: &Hst, from: &Position<T>, to: &Position<T>) -> T {
    let w = walk(hst, from, to);
    if w.length.is_zero() {
        return T::zero();
    }
    match from {
        Position::Mid { edge, from_child } => match w.nodes.first() {
            Some(&n) if n == *edge => from_child.clone(),
            Some(_) => hst.len::<T>(*edge) - from_child.clone(),
            None => w.length,
        },
        Position::Node(v) => match hst.path(*v, *w.nodes.last().expect("walk passes a node")).first() {
            Some((e, _)) => T::min_of(hst.len::<T>(*e), w.length),
            None => w.length,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;
    use std::collections::BTreeMap;

    fn q(s: &str) -> Rational {
        Rational::parse_decimal(s).unwrap()
    }

    fn tree() -> Hst {
        // 0 -(8)- 1 -(2)- 2 ; 1 -(2)- 3 ; 0 -(4)- 4
        Hst::new(vec![None, Some(0), Some(1), Some(1), Some(0)], vec![0, 3, 1, 1, 2], BTreeMap::new()).unwrap()
    }

    #[test]
    fn mid_edge_distances() {
        let h = tree();
        let m = Position::Mid { edge: 1, from_child: q("3") };
        assert_eq!(distance(&h, &m, &Position::Node(2)), q("5"));
        assert_eq!(distance(&h, &m, &Position::Node(4)), q("9"));
        let m2 = Position::Mid { edge: 1, from_child: q("7") };
        assert_eq!(distance(&h, &m, &m2), q("4"));
        let m3 = Position::Mid { edge: 4, from_child: q("1") };
        assert_eq!(distance(&h, &m, &m3), q("8"));
    }

    #[test]
    fn stepping_crosses_junctions() {
        let h = tree();
        let p = step_toward(&h, &Position::Node(2), &Position::Node(4), &q("3"));
        assert_eq!(p, Position::Mid { edge: 1, from_child: q("1") });
        let p = step_toward(&h, &p, &Position::Node(4), &q("7"));
        assert_eq!(p, Position::Node(0));
        let p = step_toward(&h, &p, &Position::Node(4), &q("1"));
        assert_eq!(p, Position::Mid { edge: 4, from_child: q("3") });
        assert_eq!(next_junction::<Rational>(&h, &Position::Node(2), &Position::Node(4)), q("2"));
        assert_eq!(next_junction(&h, &Position::Mid { edge: 1, from_child: q("1") }, &Position::Node(4)), q("7"));
    }

    #[test]
    fn walk_records_nodes_and_edges() {
        let h = tree();
        let w = walk::<Rational>(&h, &Position::Node(2), &Position::Node(3));
        assert_eq!(w.nodes, vec![2, 1, 3]);
        assert_eq!(w.edges, vec![2, 3]);
        assert_eq!(w.length, q("4"));
    }
}
