//! Finite metrics, hierarchically separated trees and tree embeddings.
//!
//! Edge lengths of an [`Hst`] are stored as exponents: edge `e` has length
//! `2^len_exp(e)`. Every non-root node owns exactly one edge (to its parent),
//! so edge ids are child node ids.

mod frt;

use std::collections::BTreeMap;

pub use frt::{frt_embed, EmbeddingSample, PairDistortion};

use crate::error::{OsdError, Result};
use crate::scalar::Scalar;

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Clone, Debug, PartialEq)]
pub struct Metric<T> {
    names: Vec<String>,
    dist: Vec<Vec<T>>,
}

impl<T: Scalar> Metric<T> {
    pub fn new(names: Vec<String>, dist: Vec<Vec<T>>) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(OsdError::EmptyMetric);
        }
        if dist.len() != n || dist.iter().any(|row| row.len() != n) {
            return Err(OsdError::InvalidMetric(format!("distance matrix must be {n}x{n}")));
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in &names {
            if !seen.insert(name) {
                return Err(OsdError::InvalidMetric(format!("duplicate point {name}")));
            }
        }
        let tol = T::from_f64(1e-9).unwrap_or_else(T::zero);
        for u in 0..n {
            if !dist[u][u].is_zero() {
                return Err(OsdError::InvalidMetric(format!("dist({u},{u}) is not zero")));
            }
            for v in 0..n {
                if u != v && dist[u][v] <= T::zero() {
                    return Err(OsdError::InvalidMetric(format!("dist({u},{v}) is not positive")));
                }
                if dist[u][v] != dist[v][u] {
                    return Err(OsdError::InvalidMetric(format!("dist({u},{v}) is not symmetric")));
                }
                for w in 0..n {
                    if dist[u][w] > dist[u][v].clone() + dist[v][w].clone() + tol.clone() {
                        return Err(OsdError::InvalidMetric(format!("triangle inequality fails for ({u},{v},{w})")));
                    }
                }
            }
        }
        Ok(Metric { names, dist })
    }

    /// `n` points at pairwise distance `d`.
    pub fn uniform(n: usize, d: T) -> Result<Self> {
        let names = (0..n).map(|i| i.to_string()).collect();
        let dist = (0..n).map(|u| (0..n).map(|v| if u == v { T::zero() } else { d.clone() }).collect()).collect();
        Metric::new(names, dist)
    }

    /// Points on a line at the given coordinates.
    pub fn line(coords: &[T]) -> Result<Self> {
        let names = (0..coords.len()).map(|i| i.to_string()).collect();
        let dist = coords.iter().map(|a| coords.iter().map(|b| (a.clone() - b.clone()).abs()).collect()).collect();
        Metric::new(names, dist)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn dist(&self, u: usize, v: usize) -> &T {
        &self.dist[u][v]
    }

    pub fn matrix(&self) -> &[Vec<T>] {
        &self.dist
    }
}

/// Rooted tree with arbitrary positive edge lengths, the input to
/// [`round_edges_down`]. `len[root]` is ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedTree<T> {
    pub parent: Vec<Option<NodeId>>,
    pub len: Vec<T>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HstViolation {
    NotPowerOfTwo { edge: EdgeId },
    NonPositiveLength { edge: EdgeId },
    Ratio { edge: EdgeId, parent: EdgeId },
    LeafMapTarget { point: String, node: NodeId },
}

impl std::fmt::Display for HstViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HstViolation::NotPowerOfTwo { edge } => write!(f, "edge {edge}: length is not a power of two"),
            HstViolation::NonPositiveLength { edge } => write!(f, "edge {edge}: length is not positive"),
            HstViolation::Ratio { edge, parent } => {
                write!(f, "edge {edge}: longer than half of parent edge {parent}")
            }
            HstViolation::LeafMapTarget { point, node } => {
                write!(f, "point {point} maps to non-leaf node {node}")
            }
        }
    }
}

fn check_structure(parent: &[Option<NodeId>]) -> Result<NodeId> {
    let n = parent.len();
    if n == 0 {
        return Err(OsdError::NonTree("no nodes".into()));
    }
    let roots: Vec<_> = (0..n).filter(|&v| parent[v].is_none()).collect();
    if roots.len() != 1 {
        return Err(OsdError::NonTree(format!("expected one root, found {}", roots.len())));
    }
    for (v, p) in parent.iter().enumerate() {
        if let Some(p) = p {
            if *p >= n {
                return Err(OsdError::UnknownNode(*p));
            }
        }
        // Walking up must reach the root within n steps.
        let mut cur = v;
        let mut steps = 0;
        while let Some(p) = parent[cur] {
            cur = p;
            steps += 1;
            if steps > n {
                return Err(OsdError::NonTree(format!("cycle through node {v}")));
            }
        }
    }
    Ok(roots[0])
}

/// Violations of the HST rules on a raw weighted tree.
pub fn validate_tree<T: Scalar>(tree: &WeightedTree<T>) -> Vec<HstViolation> {
    let mut out = Vec::new();
    for (v, p) in tree.parent.iter().enumerate() {
        if p.is_none() {
            continue;
        }
        let len = &tree.len[v];
        if *len <= T::zero() {
            out.push(HstViolation::NonPositiveLength { edge: v });
            continue;
        }
        let is_pow2 = len.floor_log2().map(|i| T::pow2(i) == *len).unwrap_or(false);
        if !is_pow2 {
            out.push(HstViolation::NotPowerOfTwo { edge: v });
        }
        if let Some(pp) = p.and_then(|p| tree.parent[p].map(|_| p)) {
            if len.clone() + len.clone() > tree.len[pp] {
                out.push(HstViolation::Ratio { edge: v, parent: pp });
            }
        }
    }
    out
}

/// Replaces every length by the largest power of two not exceeding it.
pub fn round_edges_down<T: Scalar>(tree: &WeightedTree<T>) -> Result<Hst> {
    check_structure(&tree.parent)?;
    if tree.len.len() != tree.parent.len() {
        return Err(OsdError::NonTree("length vector size mismatch".into()));
    }
    let mut exps = vec![0u32; tree.parent.len()];
    for (v, p) in tree.parent.iter().enumerate() {
        if p.is_some() {
            match tree.len[v].floor_log2() {
                Some(i) if i >= 0 => exps[v] = i as u32,
                _ => return Err(OsdError::InvalidLength(v)),
            }
        }
    }
    let hst = Hst::new(tree.parent.clone(), exps, BTreeMap::new())?;
    if let Some(HstViolation::Ratio { edge, parent }) = validate_hst(&hst).into_iter().next() {
        return Err(OsdError::RatioViolation { edge, parent });
    }
    Ok(hst)
}

/// Direction in which a path crosses an edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dir {
    Up,
    Down,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hst {
    root: NodeId,
    parent: Vec<Option<NodeId>>,
    len_exp: Vec<u32>,
    children: Vec<Vec<NodeId>>,
    level: Vec<usize>,
    height: usize,
    leaf_map: BTreeMap<String, NodeId>,
}

impl Hst {
    /// Builds the tree; HST length rules are checked separately by [`validate_hst`].
    pub fn new(parent: Vec<Option<NodeId>>, len_exp: Vec<u32>, leaf_map: BTreeMap<String, NodeId>) -> Result<Self> {
        let root = check_structure(&parent)?;
        let n = parent.len();
        if len_exp.len() != n {
            return Err(OsdError::NonTree("length vector size mismatch".into()));
        }
        let mut children = vec![Vec::new(); n];
        for (v, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(v);
            }
        }
        let mut level = vec![0usize; n];
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            for &c in &children[v] {
                level[c] = level[v] + 1;
                stack.push(c);
            }
        }
        let height = level.iter().copied().max().unwrap_or(0);
        for &node in leaf_map.values() {
            if node >= n {
                return Err(OsdError::UnknownNode(node));
            }
        }
        let mut len_exp = len_exp;
        len_exp[root] = 0;
        Ok(Hst { root, parent, len_exp, children, level, height, leaf_map })
    }

    /// Star: root 0 with one leaf per exponent, leaf `i + 1` for entry `i`.
    pub fn star(exps: &[u32]) -> Self {
        let mut parent = vec![None];
        let mut len = vec![0];
        for &e in exps {
            parent.push(Some(0));
            len.push(e);
        }
        Hst::new(parent, len, BTreeMap::new()).expect("a star is a tree")
    }

    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.parent[v]
    }

    pub fn parents(&self) -> &[Option<NodeId>] {
        &self.parent
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.children[v]
    }

    pub fn is_leaf(&self, v: NodeId) -> bool {
        self.children[v].is_empty() && v != self.root || self.node_count() == 1
    }

    pub fn leaves(&self) -> Vec<NodeId> {
        (0..self.node_count()).filter(|&v| self.is_leaf(v)).collect()
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.node_count()).filter(move |&v| v != self.root)
    }

    pub fn contains(&self, v: NodeId) -> bool {
        v < self.node_count()
    }

    pub fn is_edge(&self, e: EdgeId) -> bool {
        e < self.node_count() && e != self.root
    }

    pub fn len_exp(&self, e: EdgeId) -> u32 {
        self.len_exp[e]
    }

    pub fn len_exps(&self) -> &[u32] {
        &self.len_exp
    }

    pub fn len<T: Scalar>(&self, e: EdgeId) -> T {
        T::pow2(self.len_exp[e] as i32)
    }

    /// Number of edges from the root to `v`.
    pub fn level(&self, v: NodeId) -> usize {
        self.level[v]
    }

    /// Maximum number of edges on a root-to-leaf path.
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn leaf_map(&self) -> &BTreeMap<String, NodeId> {
        &self.leaf_map
    }

    pub fn with_leaf_map(mut self, leaf_map: BTreeMap<String, NodeId>) -> Self {
        self.leaf_map = leaf_map;
        self
    }

    /// True if `a` is `d` or an ancestor of `d`.
    pub fn is_ancestor(&self, a: NodeId, d: NodeId) -> bool {
        let mut cur = d;
        loop {
            if cur == a {
                return true;
            }
            if self.level[cur] <= self.level[a] {
                return false;
            }
            match self.parent[cur] {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }

    pub fn lca(&self, u: NodeId, v: NodeId) -> NodeId {
        let (mut a, mut b) = (u, v);
        while self.level[a] > self.level[b] {
            a = self.parent[a].expect("non-root has parent");
        }
        while self.level[b] > self.level[a] {
            b = self.parent[b].expect("non-root has parent");
        }
        while a != b {
            a = self.parent[a].expect("non-root has parent");
            b = self.parent[b].expect("non-root has parent");
        }
        a
    }

    /// Edges on the path from `u` to `v`, in walking order.
    pub fn path(&self, u: NodeId, v: NodeId) -> Vec<(EdgeId, Dir)> {
        let m = self.lca(u, v);
        let mut out = Vec::new();
        let mut cur = u;
        while cur != m {
            out.push((cur, Dir::Up));
            cur = self.parent[cur].expect("below lca");
        }
        let mut down = Vec::new();
        cur = v;
        while cur != m {
            down.push((cur, Dir::Down));
            cur = self.parent[cur].expect("below lca");
        }
        out.extend(down.into_iter().rev());
        out
    }

    /// Nodes visited walking from `u` to `v`, both ends included.
    pub fn path_nodes(&self, u: NodeId, v: NodeId) -> Vec<NodeId> {
        let mut out = vec![u];
        for (e, dir) in self.path(u, v) {
            out.push(match dir {
                Dir::Up => self.parent[e].expect("edge has parent"),
                Dir::Down => e,
            });
        }
        out
    }

    pub fn distance<T: Scalar>(&self, u: NodeId, v: NodeId) -> T {
        self.path(u, v).into_iter().fold(T::zero(), |acc, (e, _)| acc + self.len::<T>(e))
    }

    /// Nodes of the subtree rooted at `v`, in preorder with ascending child ids.
    pub fn subtree(&self, v: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            out.push(x);
            for &c in self.children[x].iter().rev() {
                stack.push(c);
            }
        }
        out
    }

    pub fn to_weighted_tree<T: Scalar>(&self) -> WeightedTree<T> {
        WeightedTree {
            parent: self.parent.clone(),
            len: (0..self.node_count()).map(|v| if v == self.root { T::zero() } else { self.len(v) }).collect(),
        }
    }
}

/// Sum of edge lengths on the `u`-`v` path.
pub fn tree_distance<T: Scalar>(hst: &Hst, u: NodeId, v: NodeId) -> Result<T> {
    for x in [u, v] {
        if !hst.contains(x) {
            return Err(OsdError::UnknownNode(x));
        }
    }
    Ok(hst.distance(u, v))
}

/// Empty iff every child edge is at most half its parent edge and the leaf map
/// targets leaves.
pub fn validate_hst(hst: &Hst) -> Vec<HstViolation> {
    let mut out = Vec::new();
    for e in hst.edges() {
        if let Some(p) = hst.parent(e) {
            if p != hst.root() && hst.len_exp(e) + 1 > hst.len_exp(p) {
                out.push(HstViolation::Ratio { edge: e, parent: p });
            }
        }
    }
    for (point, &node) in hst.leaf_map() {
        if !hst.is_leaf(node) {
            out.push(HstViolation::LeafMapTarget { point: point.clone(), node });
        }
    }
    out
}
