use std::collections::BTreeMap;
use std::sync::Arc;

use super::penalty::PenaltyFn;
use crate::error::{OsdError, Result};
use crate::metric_hst::{frt_embed, validate_hst, Hst, Metric, NodeId};
use crate::scalar::Scalar;

/// A request at a location of the instance's space. Locations are node ids for
/// HST spaces, point indices for metrics and page indices for page sets.
#[derive(Clone, Debug, PartialEq)]
pub struct Request<T> {
    pub id: usize,
    pub loc: usize,
    pub arrival: T,
    pub penalty: PenaltyFn<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Space<T> {
    Metric(Metric<T>),
    Hst(Hst),
    /// `n` pages at pairwise distance 1.
    Pages(usize),
}

impl<T: Scalar> Space<T> {
    pub fn location_count(&self) -> usize {
        match self {
            Space::Metric(m) => m.len(),
            Space::Hst(h) => h.node_count(),
            Space::Pages(n) => *n,
        }
    }

    pub fn distance(&self, a: usize, b: usize) -> T {
        match self {
            Space::Metric(m) => m.dist(a, b).clone(),
            Space::Hst(h) => h.distance(a, b),
            Space::Pages(_) => {
                if a == b {
                    T::zero()
                } else {
                    T::one()
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClairvoyanceMode {
    Clairvoyant,
    Nonclairvoyant,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance<T> {
    pub space: Space<T>,
    pub k: usize,
    pub start: Vec<usize>,
    pub requests: Vec<Request<T>>,
}

impl<T: Scalar> Instance<T> {
    pub fn new(space: Space<T>, k: usize, start: Vec<usize>, requests: Vec<Request<T>>) -> Result<Self> {
        let inst = Instance { space, k, start, requests };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(OsdError::Schema("k must be at least 1".into()));
        }
        if self.start.len() != self.k {
            return Err(OsdError::Schema(format!("start lists {} positions but k = {}", self.start.len(), self.k)));
        }
        if let Space::Hst(h) = &self.space {
            if let Some(v) = validate_hst(h).first() {
                return Err(OsdError::InvariantViolation(format!("space: {v}")));
            }
        }
        if let Space::Pages(0) = self.space {
            return Err(OsdError::Schema("pages must be positive".into()));
        }
        let count = self.space.location_count();
        for (i, &s) in self.start.iter().enumerate() {
            if s >= count {
                return Err(OsdError::InvariantViolation(format!("start[{i}] = {s} is not a location")));
            }
        }
        for (i, r) in self.requests.iter().enumerate() {
            if r.id != i {
                return Err(OsdError::Schema(format!("request ids must be 0..n-1 in order; found {} at {i}", r.id)));
            }
            if r.arrival.is_negative() {
                return Err(OsdError::InvariantViolation(format!("request {i}: negative arrival")));
            }
            if i > 0 && r.arrival < self.requests[i - 1].arrival {
                return Err(OsdError::InvariantViolation(format!("request {i}: arrivals must be nondecreasing")));
            }
            if r.loc >= count {
                return Err(OsdError::InvariantViolation(format!("request {i}: unknown location {}", r.loc)));
            }
            if let Space::Hst(h) = &self.space {
                if !h.is_leaf(r.loc) {
                    return Err(OsdError::InvariantViolation(format!("request {i}: node {} is not a leaf", r.loc)));
                }
            }
        }
        Ok(())
    }

    /// The HST view every online algorithm runs on. Metrics are embedded with
    /// the given seed; page sets become a unit star.
    pub fn to_tree(&self, seed: u64) -> Result<TreeInstance<T>> {
        let (hst, scale, origin, node_of): (Hst, T, Origin<T>, Vec<NodeId>) = match &self.space {
            Space::Hst(h) => (h.clone(), T::one(), Origin::Tree, (0..h.node_count()).collect()),
            Space::Metric(m) => {
                let sample = frt_embed(m, seed)?;
                let node_of = sample.point_leaf.clone();
                let origin = Origin::Metric { metric: m.clone(), point_leaf: sample.point_leaf.clone() };
                (sample.hst, sample.scale, origin, node_of)
            }
            Space::Pages(n) => {
                let star = Hst::star(&vec![0; *n]);
                let leaf_map: BTreeMap<String, NodeId> = (0..*n).map(|p| (p.to_string(), p + 1)).collect();
                let two = T::one() + T::one();
                (star.with_leaf_map(leaf_map), two, Origin::Pages(*n), (1..=*n).collect())
            }
        };
        let requests = self
            .requests
            .iter()
            .map(|r| Request { id: r.id, loc: node_of[r.loc], arrival: r.arrival.clone(), penalty: r.penalty.scaled(&scale) })
            .collect();
        Ok(TreeInstance { hst: Arc::new(hst), scale, origin, k: self.k, start: self.start.iter().map(|&s| node_of[s]).collect(), requests })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Origin<T> {
    Tree,
    Metric { metric: Metric<T>, point_leaf: Vec<NodeId> },
    Pages(usize),
}

/// An instance on an HST. Distances and penalties are in tree units, which are
/// `scale` times the original units; reports divide by `scale`.
#[derive(Clone, Debug)]
pub struct TreeInstance<T> {
    pub hst: Arc<Hst>,
    pub scale: T,
    pub origin: Origin<T>,
    pub k: usize,
    pub start: Vec<NodeId>,
    pub requests: Vec<Request<T>>,
}

impl<T: Scalar> TreeInstance<T> {
    pub fn from_hst(hst: Hst, k: usize, start: Vec<NodeId>, requests: Vec<Request<T>>) -> Result<Self> {
        let inst = Instance::new(Space::Hst(hst), k, start, requests)?;
        inst.to_tree(0)
    }

    pub fn height(&self) -> usize {
        self.hst.height()
    }

    /// Metric point physically occupied by a server placed at `node`: the point
    /// of the lowest-id leaf below it.
    pub fn physical_point(&self, node: NodeId) -> Option<usize> {
        match &self.origin {
            Origin::Metric { point_leaf, .. } => {
                let leaf = self.hst.subtree(node).into_iter().filter(|&v| self.hst.is_leaf(v)).min()?;
                point_leaf.iter().position(|&l| l == leaf)
            }
            _ => None,
        }
    }
}
