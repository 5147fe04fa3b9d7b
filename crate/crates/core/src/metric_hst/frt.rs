//! Random hierarchical decomposition of a finite metric into an HST.
//!
//! Distances are first scaled so the minimum nonzero distance is at least 1.
//! With `beta = 2^U`, `U ~ [0,1)`, and a uniformly random point order, level-`i`
//! clusters collect the points within radius `beta * 2^(i-1)` of the first
//! center in the order. The edge from a level-`j` cluster to a child cluster has
//! length `2^j`, so two points first separated below a level-`(i+1)` cluster are
//! at tree distance `2^(i+3) - 4 >= 2^(i+2) > d`.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Hst, Metric, NodeId};
use crate::error::{OsdError, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct PairDistortion<T> {
    pub u: usize,
    pub v: usize,
    pub metric: T,
    /// Tree distance in the metric's original units.
    pub tree: T,
    pub ratio: T,
}

#[derive(Clone, Debug)]
pub struct EmbeddingSample<T> {
    pub hst: Hst,
    pub seed: u64,
    /// Tree distances equal `scale` times distances in the original units.
    pub scale: T,
    /// Leaf of each metric point, by point index.
    pub point_leaf: Vec<NodeId>,
    pub distortion: Vec<PairDistortion<T>>,
}

impl<T: Scalar> EmbeddingSample<T> {
    pub fn dominates(&self) -> bool {
        self.distortion.iter().all(|p| p.tree >= p.metric)
    }
}

pub fn frt_embed<T: Scalar>(metric: &Metric<T>, seed: u64) -> Result<EmbeddingSample<T>> {
    let n = metric.len();
    if n == 0 {
        return Err(OsdError::EmptyMetric);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut dmin: Option<T> = None;
    let mut dmax = T::zero();
    for u in 0..n {
        for v in (u + 1)..n {
            let d = metric.dist(u, v).clone();
            dmin = Some(match dmin {
                Some(m) if m <= d => m,
                _ => d.clone(),
            });
            dmax = T::max_of(dmax, d);
        }
    }
    let scale = match &dmin {
        Some(m) if *m < T::one() => T::one() / m.clone(),
        _ => T::one(),
    };
    let dist = |u: usize, v: usize| metric.dist(u, v).clone() * scale.clone();
    let delta = dmax * scale.clone();

    // Smallest depth with 2^(depth-1) >= delta, so the top radius covers everything.
    let mut depth: i32 = 1;
    while T::pow2(depth - 1) < delta {
        depth += 1;
    }

    let u: f64 = rng.gen_range(0.0..1.0);
    let beta = T::from_f64(2f64.powf(u).clamp(1.0, 2.0 - f64::EPSILON)).unwrap_or_else(T::one);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let mut parent: Vec<Option<NodeId>> = vec![None];
    let mut len_exp: Vec<u32> = vec![0];
    let mut clusters: Vec<(NodeId, Vec<usize>)> = vec![(0, (0..n).collect())];
    for level in (0..depth).rev() {
        let radius = beta.clone() * T::pow2(level - 1);
        let mut next = Vec::new();
        for (node, members) in clusters {
            let mut parts: Vec<(usize, Vec<usize>)> = Vec::new();
            for &p in &members {
                let center = order.iter().copied().find(|&c| dist(c, p) <= radius).expect("a point is within radius of itself");
                match parts.iter_mut().find(|(c, _)| *c == center) {
                    Some((_, v)) => v.push(p),
                    None => parts.push((center, vec![p])),
                }
            }
            parts.sort_by_key(|(_, v)| v[0]);
            for (_, part) in parts {
                let child = parent.len();
                parent.push(Some(node));
                len_exp.push((level + 1) as u32);
                next.push((child, part));
            }
        }
        clusters = next;
    }

    let mut point_leaf = vec![0; n];
    let mut leaf_map = BTreeMap::new();
    for (node, members) in &clusters {
        debug_assert_eq!(members.len(), 1);
        point_leaf[members[0]] = *node;
        leaf_map.insert(metric.names()[members[0]].clone(), *node);
    }
    let hst = Hst::new(parent, len_exp, leaf_map)?;

    let mut distortion = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let tree: T = hst.distance::<T>(point_leaf[u], point_leaf[v]) / scale.clone();
            let m = metric.dist(u, v).clone();
            let ratio = tree.clone() / m.clone();
            distortion.push(PairDistortion { u, v, metric: m, tree, ratio });
        }
    }
    Ok(EmbeddingSample { hst, seed, scale, point_leaf, distortion })
}
