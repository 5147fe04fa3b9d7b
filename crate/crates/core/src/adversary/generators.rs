use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{OsdError, Result};
use crate::instance::{Instance, PenaltyFn, Request, Space};
use crate::metric_hst::{Hst, Metric, NodeId};
use crate::scalar::Scalar;

/// Delay standing in for an infinite penalty rate.
pub fn immediate<T: Scalar>() -> T {
    T::pow2(-20)
}

fn floor_log2_usize(w: usize) -> u32 {
    usize::BITS - 1 - w.leading_zeros()
}

fn build<T: Scalar>(hst: Hst, k: usize, start: Vec<NodeId>, mut reqs: Vec<(NodeId, T, PenaltyFn<T>)>) -> Result<Instance<T>> {
    reqs.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("times are comparable"));
    let requests = reqs.into_iter().enumerate().map(|(id, (loc, arrival, penalty))| Request { id, loc, arrival, penalty }).collect();
    Instance::new(Space::Hst(hst), k, start, requests)
}

/// Star with a heavy leaf `p_0` (node 1, edge `2^floor(log2 W)`) and `n - 1`
/// unit leaves `p_i` (node `i + 1`), server at `p_0`.
pub(super) fn heavy_star(n: usize, w: usize) -> Hst {
    let mut exps = vec![floor_log2_usize(w)];
    exps.extend(std::iter::repeat_n(0, n - 1));
    Hst::star(&exps)
}

/// Light leaves with linear rates `(W+1)^(i+1)` and urgent requests at the heavy
/// leaf shortly after each time `1/(W+1)^i`.
pub fn gen_star_rates<T: Scalar>(n: usize, w: usize) -> Result<Instance<T>> {
    if n < 2 || w < 1 {
        return Err(OsdError::BadParams("star-rates needs n >= 2 and W >= 1".into()));
    }
    let base = T::of_usize(w + 1);
    let pow = |e: usize| (0..e).fold(T::one(), |a, _| a * base.clone());
    let eps = T::one() / (T::of_usize(8) * pow(n));
    let mut reqs = vec![(1, T::zero(), PenaltyFn::deadline_only(eps.clone()))];
    for i in 1..n {
        reqs.push((i + 1, T::zero(), PenaltyFn::linear(pow(i + 1))));
        reqs.push((1, T::one() / pow(i) + eps.clone(), PenaltyFn::deadline_only(eps.clone())));
    }
    build(heavy_star(n, w), 1, vec![1], reqs)
}

/// Light leaf `p_i` must be served within delay `i`; the heavy leaf is
/// requested urgently at every integer time below `n`.
pub fn gen_star_deadlines<T: Scalar>(n: usize, w: usize) -> Result<Instance<T>> {
    if n < 2 || w < 1 {
        return Err(OsdError::BadParams("star-deadlines needs n >= 2 and W >= 1".into()));
    }
    let eps: T = immediate();
    let mut reqs = Vec::new();
    for t in 0..n {
        reqs.push((1, T::of_usize(t), PenaltyFn::deadline_only(eps.clone())));
    }
    for i in 1..n {
        reqs.push((i + 1, T::zero(), PenaltyFn::deadline_only(T::of_usize(i))));
    }
    build(heavy_star(n, w), 1, vec![1], reqs)
}

/// `m` subtrees of edge length `m` below the root, each with `m` unit leaves.
/// Leaf `i` of subtree `j` becomes critical at rank `(i - 1) m + j`.
pub fn gen_spatial<T: Scalar>(m: usize) -> Result<Instance<T>> {
    if m < 2 || !m.is_power_of_two() {
        return Err(OsdError::BadParams("spatial needs m a power of two >= 2".into()));
    }
    let mut parent = vec![None];
    let mut exps = vec![0];
    for _ in 0..m {
        parent.push(Some(0));
        exps.push(floor_log2_usize(m));
    }
    let mut reqs = Vec::new();
    for j in 1..=m {
        for i in 1..=m {
            parent.push(Some(j));
            exps.push(0);
            let leaf = parent.len() - 1;
            reqs.push((leaf, T::zero(), PenaltyFn::deadline_only(T::of_usize((i - 1) * m + j))));
        }
    }
    let hst = Hst::new(parent, exps, BTreeMap::new())?;
    build(hst, 1, vec![0], reqs)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomParams {
    pub leaves: usize,
    /// Exact height of the generated tree.
    pub depth: usize,
    pub requests: usize,
    pub servers: usize,
    /// Probability that a request carries a deadline.
    pub deadline_probability: f64,
    /// Probability that a penalty has a second linear piece.
    pub multi_segment_probability: f64,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams { leaves: 6, depth: 3, requests: 8, servers: 1, deadline_probability: 0.25, multi_segment_probability: 0.25 }
    }
}

fn quarter<T: Scalar>(n: usize) -> T {
    T::of_usize(n) / T::of_usize(4)
}

fn slope<T: Scalar>(rng: &mut ChaCha8Rng) -> T {
    // Slopes 1/2, 1, 2, 4.
    T::pow2(rng.gen_range(-1..=2))
}

pub fn gen_random<T: Scalar>(seed: u64, p: &RandomParams) -> Result<Instance<T>> {
    if p.depth == 0 || p.leaves == 0 || p.servers == 0 || p.depth > 20 {
        return Err(OsdError::BadParams("random instances need depth in 1..=20, leaves >= 1, servers >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = p.depth as u32;
    let mut parent: Vec<Option<NodeId>> = vec![None];
    let mut exps: Vec<u32> = vec![0];
    let mut level = vec![0usize];
    // A spine reaching the exact depth.
    let mut prev = 0;
    for l in 1..=p.depth {
        let lo = d - l as u32;
        let e = if l == 1 { rng.gen_range(d..=d + 2) } else { rng.gen_range(lo..=exps[prev] - 1) };
        parent.push(Some(prev));
        exps.push(e);
        level.push(l);
        prev = parent.len() - 1;
    }
    let mut leaves = 1;
    while leaves < p.leaves {
        let internal: Vec<NodeId> =
            (0..parent.len()).filter(|&v| level[v] < p.depth && parent.contains(&Some(v)) && (v == 0 || exps[v] > 0)).collect();
        let v = *internal.choose(&mut rng).expect("the root is internal");
        let hi = if v == 0 { d + 2 } else { exps[v] - 1 };
        parent.push(Some(v));
        exps.push(rng.gen_range(0..=hi));
        level.push(level[v] + 1);
        leaves += 1;
    }
    let hst = Hst::new(parent, exps, BTreeMap::new())?;
    let leaf_ids = hst.leaves();

    let mut times: Vec<usize> = (0..p.requests).map(|_| rng.gen_range(0..=4 * p.requests.max(1))).collect();
    times.sort_unstable();
    let mut reqs = Vec::new();
    for t in times {
        let loc = *leaf_ids.choose(&mut rng).expect("trees have leaves");
        let mut segs = vec![(T::zero(), slope::<T>(&mut rng))];
        if rng.gen_bool(p.multi_segment_probability) {
            segs.push((T::pow2(rng.gen_range(-1..=1)), slope::<T>(&mut rng)));
        }
        let deadline = if rng.gen_bool(p.deadline_probability) { Some(quarter::<T>(rng.gen_range(1..=16))) } else { None };
        reqs.push((loc, quarter::<T>(t), PenaltyFn::new(segs, deadline)?));
    }
    let start = (0..p.servers).map(|_| *leaf_ids.choose(&mut rng).expect("trees have leaves")).collect();
    build(hst, p.servers, start, reqs)
}

/// Paging with delay on `n` pages and `k` slots: `count` requests at
/// half-integer times with slopes `1, 1/2, 1/4` and an occasional deadline.
pub fn gen_pages<T: Scalar>(seed: u64, n: usize, k: usize, count: usize) -> Result<Instance<T>> {
    if n == 0 || k == 0 {
        return Err(OsdError::BadParams("page instances need n >= 1 and k >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times: Vec<usize> = (0..count).map(|_| rng.gen_range(0..4 * count.max(1))).collect();
    times.sort_unstable();
    let mut requests = Vec::new();
    for (id, t) in times.into_iter().enumerate() {
        let mut penalty = PenaltyFn::linear(T::pow2(-rng.gen_range(0..3)));
        if rng.gen_bool(0.25) {
            penalty.set_deadline(Some(T::of_usize(rng.gen_range(1..6)) / T::of_usize(2)))?;
        }
        let arrival = T::of_usize(t) / T::of_usize(2);
        requests.push(Request { id, loc: rng.gen_range(0..n), arrival, penalty });
    }
    Instance::new(Space::Pages(n), k, vec![0; k], requests)
}

/// Shortest-path metric of a complete graph on `n` points with integer edge
/// weights in `1..=max_weight`.
pub fn gen_metric<T: Scalar>(seed: u64, n: usize, max_weight: usize) -> Result<Metric<T>> {
    if n == 0 || max_weight == 0 {
        return Err(OsdError::BadParams("random metrics need n >= 1 and max_weight >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = vec![vec![0usize; n]; n];
    for u in 0..n {
        for v in u + 1..n {
            let w = rng.gen_range(1..=max_weight);
            d[u][v] = w;
            d[v][u] = w;
        }
    }
    for m in 0..n {
        for u in 0..n {
            for v in 0..n {
                d[u][v] = d[u][v].min(d[u][m] + d[m][v]);
            }
        }
    }
    let names = (0..n).map(|i| format!("p{i}")).collect();
    Metric::new(names, d.into_iter().map(|row| row.into_iter().map(T::of_usize).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    #[test]
    fn star_rates_shape() {
        let inst = gen_star_rates::<Rational>(2, 1).unwrap();
        let Space::Hst(h) = &inst.space else { panic!() };
        assert_eq!(h.len_exp(1), 0);
        let rates: Vec<_> = inst.requests.iter().filter(|r| r.loc == 2).map(|r| r.penalty.segments()[0].1.clone()).collect();
        assert_eq!(rates, vec![Rational::from_integer(4.into())]);
    }

    #[test]
    fn star_deadlines_shape() {
        let inst = gen_star_deadlines::<Rational>(3, 2).unwrap();
        let mut dls: Vec<_> = inst.requests.iter().filter(|r| r.loc != 1).map(|r| r.penalty.deadline().unwrap().clone()).collect();
        dls.sort();
        assert_eq!(dls, vec![Rational::from_integer(1.into()), Rational::from_integer(2.into())]);
        assert_eq!(inst.requests.iter().filter(|r| r.loc == 1).count(), 3);
    }

    #[test]
    fn spatial_order_and_size() {
        let inst = gen_spatial::<Rational>(2).unwrap();
        let Space::Hst(h) = &inst.space else { panic!() };
        let total: usize = h.edges().map(|e| 1usize << h.len_exp(e)).sum();
        assert_eq!(total, 8);
        let mut by_rank: Vec<_> = inst.requests.iter().map(|r| (r.penalty.deadline().unwrap().clone(), r.loc)).collect();
        by_rank.sort();
        // (1,1), (2,1), (1,2), (2,2)
        assert_eq!(by_rank.iter().map(|x| x.1).collect::<Vec<_>>(), vec![3, 5, 4, 6]);
    }

    #[test]
    fn random_is_deterministic_and_exact_depth() {
        let p = RandomParams::default();
        for seed in 0..30 {
            let a = gen_random::<Rational>(seed, &p).unwrap();
            let b = gen_random::<Rational>(seed, &p).unwrap();
            assert_eq!(a, b);
            let Space::Hst(h) = &a.space else { panic!() };
            assert_eq!(h.height(), 3);
            assert_eq!(h.leaves().len(), 6);
            assert_eq!(a.requests.len(), 8);
        }
    }

    #[test]
    fn pages_and_metrics_are_valid() {
        let a = gen_pages::<Rational>(3, 6, 2, 10).unwrap();
        assert_eq!(a, gen_pages::<Rational>(3, 6, 2, 10).unwrap());
        assert_eq!(a.requests.len(), 10);
        let m = gen_metric::<Rational>(1, 16, 20).unwrap();
        assert_eq!(m.len(), 16);
        assert!(m.matrix().iter().flatten().all(|x| *x <= Rational::from_integer(20.into())));
    }
}
