use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use serde_json::{json, Value};

use super::steiner::{steiner_weight, tour_order};
use crate::error::{OsdError, Result};
use crate::instance::{Instance, Space};
use crate::scalar::Scalar;

/// Instants at which the optimum may act.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Grid {
    /// Arrival times only. Exact for nondecreasing penalties.
    Arrivals,
    /// Arrivals, deadlines and penalty breakpoints.
    Full,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleConfig {
    pub max_requests: usize,
    pub grid: Grid,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { max_requests: 10, grid: Grid::Arrivals }
    }
}

/// One server's walk at one epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct Tour<T> {
    pub server: usize,
    /// Locations in visiting order, starting at the server's position.
    pub path: Vec<usize>,
    pub served: Vec<usize>,
    pub cost: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStep<T> {
    pub time: T,
    pub tours: Vec<Tour<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult<T> {
    pub opt_cost: T,
    pub service_cost: T,
    pub delay_penalty: T,
    pub witness: Vec<EpochStep<T>>,
}

impl<T: Scalar> OracleResult<T> {
    pub fn to_json(&self) -> Value {
        let s = |v: &T| Value::String(v.to_decimal_string());
        json!({
            "opt_cost": s(&self.opt_cost),
            "service_cost": s(&self.service_cost),
            "delay_penalty": s(&self.delay_penalty),
            "witness": self.witness.iter().map(|st| json!({
                "time": s(&st.time),
                "tours": st.tours.iter().map(|t| json!({
                    "server": t.server,
                    "path": t.path,
                    "served": t.served,
                    "cost": s(&t.cost),
                })).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Cheapest walks from one position over subsets of a fixed location set.
struct Table<T> {
    /// `cost[mask][j]`: visit `mask`, end at location `j` (meaningful when `j` is in `mask`).
    cost: Vec<Vec<T>>,
    /// Held-Karp predecessors; empty for trees.
    prev: Vec<Vec<usize>>,
}

struct Tours<'a, T> {
    space: &'a Space<T>,
    steiner: HashMap<Vec<usize>, T>,
    tables: HashMap<(usize, Vec<usize>), Rc<Table<T>>>,
}

impl<'a, T: Scalar> Tours<'a, T> {
    fn new(space: &'a Space<T>) -> Self {
        Tours { space, steiner: HashMap::new(), tables: HashMap::new() }
    }

    fn table(&mut self, p: usize, locs: &[usize]) -> Rc<Table<T>> {
        let key = (p, locs.to_vec());
        if let Some(t) = self.tables.get(&key) {
            return t.clone();
        }
        let t = Rc::new(match self.space {
            Space::Hst(h) => {
                let n = locs.len();
                let mut cost = vec![vec![T::zero(); n]; 1 << n];
                for (mask, row) in cost.iter_mut().enumerate().skip(1) {
                    let mut nodes = vec![p];
                    nodes.extend((0..n).filter(|j| mask >> j & 1 == 1).map(|j| locs[j]));
                    nodes.sort_unstable();
                    nodes.dedup();
                    let w = self.steiner.entry(nodes.clone()).or_insert_with(|| steiner_weight(h, &nodes)).clone();
                    for (j, c) in row.iter_mut().enumerate() {
                        if mask >> j & 1 == 1 {
                            *c = w.clone() + w.clone() - h.distance::<T>(p, locs[j]);
                        }
                    }
                }
                Table { cost, prev: Vec::new() }
            }
            space => held_karp(space, p, locs),
        });
        self.tables.insert(key, t.clone());
        t
    }

    fn order(&self, table: &Table<T>, p: usize, locs: &[usize], mask: usize, end: usize) -> Vec<usize> {
        match self.space {
            Space::Hst(h) => {
                let targets: Vec<usize> = (0..locs.len()).filter(|j| mask >> j & 1 == 1).map(|j| locs[j]).collect();
                tour_order(h, p, &targets, locs[end])
            }
            _ => {
                let mut out = Vec::new();
                let (mut m, mut j) = (mask, end);
                while m != 0 {
                    out.push(locs[j]);
                    let pj = table.prev[m][j];
                    m &= !(1 << j);
                    j = pj;
                }
                out.reverse();
                out
            }
        }
    }
}

fn held_karp<T: Scalar>(space: &Space<T>, p: usize, locs: &[usize]) -> Table<T> {
    let n = locs.len();
    let mut cost: Vec<Vec<Option<T>>> = vec![vec![None; n]; 1 << n];
    let mut prev = vec![vec![usize::MAX; n]; 1 << n];
    for j in 0..n {
        cost[1 << j][j] = Some(space.distance(p, locs[j]));
    }
    for mask in 1usize..1 << n {
        for j in 0..n {
            if mask >> j & 1 == 0 || mask == 1 << j {
                continue;
            }
            let rest = mask & !(1 << j);
            let mut best: Option<(T, usize)> = None;
            for i in 0..n {
                if let Some(c) = cost[rest][i].clone() {
                    let c = c + space.distance(locs[i], locs[j]);
                    if best.as_ref().is_none_or(|(b, _)| c < *b) {
                        best = Some((c, i));
                    }
                }
            }
            if let Some((c, i)) = best {
                cost[mask][j] = Some(c);
                prev[mask][j] = i;
            }
        }
    }
    let cost = cost.into_iter().map(|row| row.into_iter().map(|c| c.unwrap_or_else(T::zero)).collect()).collect();
    Table { cost, prev }
}

struct Step {
    epoch: usize,
    server: usize,
    from: usize,
    locs: Vec<usize>,
    mask: usize,
    end: usize,
    served: u64,
}

struct Rec<T> {
    cost: T,
    parent: Option<usize>,
    step: Option<Step>,
}

type Key = (u64, Vec<usize>);

fn relax<T: Scalar>(arena: &mut Vec<Rec<T>>, layer: &mut BTreeMap<Key, usize>, key: Key, rec: Rec<T>) {
    match layer.get(&key) {
        Some(&i) if !(rec.cost < arena[i].cost) => {}
        Some(&i) => arena[i] = rec,
        None => {
            arena.push(rec);
            layer.insert(key, arena.len() - 1);
        }
    }
}

fn epochs<T: Scalar>(inst: &Instance<T>, grid: Grid) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for r in &inst.requests {
        out.push(r.arrival.clone());
        if grid == Grid::Full {
            for b in r.penalty.breakpoints() {
                out.push(r.arrival.clone() + b);
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).expect("times are comparable"));
    out.dedup();
    out
}

/// Exact offline optimum by dynamic programming over decision epochs.
pub fn offline_opt<T: Scalar>(inst: &Instance<T>, cfg: &OracleConfig) -> Result<OracleResult<T>> {
    let n = inst.requests.len();
    if n > cfg.max_requests || n > 63 {
        return Err(OsdError::TooLarge(format!("{n} requests, limit {}", cfg.max_requests.min(63))));
    }
    if inst.k == 0 {
        return Err(OsdError::NoServers);
    }
    if inst.k > 2 {
        return Err(OsdError::TooLarge(format!("{} servers, limit 2", inst.k)));
    }
    let times = epochs(inst, cfg.grid);
    let all: u64 = if n == 0 { 0 } else { u64::MAX >> (64 - n) };
    let arrived: Vec<u64> =
        times.iter().map(|t| inst.requests.iter().enumerate().filter(|(_, r)| r.arrival <= *t).fold(0, |m, (i, _)| m | 1 << i)).collect();
    let forced: Vec<u64> = (0..times.len())
        .map(|ei| {
            let next = times.get(ei + 1);
            inst.requests.iter().enumerate().fold(0, |m, (i, r)| {
                let must = match (next, r.penalty.deadline()) {
                    (None, _) => true,
                    (Some(nx), Some(d)) => *nx > r.arrival.clone() + d.clone(),
                    (Some(_), None) => false,
                };
                if must {
                    m | 1 << i
                } else {
                    m
                }
            }) & arrived[ei]
        })
        .collect();
    let penalty: Vec<Vec<T>> = times
        .iter()
        .map(|t| {
            inst.requests
                .iter()
                .map(|r| if r.arrival <= *t { r.penalty.finite_value(&(t.clone() - r.arrival.clone())) } else { T::zero() })
                .collect()
        })
        .collect();

    let mut tours = Tours::new(&inst.space);
    let mut arena = vec![Rec { cost: T::zero(), parent: None, step: None }];
    let mut layer: BTreeMap<Key, usize> = BTreeMap::new();
    layer.insert((0, inst.start.clone()), 0);
    for ei in 0..times.len() {
        for s in 0..inst.k {
            let last = s + 1 == inst.k;
            let mut next = BTreeMap::new();
            for ((mask, pos), &idx) in &layer {
                let pending = arrived[ei] & !mask;
                let must = forced[ei] & pending;
                let base = arena[idx].cost.clone();
                if !(last && must != 0) {
                    let rec = Rec { cost: base.clone(), parent: Some(idx), step: None };
                    relax(&mut arena, &mut next, (*mask, pos.clone()), rec);
                }
                if pending == 0 {
                    continue;
                }
                let mut locs: Vec<usize> = (0..n).filter(|i| pending >> i & 1 == 1).map(|i| inst.requests[i].loc).collect();
                locs.sort_unstable();
                locs.dedup();
                let loc_mask = |bits: u64| {
                    (0..n)
                        .filter(|i| bits >> i & 1 == 1)
                        .fold(0usize, |m, i| m | 1 << locs.binary_search(&inst.requests[i].loc).expect("pending location"))
                };
                let must_locs = loc_mask(must);
                let table = tours.table(pos[s], &locs);
                for lm in 1usize..1 << locs.len() {
                    if last && lm & must_locs != must_locs {
                        continue;
                    }
                    let served = (0..n)
                        .filter(|&i| pending >> i & 1 == 1)
                        .filter(|&i| lm >> locs.binary_search(&inst.requests[i].loc).expect("pending location") & 1 == 1)
                        .fold(0u64, |m, i| m | 1 << i);
                    let pen = (0..n).filter(|i| served >> i & 1 == 1).fold(T::zero(), |a, i| a + penalty[ei][i].clone());
                    for q in 0..locs.len() {
                        if lm >> q & 1 == 0 {
                            continue;
                        }
                        let mut np = pos.clone();
                        np[s] = locs[q];
                        let rec = Rec {
                            cost: base.clone() + table.cost[lm][q].clone() + pen.clone(),
                            parent: Some(idx),
                            step: Some(Step { epoch: ei, server: s, from: pos[s], locs: locs.clone(), mask: lm, end: q, served }),
                        };
                        relax(&mut arena, &mut next, (mask | served, np), rec);
                    }
                }
            }
            layer = next;
        }
    }
    let best = layer
        .iter()
        .filter(|((m, _), _)| *m == all)
        .map(|(_, &i)| i)
        .fold(None, |acc: Option<usize>, i| match acc {
            Some(b) if !(arena[i].cost < arena[b].cost) => Some(b),
            _ => Some(i),
        })
        .ok_or_else(|| OsdError::Internal("no feasible schedule".into()))?;

    let mut steps = Vec::new();
    let mut cur = Some(best);
    while let Some(i) = cur {
        if let Some(st) = &arena[i].step {
            steps.push(st);
        }
        cur = arena[i].parent;
    }
    steps.reverse();
    let mut witness: Vec<EpochStep<T>> = Vec::new();
    let (mut service, mut delay) = (T::zero(), T::zero());
    for st in steps {
        let table = tours.table(st.from, &st.locs);
        let mut path = vec![st.from];
        path.extend(tours.order(&table, st.from, &st.locs, st.mask, st.end));
        let cost = table.cost[st.mask][st.end].clone();
        service = service + cost.clone();
        let served: Vec<usize> = (0..n).filter(|i| st.served >> i & 1 == 1).collect();
        for &r in &served {
            delay = delay + penalty[st.epoch][r].clone();
        }
        let tour = Tour { server: st.server, path, served, cost };
        match witness.last_mut() {
            Some(w) if w.time == times[st.epoch] => w.tours.push(tour),
            _ => witness.push(EpochStep { time: times[st.epoch].clone(), tours: vec![tour] }),
        }
    }
    Ok(OracleResult { opt_cost: arena[best].cost.clone(), service_cost: service, delay_penalty: delay, witness })
}

/// Recomputes a witness's cost from scratch, checking feasibility.
pub fn replay_witness<T: Scalar>(inst: &Instance<T>, res: &OracleResult<T>) -> Result<T> {
    let bad = |m: String| Err(OsdError::InvariantViolation(m));
    let mut pos = inst.start.clone();
    let mut served: Vec<bool> = vec![false; inst.requests.len()];
    let mut total = T::zero();
    let mut prev: Option<&T> = None;
    for st in &res.witness {
        if prev.is_some_and(|p| st.time <= *p) {
            return bad("witness epochs must increase".into());
        }
        prev = Some(&st.time);
        for tour in &st.tours {
            if tour.server >= pos.len() || tour.path.first() != Some(&pos[tour.server]) {
                return bad(format!("tour for server {} does not start at its position", tour.server));
            }
            let walk = tour.path.windows(2).fold(T::zero(), |a, w| a + inst.space.distance(w[0], w[1]));
            if walk != tour.cost {
                return bad(format!("tour cost {} differs from its walk {}", tour.cost, walk));
            }
            total = total + walk;
            for &r in &tour.served {
                let req = &inst.requests[r];
                let delay = st.time.clone() - req.arrival.clone();
                if served[r] || delay.is_negative() || !tour.path.contains(&req.loc) {
                    return bad(format!("request {r} cannot be served at {}", st.time));
                }
                if req.penalty.deadline().is_some_and(|d| delay > *d) {
                    return bad(format!("request {r} served after its deadline"));
                }
                served[r] = true;
                total = total + req.penalty.finite_value(&delay);
            }
            pos[tour.server] = *tour.path.last().expect("paths are nonempty");
        }
    }
    if let Some(r) = served.iter().position(|s| !s) {
        return bad(format!("request {r} is never served"));
    }
    Ok(total)
}
